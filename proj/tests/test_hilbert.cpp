#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "iongate/hilbert.hpp"

using namespace iongate;

namespace {
double transfer_prob(const Mat2& u) { return std::norm(u(1, 0)); }  // |<down|U|up>|^2
}

TEST_CASE("pauli_rotation basics") {
  Mat2 u = pauli_rotation({kPi, 0.0});
  Mat2 expect = cplx(0, -1) * sigma_x();
  CHECK((u - expect).cwiseAbs().maxCoeff() < 1e-12);

  Mat2 id = pauli_rotation({0.0, 1.234});
  CHECK((id - Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-12);

  Mat2 h = pauli_rotation({kPi / 2.0, kPi / 2.0});
  CHECK(std::abs(std::norm(h(0, 0)) - 0.5) < 1e-12);

  for (double th : {0.1, 1.0, 2.5})
    for (double ph : {0.0, 0.7, 4.0}) CHECK(unitarity_defect(pauli_rotation({th, ph})) < 1e-12);
}

TEST_CASE("pulse_with_errors reduces to pauli_rotation at zero error") {
  Mat2 a = pulse_with_errors(1.3, 0.4, 0.0, 0.0, 1.0e5);
  Mat2 b = pauli_rotation({1.3, 0.4});
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("composite pi transfer: ideal and amplitude-robust") {
  const double rabi = 2.0 * kPi * 100e3;
  Mat2 ideal = composite_pi_transfer(0.0, 0.0, rabi);
  CHECK(transfer_prob(ideal) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(distance_up_to_phase(ideal, pauli_rotation({kPi, 0.0})) < 1e-10);
  CHECK(unitarity_defect(ideal) < 1e-10);

  // 1% amplitude error: composite beats a single pi pulse by orders of magnitude
  const double single_err = 1.0 - transfer_prob(pulse_with_errors(kPi, 0.0, 0.01, 0.0, rabi));
  const double comp_err = 1.0 - transfer_prob(composite_pi_transfer(0.01, 0.0, rabi));
  CHECK(single_err == doctest::Approx(std::pow(std::sin(kPi * 0.005), 2)).epsilon(1e-9));
  CHECK(comp_err < 1e-8);
  CHECK(comp_err < single_err);
}

TEST_CASE("composite pi transfer: two-way error scale") {
  // error knobs chosen so the round-trip (two transfers) infidelity sits at the
  // few-1e-4 scale of a realistic microwave transfer
  const double rabi = 2.0 * kPi * 100e3;
  const double detuning = 0.012 * rabi;
  Mat2 u = composite_pi_transfer(0.003, detuning, rabi);
  const double one_way = transfer_prob(u);
  const double two_way = one_way * one_way;  // independent there-and-back transfers
  const double eps = 1.0 - two_way;
  CHECK(eps > 1e-4);
  CHECK(eps < 1.6e-3);
}

TEST_CASE("spin echo variants") {
  auto [r3, r4] = spin_echo_sequence();
  CHECK(std::norm(r3(0, 0)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::norm(r4(0, 0)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(unitarity_defect(r3) < 1e-10);
  CHECK(unitarity_defect(r4) < 1e-10);

  // identical inserted static phase keeps the two variants' bright populations equal
  for (double dphi : {0.05, 0.3, 1.0}) {
    Mat2 a = spin_echo_variant(kPi / 2.0, dphi);
    Mat2 b = spin_echo_variant(3.0 * kPi / 2.0, dphi);
    CHECK(std::abs(std::norm(a(0, 0)) - std::norm(b(0, 0))) < 1e-12);
  }
}

TEST_CASE("sideband matrix elements") {
  CHECK(std::abs(sideband_matrix_element(0, 0, 0.0) - cplx(1.0, 0.0)) < 1e-14);

  const double eta = 0.19;
  const cplx expect = cplx(0.0, 1.0) * eta * std::exp(-eta * eta / 2.0);
  CHECK(std::abs(sideband_matrix_element(1, 0, eta) - expect) < 1e-12);
  CHECK(std::abs(expect.imag() - 0.18659) < 1e-4);

  // operator symmetry: <n|e^{i eta (b+b^dag)}|m> = <m|e^{i eta (b+b^dag)}|n>
  for (int n = 0; n < 6; ++n)
    for (int m = 0; m < 6; ++m)
      CHECK(std::abs(sideband_matrix_element(n, m, 0.3) - sideband_matrix_element(m, n, 0.3)) <
            1e-13);

  // unitary row norm away from the truncation edge
  Mat op = sideband_operator(20, 0.3);
  for (int n = 0; n <= 10; ++n) {
    double row = 0.0;
    for (int m = 0; m <= 20; ++m) row += std::norm(op(n, m));
    CHECK(std::abs(row - 1.0) < 1e-6);
  }
}

TEST_CASE("sideband operator unitary on lower subspace") {
  Mat op = sideband_operator(20, 0.3);
  Mat d = op.adjoint() * op;
  for (int n = 0; n <= 10; ++n)
    for (int m = 0; m <= 10; ++m) {
      const double expect = (n == m) ? 1.0 : 0.0;
      CHECK(std::abs(d(n, m) - cplx(expect, 0.0)) < 1e-6);
    }
}

TEST_CASE("displacement matrix elements") {
  // D(0) = I
  CHECK(std::abs(displacement_matrix_element(0, 0, cplx(0, 0)) - cplx(1, 0)) < 1e-14);
  // column norm of D(alpha) is 1 (unitary)
  const cplx alpha(0.3, -0.2);
  double norm = 0.0;
  for (int m = 0; m < 30; ++m) norm += std::norm(displacement_matrix_element(m, 2, alpha));
  CHECK(std::abs(norm - 1.0) < 1e-10);
  // diagonal element matches the Laguerre form
  CHECK(std::abs(displacement_matrix_element(3, 3, alpha) -
                 cplx(displacement_diagonal(3, std::norm(alpha)), 0.0)) < 1e-12);
}

TEST_CASE("micromotion factor") {
  CHECK(micromotion_factor(2, 2.9) == doctest::Approx(0.4832).epsilon(2e-3));
  CHECK(micromotion_factor(2, 0.0) == doctest::Approx(0.0));
  const double d = (micromotion_factor(2, 2.9 + 1e-4) - micromotion_factor(2, 2.9 - 1e-4)) / 2e-4;
  CHECK(std::abs(d) <= 0.05);
}

TEST_CASE("SpinMotionState invariants and partial traces") {
  Eigen::Vector4cd bell;
  bell << 1.0 / std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0);
  SpinMotionState s = SpinMotionState::spin_thermal(20, bell, 0.05);
  CHECK(s.hermiticity_defect() < 1e-12);
  CHECK(s.trace_defect() < 1e-12);
  CHECK(s.min_eigenvalue() > -1e-12);
  CHECK(s.trailing_population() < 1e-8);

  Eigen::Matrix4cd spin = s.spin_rho();
  CHECK(std::abs(spin(0, 0) - cplx(0.5, 0.0)) < 1e-12);
  CHECK(std::abs(spin(0, 3) - cplx(0.5, 0.0)) < 1e-12);
  Mat motion = s.motion_rho();
  CHECK(std::abs(motion.trace() - cplx(1.0, 0.0)) < 1e-12);
  // thermal mean occupation
  double nbar = 0.0;
  for (int n = 0; n <= 20; ++n) nbar += n * std::real(motion(n, n));
  CHECK(nbar == doctest::Approx(0.05).epsilon(1e-6));
}
