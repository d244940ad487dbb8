#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "iongate/fidelity.hpp"
#include "iongate/ms_gate.hpp"
#include "iongate/rng.hpp"

using namespace iongate;

namespace {

Mat4 kron4(const Mat2& a, const Mat2& b) {
  Mat4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

Mat4 random_unitary4(Rng& rng) {
  Mat4 g;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) g(i, j) = cplx(rng.normal(0, 1), rng.normal(0, 1));
  Eigen::HouseholderQR<Mat4> qr(g);
  Mat4 q = qr.householderQ();
  // fix column phases so the distribution is Haar
  Mat4 r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < 4; ++j) q.col(j) *= r(j, j) / std::abs(r(j, j));
  return q;
}

Mat2 random_unitary2(Rng& rng) {
  Mat2 g;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) g(i, j) = cplx(rng.normal(0, 1), rng.normal(0, 1));
  Eigen::HouseholderQR<Mat2> qr(g);
  return qr.householderQ();
}

// Random CPTP channel with `r` Kraus operators via a Haar isometry.
QubitChannel random_channel(int r, Rng& rng) {
  Eigen::MatrixXcd g(4 * r, 4);
  for (int i = 0; i < 4 * r; ++i)
    for (int j = 0; j < 4; ++j) g(i, j) = cplx(rng.normal(0, 1), rng.normal(0, 1));
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  Eigen::MatrixXcd iso = Eigen::MatrixXcd(qr.householderQ()).leftCols(4);
  QubitChannel c;
  for (int k = 0; k < r; ++k) c.kraus.push_back(iso.middleRows(4 * k, 4));
  return c;
}

const Mat4 kSwap = [] {
  Mat4 s = Mat4::Zero();
  s(0, 0) = s(3, 3) = 1.0;
  s(1, 2) = s(2, 1) = 1.0;
  return s;
}();

QubitChannel conjugate_channel(const QubitChannel& c, const Mat4& v) {
  QubitChannel out;
  for (const Mat4& k : c.kraus) out.kraus.push_back(v * k * v.adjoint());
  return out;
}

}  // namespace

TEST_CASE("Pauli eigenbasis is orthonormal with the fixed convention") {
  PauliEigenbasis b = PauliEigenbasis::standard();
  const Mat2 ops[3] = {sigma_x(), sigma_y(), sigma_z()};
  for (int a = 0; a < 3; ++a) {
    for (int s = 0; s < 2; ++s) {
      const auto& psi = b.states[2 * a + s];
      const double ev = s == 0 ? 1.0 : -1.0;
      CHECK((ops[a] * psi - ev * psi).norm() < 1e-14);
      CHECK(std::abs(psi.norm() - 1.0) < 1e-14);
    }
    CHECK(std::abs(cplx(b.states[2 * a].adjoint() * b.states[2 * a + 1])) < 1e-14);
  }
  CHECK(b.states[4](0) == cplx(1.0, 0.0));
  CHECK(std::abs(b.states[0](1) - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(b.states[2](1) - cplx(0.0, 1.0 / std::sqrt(2.0))) < 1e-15);
}

TEST_CASE("ideal channel against itself gives F_avg = 1 for 20 random unitaries") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Mat4 g = random_unitary4(rng);
    const QubitChannel c = QubitChannel::unitary(g);
    CHECK(c.completeness_defect() < 1e-12);
    CHECK(s_plus(c, g) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s_minus(c, g) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(avg_fidelity(c, g) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("completely depolarizing channel gives 1/4 everywhere") {
  const QubitChannel c = QubitChannel::depolarizing(1.0);
  CHECK(c.completeness_defect() < 1e-12);
  Rng rng(7);
  const Mat4 g = random_unitary4(rng);
  // output is I/4 for any input
  const Mat4 out = c.apply(g * Mat4::Identity() * g.adjoint() / 4.0);
  CHECK((out - Mat4::Identity() / 4.0).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(s_plus(c, g) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(s_minus(c, g) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(avg_fidelity(c, g) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(avg_fidelity_from_process(c, g) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("oracle equivalence on 50 random CPTP channels") {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const int r = 1 + rng.uniform_int(6);
    const QubitChannel c = random_channel(r, rng);
    REQUIRE(c.completeness_defect() < 1e-12);
    const Mat4 g = random_unitary4(rng);
    const double direct = avg_fidelity(c, g);
    const double oracle = avg_fidelity_from_process(c, g);
    CHECK(std::abs(direct - oracle) <= 1e-10);
  }
}

TEST_CASE("SWAP invariance") {
  Rng rng(13);
  for (int t = 0; t < 5; ++t) {
    const QubitChannel c = random_channel(3, rng);
    const Mat4 g = random_unitary4(rng);
    const double f0 = avg_fidelity(c, g);
    const double f1 = avg_fidelity(conjugate_channel(c, kSwap), kSwap * g * kSwap);
    CHECK(f0 == doctest::Approx(f1).epsilon(1e-12));
  }
}

TEST_CASE("local Clifford invariance") {
  const Mat2 h = (Mat2() << 1, 1, 1, -1).finished() / std::sqrt(2.0);
  const Mat2 s = (Mat2() << 1, 0, 0, cplx(0, 1)).finished();
  const std::vector<Mat2> cliffords = {Mat2::Identity(), h, s, h * s, s * h, s * s * h};
  Rng rng(17);
  for (int t = 0; t < 6; ++t) {
    const QubitChannel c = random_channel(2, rng);
    const Mat4 g = random_unitary4(rng);
    const Mat4 v = kron4(cliffords[rng.uniform_int(cliffords.size())],
                         cliffords[rng.uniform_int(cliffords.size())]);
    const double f0 = avg_fidelity(c, g);
    const double f1 = avg_fidelity(conjugate_channel(c, v), v * g * v.adjoint());
    CHECK(f0 == doctest::Approx(f1).epsilon(1e-12));
  }
}

TEST_CASE("global phase convention change leaves S+ and S- unchanged") {
  Rng rng(19);
  const QubitChannel c = random_channel(3, rng);
  const Mat4 g = random_unitary4(rng);
  PauliEigenbasis rephased = PauliEigenbasis::standard();
  for (int i = 0; i < 6; ++i)
    rephased.states[i] *= std::exp(cplx(0.0, rng.uniform() * 2.0 * kPi));
  CHECK(s_plus(c, g) == doctest::Approx(s_plus(c, g, rephased)).epsilon(1e-12));
  CHECK(s_minus(c, g) == doctest::Approx(s_minus(c, g, rephased)).epsilon(1e-12));
}

TEST_CASE("F_avg decreases monotonically with depolarizing strength") {
  Rng rng(23);
  const Mat4 g = random_unitary4(rng);
  double prev = 1.1;
  for (double s : {0.0, 1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0}) {
    const double f = avg_fidelity(QubitChannel::depolarizing(s).compose(
                                      QubitChannel::unitary(g)),
                                  g);
    CHECK(f < prev);
    prev = f;
  }
  // weak depolarizing: F_avg = 1 - 3s/4 + O(s^2) for the two-qubit channel
  const double f = avg_fidelity(
      QubitChannel::depolarizing(1e-3).compose(QubitChannel::unitary(g)), g);
  CHECK(f == doctest::Approx(1.0 - 0.75 * 1e-3).epsilon(1e-6));
}

TEST_CASE("sampled evaluation matches the exact sums for a deterministic channel") {
  Rng rng(29);
  const QubitChannel c = random_channel(3, rng);
  const Mat4 g = random_unitary4(rng);
  const NoisyStateFn fn = [&](const Eigen::Vector4cd& psi, std::uint64_t) {
    return c.apply(psi * psi.adjoint());
  };
  for (NoiseSampling mode : {NoiseSampling::Independent, NoiseSampling::Shared}) {
    const SampledFidelity sf = avg_fidelity_sampled(fn, g, 3, 31, mode);
    CHECK(sf.s_plus == doctest::Approx(s_plus(c, g)).epsilon(1e-12));
    CHECK(sf.s_minus == doctest::Approx(s_minus(c, g)).epsilon(1e-12));
    CHECK(sf.f_avg == doctest::Approx(avg_fidelity(c, g)).epsilon(1e-12));
  }
}

TEST_CASE("both sampling modes agree in the mean for a stochastic channel") {
  // random over-rotation of a one-qubit phase: a quasi-static dephasing draw
  Rng rng(37);
  const Mat4 g = random_unitary4(rng);
  const double rms = 0.05;
  const NoisyStateFn fn = [&](const Eigen::Vector4cd& psi, std::uint64_t seed) {
    Rng draw(seed);
    const double phase = draw.normal(0.0, rms);
    Mat2 rz = Mat2::Identity();
    rz(1, 1) = std::exp(cplx(0.0, phase));
    const Mat4 u = g * kron4(rz, rz);
    return Mat4(u * psi * psi.adjoint() * u.adjoint());
  };
  const SampledFidelity ind = avg_fidelity_sampled(fn, g, 400, 41, NoiseSampling::Independent);
  const SampledFidelity shared = avg_fidelity_sampled(fn, g, 400, 43, NoiseSampling::Shared);
  CHECK(std::abs(ind.f_avg - shared.f_avg) < 5e-4);
  CHECK(ind.f_avg < 1.0);
}
