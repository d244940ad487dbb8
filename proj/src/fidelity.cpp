#include "iongate/fidelity.hpp"

#include <cmath>
#include <stdexcept>

#include "iongate/rng.hpp"

namespace iongate {

namespace {

Mat2 kPauli1[4];

const Mat2* paulis1() {
  static bool init = [] {
    kPauli1[0] = Mat2::Identity();
    kPauli1[1] = sigma_x();
    kPauli1[2] = sigma_y();
    kPauli1[3] = sigma_z();
    return true;
  }();
  (void)init;
  return kPauli1;
}

Mat4 kron(const Mat2& a, const Mat2& b) {
  Mat4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

Eigen::Vector4cd kron_vec(const Eigen::Vector2cd& a, const Eigen::Vector2cd& b) {
  Eigen::Vector4cd out;
  out << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
  return out;
}

}  // namespace

QubitChannel QubitChannel::unitary(const Mat4& u) { return QubitChannel{{u}}; }

QubitChannel QubitChannel::depolarizing(double strength) {
  if (strength < 0.0 || strength > 16.0 / 15.0)
    throw std::invalid_argument("depolarizing: strength outside [0, 16/15]");
  const Mat2* p = paulis1();
  QubitChannel c;
  c.kraus.reserve(16);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double w = (i == 0 && j == 0) ? 1.0 - 15.0 * strength / 16.0 : strength / 16.0;
      c.kraus.push_back(std::sqrt(w) * kron(p[i], p[j]));
    }
  return c;
}

Mat4 QubitChannel::apply(const Mat4& rho) const {
  Mat4 out = Mat4::Zero();
  for (const Mat4& k : kraus) out += k * rho * k.adjoint();
  return out;
}

QubitChannel QubitChannel::compose(const QubitChannel& inner) const {
  QubitChannel c;
  c.kraus.reserve(kraus.size() * inner.kraus.size());
  for (const Mat4& a : kraus)
    for (const Mat4& b : inner.kraus) c.kraus.push_back(a * b);
  return c;
}

double QubitChannel::completeness_defect() const {
  Mat4 s = Mat4::Zero();
  for (const Mat4& k : kraus) s += k.adjoint() * k;
  return (s - Mat4::Identity()).cwiseAbs().maxCoeff();
}

PauliEigenbasis PauliEigenbasis::standard() {
  const double r = 1.0 / std::sqrt(2.0);
  PauliEigenbasis b;
  b.states[0] << r, r;                  // +x
  b.states[1] << r, -r;                 // -x
  b.states[2] << r, cplx(0.0, r);       // +y
  b.states[3] << r, cplx(0.0, -r);      // -y
  b.states[4] << 1.0, 0.0;              // +z
  b.states[5] << 0.0, 1.0;              // -z
  return b;
}

namespace {

// The two 36-term sums share the per-input rho_noisy; computing them together
// halves the channel applications.
void pauli_state_sums(const QubitChannel& channel, const Mat4& ideal,
                      const PauliEigenbasis& basis, double* out_plus, double* out_minus) {
  KahanSum sp, sm;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const Eigen::Vector4cd psi = kron_vec(basis.states[i], basis.states[j]);
      const Eigen::Vector4cd bar = kron_vec(basis.states[PauliEigenbasis::orthogonal(i)],
                                            basis.states[PauliEigenbasis::orthogonal(j)]);
      const Mat4 rho_noisy = channel.apply(psi * psi.adjoint());
      sp.add(std::real(cplx(psi.adjoint() * ideal.adjoint() * rho_noisy * ideal * psi)));
      sm.add(std::real(cplx(bar.adjoint() * ideal.adjoint() * rho_noisy * ideal * bar)));
    }
  if (out_plus) *out_plus = sp.sum / 36.0;
  if (out_minus) *out_minus = sm.sum / 36.0;
}

}  // namespace

double s_plus(const QubitChannel& channel, const Mat4& ideal) {
  return s_plus(channel, ideal, PauliEigenbasis::standard());
}

double s_plus(const QubitChannel& channel, const Mat4& ideal, const PauliEigenbasis& basis) {
  double v = 0.0;
  pauli_state_sums(channel, ideal, basis, &v, nullptr);
  return v;
}

double s_minus(const QubitChannel& channel, const Mat4& ideal) {
  return s_minus(channel, ideal, PauliEigenbasis::standard());
}

double s_minus(const QubitChannel& channel, const Mat4& ideal, const PauliEigenbasis& basis) {
  double v = 0.0;
  pauli_state_sums(channel, ideal, basis, nullptr, &v);
  return v;
}

double avg_fidelity(const QubitChannel& channel, const Mat4& ideal) {
  double sp = 0.0, sm = 0.0;
  pauli_state_sums(channel, ideal, PauliEigenbasis::standard(), &sp, &sm);
  return 6.0 / 5.0 * sp + 3.0 / 5.0 * sm - 1.0 / 5.0;
}

SampledFidelity avg_fidelity_sampled(const NoisyStateFn& rho_noisy, const Mat4& ideal,
                                     int draws, std::uint64_t seed, NoiseSampling mode) {
  if (draws < 1) throw std::invalid_argument("avg_fidelity_sampled: draws < 1");
  const PauliEigenbasis basis = PauliEigenbasis::standard();
  KahanSum sp, sm;
  for (int d = 0; d < draws; ++d) {
    const std::uint64_t draw_base = derive_seed(seed, d);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        const std::uint64_t draw_seed =
            mode == NoiseSampling::Shared ? draw_base : derive_seed(draw_base, 6 * i + j);
        const Eigen::Vector4cd psi = kron_vec(basis.states[i], basis.states[j]);
        const Eigen::Vector4cd bar = kron_vec(basis.states[PauliEigenbasis::orthogonal(i)],
                                              basis.states[PauliEigenbasis::orthogonal(j)]);
        const Mat4 rho = rho_noisy(psi, draw_seed);
        sp.add(std::real(cplx(psi.adjoint() * ideal.adjoint() * rho * ideal * psi)));
        sm.add(std::real(cplx(bar.adjoint() * ideal.adjoint() * rho * ideal * bar)));
      }
  }
  SampledFidelity out;
  out.s_plus = sp.sum / (36.0 * draws);
  out.s_minus = sm.sum / (36.0 * draws);
  out.f_avg = 6.0 / 5.0 * out.s_plus + 3.0 / 5.0 * out.s_minus - 1.0 / 5.0;
  return out;
}

double process_fidelity(const QubitChannel& channel, const Mat4& ideal) {
  // Choi matrix from the channel action on the operator basis |i><j|.
  const int d = 4;
  Eigen::MatrixXcd choi = Eigen::MatrixXcd::Zero(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      Mat4 eij = Mat4::Zero();
      eij(i, j) = 1.0;
      const Mat4 out = channel.apply(eij);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) choi(i * d + a, j * d + b) = out(a, b) / double(d);
    }
  // |phi_G> = (I x G) |Omega> with |Omega> = sum_i |ii>/sqrt(d); in this
  // ordering the first index is the input copy.
  Eigen::VectorXcd phi = Eigen::VectorXcd::Zero(d * d);
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < d; ++a) phi(i * d + a) += ideal(a, i) / std::sqrt(double(d));
  return std::real(cplx(phi.adjoint() * choi * phi));
}

double avg_fidelity_from_process(const QubitChannel& channel, const Mat4& ideal) {
  return (4.0 * process_fidelity(channel, ideal) + 1.0) / 5.0;
}

}  // namespace iongate
