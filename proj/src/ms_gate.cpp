#include "iongate/ms_gate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "iongate/rng.hpp"

namespace iongate {

namespace {
const cplx kI(0.0, 1.0);

// I(t) = int_0^t e^{-i nu s} ds with series fallback near nu = 0.
cplx phase_integral(double nu, double t) {
  const double x = nu * t;
  if (std::abs(x) < 1e-4) {
    return t * (cplx(1.0, 0.0) - kI * (x / 2.0) - cplx(x * x / 6.0, 0.0) +
                kI * (x * x * x / 24.0));
  }
  return (1.0 - std::polar(1.0, -x)) / (kI * nu);
}

// t - sin(nu t)/nu, stable near nu = 0.
double lobe_integral(double nu, double t) {
  const double x = nu * t;
  if (std::abs(x) < 1e-4) return nu * t * t * t / 6.0 - nu * nu * nu * std::pow(t, 5) / 120.0;
  return t - std::sin(x) / nu;
}

std::array<cplx, 4> branch_couplings(const GateConfig& cfg, double omega_scale) {
  const cplx e1 = std::polar(1.0, cfg.motion_phase(0));
  const cplx e2 = std::polar(1.0, cfg.motion_phase(1));
  const double amp = 0.5 * cfg.eta_S * cfg.omega * omega_scale;
  std::array<cplx, 4> c;
  for (int br = 0; br < 4; ++br) {
    const double s1 = (br < 2) ? 1.0 : -1.0;
    const double s2 = (br % 2 == 0) ? 1.0 : -1.0;
    c[br] = amp * (s1 * e1 + s2 * e2);
  }
  return c;
}
}  // namespace

double Envelope::value(double t, double t_gate) const {
  const double r = rise_fall;
  if (t < 0.0 || t > t_gate + r) return 0.0;
  if (r <= 0.0) return 1.0;
  if (t < r) return 0.5 * (1.0 - std::cos(kPi * t / r));
  if (t <= t_gate) return 1.0;
  return 0.5 * (1.0 - std::cos(kPi * (t_gate + r - t) / r));
}

double GateConfig::closure_defect() const {
  const double ideal = 2.0 * kPi * loops / delta;
  return std::abs(t_gate - ideal) / ideal;
}

double GateConfig::max_entanglement_defect() const {
  return std::abs(eta_S * omega - delta / 2.0) / (delta / 2.0);
}

GateConfig GateConfig::closed_gate(double t, int loops, double eta_S, double rise_fall) {
  GateConfig cfg;
  cfg.eta_S = eta_S;
  cfg.t_gate = t;
  cfg.rise_fall = rise_fall;
  cfg.loops = loops;
  cfg.delta = 2.0 * kPi * loops / t;
  cfg.omega = cfg.delta / (2.0 * eta_S);
  if (rise_fall > 0.0) {
    // Geometric phase scales as Omega^2; rescale so the ramped pulse still
    // accumulates -pi/2 on the stretched branches.
    BranchAmplitudes amp = ld_branch_amplitudes(cfg, cfg.envelope());
    cfg.omega *= std::sqrt((kPi / 2.0) / std::abs(amp.phase[0]));
  }
  return cfg;
}

Eigen::Vector4cd GateConfig::bell_target() const {
  Eigen::Vector4cd v = Eigen::Vector4cd::Zero();
  v(0) = 1.0 / std::sqrt(2.0);
  v(3) = std::polar(1.0 / std::sqrt(2.0), -(spin_phase(0) + spin_phase(1) + kPi / 2.0));
  return v;
}

bool NoiseModel::all_zero() const {
  return raman_rate == 0.0 && rayleigh_error == 0.0 && mode_freq_rms == 0.0 &&
         rabi_frac_rms == 0.0 && nbar_C == 0.0 && nbar_S == 0.0 && heating_rate_S == 0.0 &&
         heating_rate_C == 0.0 && dephasing_rate == 0.0 && chi == 0.0 && qubit_freq_rms == 0.0;
}

BranchAmplitudes ld_branch_amplitudes(const GateConfig& cfg, const Envelope& env,
                                      double mode_freq_shift, double omega_scale,
                                      double t_final) {
  const double nu = cfg.delta - mode_freq_shift;
  const double t_f = (t_final < 0.0) ? env.total_duration(cfg.t_gate) : t_final;
  const auto c = branch_couplings(cfg, omega_scale);
  BranchAmplitudes out;
  if (env.rise_fall <= 0.0) {
    const cplx itg = phase_integral(nu, t_f);
    const double lobe = lobe_integral(nu, t_f);
    for (int br = 0; br < 4; ++br) {
      out.alpha[br] = -kI * c[br] * itg;
      out.phase[br] = -std::norm(c[br]) * lobe / nu;
    }
    return out;
  }
  // General envelope: integrate dI/dt = g e^{-i nu t},
  // dPhi/dt = -|c|^2 g Im[e^{i nu t} I] with RK4.
  const int n_steps = 4096;
  const double h = t_f / n_steps;
  cplx itg = 0.0;
  double lobe = 0.0;  // int g Im[e^{i nu t} I] dt
  auto g = [&](double t) { return env.value(t, cfg.t_gate); };
  for (int k = 0; k < n_steps; ++k) {
    const double t = k * h;
    auto deriv = [&](double tt, cplx i_cur) {
      const double gv = g(tt);
      cplx dI = gv * std::polar(1.0, -nu * tt);
      double dL = gv * std::imag(std::polar(1.0, nu * tt) * i_cur);
      return std::pair<cplx, double>(dI, dL);
    };
    auto [k1i, k1l] = deriv(t, itg);
    auto [k2i, k2l] = deriv(t + h / 2.0, itg + h / 2.0 * k1i);
    auto [k3i, k3l] = deriv(t + h / 2.0, itg + h / 2.0 * k2i);
    auto [k4i, k4l] = deriv(t + h, itg + h * k3i);
    itg += h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
    lobe += h / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l);
  }
  for (int br = 0; br < 4; ++br) {
    out.alpha[br] = -kI * c[br] * itg;
    out.phase[br] = -std::norm(c[br]) * lobe;
  }
  return out;
}

Eigen::Matrix4cd branch_basis(const GateConfig& cfg) {
  const double inv = 1.0 / std::sqrt(2.0);
  Mat2 v[2];
  for (int j = 0; j < 2; ++j) {
    const cplx e = std::polar(1.0, -cfg.spin_phase(j));
    v[j] << inv, inv, e * inv, -e * inv;
  }
  Eigen::Matrix4cd out;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) out(2 * a + b, 2 * c + d) = v[0](a, c) * v[1](b, d);
  return out;
}

Eigen::Matrix4cd ld_spin_rho_after_gate(const GateConfig& cfg, const Envelope& env,
                                        const Eigen::Matrix4cd& spin_rho_in, int n0,
                                        double mode_freq_shift, double omega_scale) {
  const BranchAmplitudes amp = ld_branch_amplitudes(cfg, env, mode_freq_shift, omega_scale);
  const Eigen::Matrix4cd v = branch_basis(cfg);
  Eigen::Matrix4cd rho = v.adjoint() * spin_rho_in * v;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      const cplx beta = amp.alpha[a] - amp.alpha[b];
      const double geom = amp.phase[a] - amp.phase[b] +
                          std::imag(amp.alpha[a] * std::conj(amp.alpha[b]));
      rho(a, b) *= std::polar(1.0, geom) * displacement_diagonal(n0, std::norm(beta));
    }
  }
  return v * rho * v.adjoint();
}

Mat ms_analytic_unitary(const GateConfig& cfg, double mode_freq_shift, double omega_scale) {
  if (cfg.rise_fall > 0.0)
    throw std::invalid_argument("ms_analytic_unitary: square envelope required");
  const int nf = cfg.n_max + 1;
  const BranchAmplitudes amp =
      ld_branch_amplitudes(cfg, Envelope{0.0}, mode_freq_shift, omega_scale);
  const Eigen::Matrix4cd v = branch_basis(cfg);
  // Displacement matrices per branch, with the lab-frame rotation from the
  // shifted mode frequency restored.
  Mat u = Mat::Zero(4 * nf, 4 * nf);
  for (int br = 0; br < 4; ++br) {
    Mat d(nf, nf);
    for (int m = 0; m < nf; ++m)
      for (int n = 0; n < nf; ++n) d(m, n) = displacement_matrix_element(m, n, amp.alpha[br]);
    d *= std::polar(1.0, amp.phase[br]);
    if (mode_freq_shift != 0.0) {
      const double tf = cfg.t_gate;
      for (int m = 0; m < nf; ++m) d.row(m) *= std::polar(1.0, -mode_freq_shift * m * tf);
    }
    u.block(br * nf, br * nf, nf, nf) = d;
  }
  // conjugate branch-block by the spin basis change
  Mat w = Mat::Zero(4 * nf, 4 * nf);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      w.block(a * nf, b * nf, nf, nf) = v(a, b) * Mat::Identity(nf, nf);
  return w * u * w.adjoint();
}

SpinMotionState ms_propagate_analytic(const GateConfig& cfg, const SpinMotionState& initial) {
  Mat u = ms_analytic_unitary(cfg);
  SpinMotionState out = initial;
  out.rho = u * initial.rho * u.adjoint();
  return out;
}

namespace {
// Branch-block generator at time t: H_br(t) = shift n_hat + g(t) (c B+ e^{-i delta t} + h.c.)
struct BranchGenerator {
  double delta;
  double shift;
  cplx c;
  const Mat* raising;  // nf x nf, includes eta scaling
  const Envelope* env;
  double t_gate;

  Mat hamiltonian(double t) const {
    const int nf = raising->rows();
    const double g = env->value(t, t_gate);
    Mat h = (g * c * std::polar(1.0, -delta * t)) * (*raising);
    h += h.adjoint().eval();
    for (int n = 0; n < nf; ++n) h(n, n) += shift * n;
    return h;
  }
};

Mat hermitian_expm(const Mat& h, double factor) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  const auto& vals = es.eigenvalues();
  const auto& vecs = es.eigenvectors();
  Vec phases(vals.size());
  for (int k = 0; k < vals.size(); ++k) phases(k) = std::polar(1.0, factor * vals(k));
  return vecs * phases.asDiagonal() * vecs.adjoint();
}

// One CF4 step over [t, t+h]: two exponentials of Gauss-node combinations.
Mat cf4_step(const BranchGenerator& gen, double t, double h) {
  const double a1 = (3.0 + 2.0 * std::sqrt(3.0)) / 12.0;
  const double a2 = (3.0 - 2.0 * std::sqrt(3.0)) / 12.0;
  const double t1 = t + (0.5 - std::sqrt(3.0) / 6.0) * h;
  const double t2 = t + (0.5 + std::sqrt(3.0) / 6.0) * h;
  Mat h1 = gen.hamiltonian(t1);
  Mat h2 = gen.hamiltonian(t2);
  Mat first = hermitian_expm(a1 * h1 + a2 * h2, -h);   // acts first
  Mat second = hermitian_expm(a2 * h1 + a1 * h2, -h);
  return second * first;
}

Mat cf4_propagate(const BranchGenerator& gen, double t0, double t1, int n_steps) {
  const int nf = gen.raising->rows();
  Mat u = Mat::Identity(nf, nf);
  const double h = (t1 - t0) / n_steps;
  for (int k = 0; k < n_steps; ++k) u = cf4_step(gen, t0 + k * h, h) * u;
  return u;
}

Mat fock_ladder(int nf, int direction) {
  Mat m = Mat::Zero(nf, nf);
  for (int n = 0; n + 1 < nf; ++n) {
    if (direction > 0)
      m(n + 1, n) = std::sqrt(n + 1.0);
    else
      m(n, n + 1) = std::sqrt(n + 1.0);
  }
  return m;
}
}  // namespace

SpinMotionState ms_propagate_numeric(const GateConfig& cfg, const SpinMotionState& initial,
                                     const Envelope& env, const PropagateOptions& opts) {
  const int nf = cfg.n_max + 1;
  // Sideband coupling operator: eta b^dag in the Lamb-Dicke limit, exact
  // Laguerre-weighted elements (calibrated on the n=0 -> 1 transition) beyond it.
  Mat raising = Mat::Zero(nf, nf);
  for (int n = 0; n + 1 < nf; ++n) {
    if (opts.beyond_lamb_dicke) {
      raising(n + 1, n) = std::abs(sideband_matrix_element(n + 1, n, cfg.eta_S)) /
                          std::abs(sideband_matrix_element(1, 0, cfg.eta_S)) * cfg.eta_S;
    } else {
      raising(n + 1, n) = cfg.eta_S * std::sqrt(n + 1.0);
    }
  }
  const cplx e1 = std::polar(1.0, cfg.motion_phase(0));
  const cplx e2 = std::polar(1.0, cfg.motion_phase(1));
  const double amp = 0.5 * cfg.omega * opts.omega_scale;
  const double t_f = env.total_duration(cfg.t_gate);

  auto build = [&](int n_steps) {
    std::array<Mat, 4> u;
    for (int br = 0; br < 4; ++br) {
      const double s1 = (br < 2) ? 1.0 : -1.0;
      const double s2 = (br % 2 == 0) ? 1.0 : -1.0;
      BranchGenerator gen{cfg.delta, opts.mode_freq_shift, amp * (s1 * e1 + s2 * e2),
                          &raising, &env, cfg.t_gate};
      if (opts.jump) {
        const double tj = std::clamp(opts.jump->first, 0.0, t_f);
        const int frac1 = std::max(1, static_cast<int>(n_steps * tj / t_f));
        Mat u1 = cf4_propagate(gen, 0.0, tj, frac1);
        Mat u2 = cf4_propagate(gen, tj, t_f, std::max(1, n_steps - frac1));
        u[br] = u2 * fock_ladder(nf, opts.jump->second) * u1;
      } else {
        u[br] = cf4_propagate(gen, 0.0, t_f, n_steps);
      }
    }
    return u;
  };

  int n_steps = opts.min_steps;
  std::array<Mat, 4> u = build(n_steps);
  while (n_steps < opts.max_steps) {
    std::array<Mat, 4> u2 = build(2 * n_steps);
    double diff = 0.0;
    for (int br = 0; br < 4; ++br) diff = std::max(diff, (u2[br] - u[br]).cwiseAbs().maxCoeff());
    u = u2;
    n_steps *= 2;
    if (diff < opts.tolerance) break;
  }
  if (n_steps >= opts.max_steps)
    throw std::runtime_error("ms_propagate_numeric: step control did not converge");

  const Eigen::Matrix4cd v = branch_basis(cfg);
  Mat w = Mat::Zero(4 * nf, 4 * nf);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      w.block(a * nf, b * nf, nf, nf) = v(a, b) * Mat::Identity(nf, nf);
  Mat ublock = Mat::Zero(4 * nf, 4 * nf);
  for (int br = 0; br < 4; ++br) ublock.block(br * nf, br * nf, nf, nf) = u[br];
  Mat full = w * ublock * w.adjoint();

  SpinMotionState out = initial;
  out.rho = full * initial.rho * full.adjoint();
  if (opts.jump) {
    const double tr = std::real(out.rho.trace());
    if (tr > 0.0) out.rho /= tr;
  }
  return out;
}

Eigen::Matrix4cd ms_effective_spin_unitary(const GateConfig& cfg) {
  Mat2 s[2];
  for (int j = 0; j < 2; ++j) {
    const cplx e = std::polar(1.0, cfg.spin_phase(j));
    s[j] << 0.0, e, std::conj(e), 0.0;
  }
  Eigen::Matrix4cd ss;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) ss(2 * a + b, 2 * c + d) = s[0](a, c) * s[1](b, d);
  // (S x S)^2 = I, so exp(-i pi/4 S x S) = cos(pi/4) I - i sin(pi/4) S x S.
  const double c4 = std::cos(kPi / 4.0);
  return std::polar(1.0, -kPi / 4.0) * (c4 * Eigen::Matrix4cd::Identity() - kI * c4 * ss);
}

Eigen::Matrix4cd phase_insensitive_gate(const GateConfig& cfg) {
  Mat2 u1 = pauli_rotation({kPi / 2.0, kPi / 2.0 - cfg.spin_phase(0)});
  Mat2 u2 = pauli_rotation({kPi / 2.0, kPi / 2.0 - cfg.spin_phase(1)});
  Eigen::Matrix4cd uu;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) uu(2 * a + b, 2 * c + d) = u1(a, c) * u2(b, d);
  return uu * ms_effective_spin_unitary(cfg) * uu.adjoint();
}

namespace {
Eigen::Matrix4cd depolarize_ion(const Eigen::Matrix4cd& rho, int ion) {
  // Replace the ion's state with I/2, keep the partner's reduced state.
  Eigen::Matrix4cd out = Eigen::Matrix4cd::Zero();
  if (ion == 0) {
    Mat2 red = Mat2::Zero();
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int k = 0; k < 2; ++k) red(a, b) += rho(2 * k + a, 2 * k + b);
    for (int k = 0; k < 2; ++k) out.block<2, 2>(2 * k, 2 * k) = 0.5 * red;
  } else {
    Mat2 red = Mat2::Zero();
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int k = 0; k < 2; ++k) red(a, b) += rho(2 * a + k, 2 * b + k);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        out(2 * a, 2 * b) += 0.5 * red(a, b);
        out(2 * a + 1, 2 * b + 1) += 0.5 * red(a, b);
      }
  }
  return out;
}

Eigen::Matrix4cd dephase_ion(const Eigen::Matrix4cd& rho, int ion, double q) {
  Eigen::Matrix4cd z = Eigen::Matrix4cd::Identity();
  for (int k = 0; k < 4; ++k) {
    const int bit = (ion == 0) ? (k >> 1) : (k & 1);
    if (bit == 1) z(k, k) = -1.0;
  }
  return (1.0 - q) * rho + q * z * rho * z;
}

double raman_event_prob(const NoiseModel& m) {
  // Per-ion event probability such that both ions together contribute
  // raman_rate of Bell-state error: each event costs 3/4 (in-manifold
  // depolarization) or 1 (leakage).
  const double cost = 0.75 * (1.0 - m.leakage_fraction) + m.leakage_fraction;
  return m.raman_rate / (2.0 * cost);
}
}  // namespace

std::pair<Eigen::Matrix4cd, double> apply_scattering_channel(const Eigen::Matrix4cd& rho,
                                                             const NoiseModel& model) {
  const double p = raman_event_prob(model);
  const double q = model.rayleigh_error / 2.0;
  if (p >= 0.1 || q >= 0.1)
    throw std::invalid_argument("apply_scattering_channel: per-gate probability too large");
  const double in_trace = std::real(rho.trace());
  Eigen::Matrix4cd out = rho;
  for (int ion = 0; ion < 2; ++ion) {
    out = dephase_ion(out, ion, q);
    out = (1.0 - p) * out + p * (1.0 - model.leakage_fraction) * depolarize_ion(out, ion);
  }
  const double leak = in_trace - std::real(out.trace());
  return {out, leak};
}

std::vector<Mat> scattering_kraus_qutrit(const NoiseModel& model) {
  const double p = raman_event_prob(model);
  const double q = model.rayleigh_error / 2.0;
  const double lf = model.leakage_fraction;
  // per-ion qutrit ops, basis |up>, |down>, |leak>
  Mat pq = Mat::Zero(3, 3);
  pq(0, 0) = pq(1, 1) = 1.0;
  Mat pl = Mat::Zero(3, 3);
  pl(2, 2) = 1.0;
  Mat z = pq;
  z(1, 1) = -1.0;
  std::vector<Mat> deph = {std::sqrt(1.0 - q) * pq + pl, std::sqrt(q) * z};
  std::vector<Mat> raman = {std::sqrt(1.0 - p) * pq + pl};
  // depolarizing events: (1/2) {I, X, Y, Z} on the qubit subspace
  Mat x = Mat::Zero(3, 3);
  x(0, 1) = x(1, 0) = 1.0;
  Mat y = Mat::Zero(3, 3);
  y(0, 1) = cplx(0, -1);
  y(1, 0) = cplx(0, 1);
  for (const Mat& pauli : {pq, x, y, z})
    raman.push_back(0.5 * std::sqrt(p * (1.0 - lf)) * pauli);
  for (int s = 0; s < 2; ++s) {
    Mat k = Mat::Zero(3, 3);
    k(2, s) = std::sqrt(p * lf);
    raman.push_back(k);
  }
  std::vector<Mat> per_ion;
  for (const Mat& a : raman)
    for (const Mat& b : deph) per_ion.push_back(a * b);
  std::vector<Mat> out;
  for (const Mat& a : per_ion)
    for (const Mat& b : per_ion) {
      Mat k(9, 9);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) k.block(3 * i, 3 * j, 3, 3) = a(i, j) * b;
      out.push_back(k);
    }
  return out;
}

namespace {
QuasiStaticDraw quasistatic_from_rng(const NoiseModel& model, Rng& rng) {
  QuasiStaticDraw d;
  d.mode_freq_shift = rng.normal(0.0, model.mode_freq_rms);
  const int nx = rng.thermal_n(model.nbar_x);
  const int ny = rng.thermal_n(model.nbar_y);
  d.mode_freq_shift += model.chi * (nx + ny + 1.0);
  d.rabi_fraction = rng.normal(0.0, model.rabi_frac_rms);
  const int nc = rng.thermal_n(model.nbar_C);
  const double eta2 = model.effective_eta_C() * model.effective_eta_C();
  d.rabi_fraction -= eta2 * (nc - model.nbar_C);
  return d;
}
}  // namespace

QuasiStaticDraw sample_quasistatic_noise(const NoiseModel& model, std::uint64_t seed) {
  Rng rng(seed);
  return quasistatic_from_rng(model, rng);
}

double rabi_fluctuation_error(double delta_omega_frac) {
  if (std::abs(delta_omega_frac) >= 0.1)
    throw std::invalid_argument("rabi_fluctuation_error: |dOmega/Omega| must be < 0.1");
  return 2.5 * delta_omega_frac * delta_omega_frac;
}

double lamb_dicke_correction_error(double eta, double nbar) {
  if (eta >= 0.5) throw std::invalid_argument("lamb_dicke_correction_error: eta must be < 0.5");
  return kPi * kPi / 4.0 * std::pow(eta, 4) * nbar * (nbar + 1.0);
}

std::vector<Spectator> default_spectators(const GateConfig& cfg, const ModeGeometry& geom) {
  const double omega_str = std::sqrt(3.0) * geom.omega_z;
  const double tone = omega_str + cfg.delta;  // tone offset from the carrier
  const double carrier_suppression =
      std::abs(micromotion_factor(0, geom.mod_index) / micromotion_factor(2, geom.mod_index));
  std::vector<Spectator> out;
  out.push_back({"carrier_blue", tone, cfg.omega * carrier_suppression});
  out.push_back({"carrier_red", -tone, cfg.omega * carrier_suppression});
  out.push_back({"com_bsb", tone - geom.omega_z, geom.eta_C * cfg.omega});
  out.push_back({"com_rsb", -(tone - geom.omega_z), geom.eta_C * cfg.omega});
  return out;
}

double offresonant_error_estimate(const Envelope& env, double t_gate,
                                  const std::vector<Spectator>& spectators) {
  const double t_f = env.total_duration(t_gate);
  KahanSum total;
  for (const Spectator& sp : spectators) {
    if (sp.coupling == 0.0) continue;
    // two-level Schrodinger integration in the rotating frame of the spectator
    const double adet = std::abs(sp.detuning);
    const int n_steps =
        std::max(4096, static_cast<int>(64.0 * adet * t_f / (2.0 * kPi)));
    const double h = t_f / n_steps;
    cplx c0(1.0, 0.0), c1(0.0, 0.0);
    auto deriv = [&](double t, cplx a0, cplx a1) {
      const double f = 0.5 * sp.coupling * env.value(t, t_gate);
      cplx d0 = -kI * f * std::polar(1.0, sp.detuning * t) * a1;
      cplx d1 = -kI * f * std::polar(1.0, -sp.detuning * t) * a0;
      return std::pair<cplx, cplx>(d0, d1);
    };
    for (int k = 0; k < n_steps; ++k) {
      const double t = k * h;
      auto [k10, k11] = deriv(t, c0, c1);
      auto [k20, k21] = deriv(t + h / 2, c0 + h / 2.0 * k10, c1 + h / 2.0 * k11);
      auto [k30, k31] = deriv(t + h / 2, c0 + h / 2.0 * k20, c1 + h / 2.0 * k21);
      auto [k40, k41] = deriv(t + h, c0 + h * k30, c1 + h * k31);
      c0 += h / 6.0 * (k10 + 2.0 * k20 + 2.0 * k30 + k40);
      c1 += h / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41);
    }
    total.add(std::norm(c1));
  }
  return total.sum;
}

double heating_error_estimate(const GateConfig& cfg, const NoiseModel& model) {
  if (model.heating_rate_S <= 0.0) return 0.0;
  const double tf = cfg.t_gate;
  const int nf = cfg.n_max + 1;
  const Eigen::Matrix4cd v = branch_basis(cfg);
  const Eigen::Vector4cd target = cfg.bell_target();
  Eigen::Vector4cd z = v.adjoint() * Eigen::Vector4cd::Unit(0);  // |uu> in branch basis
  const Envelope env{0.0};
  const BranchAmplitudes end = ld_branch_amplitudes(cfg, env);
  Mat bdag = fock_ladder(nf, +1);

  const int n_grid = 17;
  KahanSum acc;
  for (int k = 0; k < n_grid; ++k) {
    const double tj = (k + 0.5) * tf / n_grid;
    const BranchAmplitudes mid = ld_branch_amplitudes(cfg, env, 0.0, 1.0, tj);
    std::array<Vec, 4> vecs;
    for (int br = 0; br < 4; ++br) {
      Mat d1(nf, nf), d2(nf, nf);
      const cplx a1 = mid.alpha[br];
      const cplx a2 = end.alpha[br] - mid.alpha[br];
      for (int m = 0; m < nf; ++m)
        for (int n = 0; n < nf; ++n) {
          d1(m, n) = displacement_matrix_element(m, n, a1);
          d2(m, n) = displacement_matrix_element(m, n, a2);
        }
      const double ph = end.phase[br] -
                        std::imag(end.alpha[br] * std::conj(mid.alpha[br]));
      vecs[br] = std::polar(1.0, ph) * (d2 * (bdag * (d1 * Vec::Unit(nf, 0))));
    }
    Eigen::Matrix4cd rho_br;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        rho_br(a, b) = z(a) * std::conj(z(b)) * vecs[b].dot(vecs[a]);
    Eigen::Matrix4cd rho = v * rho_br * v.adjoint();
    const double tr = std::real(rho.trace());
    if (tr <= 0.0) continue;
    rho /= tr;
    const double fid = std::real((target.adjoint() * rho * target)(0, 0));
    acc.add(1.0 - fid);
  }
  const double mean_jump_error = acc.sum / n_grid;
  return model.heating_rate_S * tf * mean_jump_error;
}

GateOutcome gate_error_monte_carlo(const GateConfig& cfg, const NoiseModel& model,
                                   int shots, std::uint64_t seed) {
  if (shots < 1) throw std::invalid_argument("gate_error_monte_carlo: shots must be >= 1");
  const Envelope env = cfg.envelope();
  const double t_tot = env.total_duration(cfg.t_gate);
  const Eigen::Vector4cd target = cfg.bell_target();
  Eigen::Matrix4cd rho_uu = Eigen::Matrix4cd::Zero();
  rho_uu(0, 0) = 1.0;

  const double chi_mean = model.chi * (model.nbar_x + model.nbar_y + 1.0);
  const double heat_row = heating_error_estimate(cfg, model);
  const double ld_row = lamb_dicke_correction_error(cfg.eta_S, model.nbar_S);

  Eigen::Matrix4cd rho_mean = Eigen::Matrix4cd::Zero();
  KahanSum f_sum, f_sq, freq_sum, rabi_sum, laser_sum, qubit_sum;
  for (int shot = 0; shot < shots; ++shot) {
    Rng rng(seed, static_cast<std::uint64_t>(shot));
    const QuasiStaticDraw draw = quasistatic_from_rng(model, rng);
    const double shift = 2.0 * kPi * (draw.mode_freq_shift - chi_mean);
    const double scale = 1.0 + draw.rabi_fraction;
    const double phi_l =
        (model.dephasing_rate > 0.0) ? rng.normal(0.0, std::sqrt(model.dephasing_rate * t_tot))
                                     : 0.0;
    const double theta_q = 2.0 * kPi * rng.normal(0.0, model.qubit_freq_rms) * t_tot;
    const int n0 = rng.thermal_n(model.nbar_S);

    GateConfig cs = cfg;
    for (int j = 0; j < 2; ++j) {
      cs.phi_b[j] += phi_l;
      cs.phi_r[j] += phi_l;
    }
    Eigen::Matrix4cd rho = ld_spin_rho_after_gate(cs, env, rho_uu, n0, shift, scale);
    if (theta_q != 0.0) {
      Eigen::Vector4cd zph;
      zph << std::polar(1.0, -theta_q), 1.0, 1.0, std::polar(1.0, theta_q);
      rho = zph.asDiagonal() * rho * zph.conjugate().asDiagonal();
    }
    rho_mean += rho;
    const double f = std::real((target.adjoint() * rho * target)(0, 0));
    f_sum.add(f);
    f_sq.add(f * f);

    // per-channel rows with the same draws, one noise source at a time
    Eigen::Matrix4cd rf = ld_spin_rho_after_gate(cfg, env, rho_uu, n0, shift, 1.0);
    freq_sum.add(1.0 - std::real((target.adjoint() * rf * target)(0, 0)));
    Eigen::Matrix4cd rr = ld_spin_rho_after_gate(cfg, env, rho_uu, n0, 0.0, scale);
    rabi_sum.add(1.0 - std::real((target.adjoint() * rr * target)(0, 0)));
    laser_sum.add(std::pow(std::sin(phi_l), 2));
    qubit_sum.add(std::pow(std::sin(theta_q), 2));
  }
  rho_mean /= shots;

  auto [rho_scat, leak] = apply_scattering_channel(rho_mean, model);
  GateOutcome out;
  out.rho_final = rho_scat;
  out.leakage_pop = leak;
  const double f_scat = std::real((target.adjoint() * rho_scat * target)(0, 0));
  out.bell_fidelity = f_scat - heat_row - ld_row;
  out.apparent_fidelity = out.bell_fidelity + leak / 4.0;
  const double fm = f_sum.sum / shots;
  const double var = std::max(0.0, f_sq.sum / shots - fm * fm);
  out.bell_std_err = std::sqrt(var / shots);
  out.error_breakdown = {
      {"raman", model.raman_rate},
      {"rayleigh", model.rayleigh_error},
      {"mode_freq", freq_sum.sum / shots},
      {"rabi", rabi_sum.sum / shots},
      {"laser_coherence", laser_sum.sum / shots},
      {"qubit_coherence", qubit_sum.sum / shots},
      {"heating", heat_row},
      {"lamb_dicke", ld_row},
  };
  return out;
}

NoiseModel table_one_noise_model() {
  NoiseModel m;
  m.raman_rate = 4.0e-4;
  m.rayleigh_error = 1.7e-4;
  m.mode_freq_rms = 50.0;  // electrode/charging jitter; rocking-mode chi term adds the rest
  m.chi = 45.0;
  m.nbar_x = 1.25;
  m.nbar_y = 1.25;
  m.rabi_frac_rms = 1e-3;  // laser intensity; Debye-Waller dominates via nbar_C
  m.nbar_C = 0.01;
  m.nbar_S = 0.006;
  m.heating_rate_S = 5.4;
  m.heating_rate_C = 0.0;
  m.dephasing_rate = 0.667;
  m.qubit_freq_rms = 15.0;
  m.leakage_fraction = 1.0 / 3.0;
  return m;
}

std::vector<DetuningScenario> calibrated_detuning_scenarios(
    const std::vector<double>& detunings_ghz, double anchor_ghz, double raman_at_anchor,
    double rayleigh) {
  std::vector<DetuningScenario> out;
  for (double d : detunings_ghz) {
    DetuningScenario s;
    s.detuning_ghz = d;
    s.raman_rate = raman_at_anchor * (anchor_ghz / d) * (anchor_ghz / d);
    s.rayleigh_error = rayleigh;
    out.push_back(s);
  }
  return out;
}

std::vector<SweepPoint> sweep_detuning(const std::vector<DetuningScenario>& scenarios,
                                       const GateConfig& cfg, const NoiseModel& base,
                                       int shots, std::uint64_t seed) {
  std::vector<SweepPoint> out;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    NoiseModel m = base;
    m.raman_rate = scenarios[i].raman_rate;
    m.rayleigh_error = scenarios[i].rayleigh_error;
    GateOutcome g = gate_error_monte_carlo(cfg, m, shots, derive_seed(seed, i));
    SweepPoint p;
    p.x = scenarios[i].detuning_ghz;
    p.total_error = 1.0 - g.bell_fidelity;
    p.std_err = g.bell_std_err;
    p.decomposition = g.error_breakdown;
    out.push_back(p);
  }
  return out;
}

std::vector<SweepPoint> sweep_duration(const std::vector<double>& t_list,
                                       const NoiseModel& model, int shots, std::uint64_t seed,
                                       double eta_S, double rise_fall) {
  std::vector<SweepPoint> out;
  for (std::size_t i = 0; i < t_list.size(); ++i) {
    GateConfig cfg = GateConfig::closed_gate(t_list[i], 1, eta_S, rise_fall);
    GateOutcome g = gate_error_monte_carlo(cfg, model, shots, derive_seed(seed, i));
    SweepPoint p;
    p.x = t_list[i];
    p.total_error = 1.0 - g.bell_fidelity;
    p.std_err = g.bell_std_err;
    p.decomposition = g.error_breakdown;
    out.push_back(p);
  }
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("loglog_slope: need two or more points");
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace iongate
