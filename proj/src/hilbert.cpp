#include "iongate/hilbert.hpp"

#include <cmath>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

namespace iongate {

Mat2 sigma_x() {
  Mat2 m;
  m << 0, 1, 1, 0;
  return m;
}
Mat2 sigma_y() {
  Mat2 m;
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}
Mat2 sigma_z() {
  Mat2 m;
  m << 1, 0, 0, -1;
  return m;
}
Mat2 sigma_plus() {
  Mat2 m;
  m << 0, 1, 0, 0;
  return m;
}

SpinMotionState SpinMotionState::pure(int n_max, const Vec& psi) {
  SpinMotionState s;
  s.n_max = n_max;
  s.rho = psi * psi.adjoint();
  return s;
}

SpinMotionState SpinMotionState::spin_thermal(int n_max, const Eigen::Vector4cd& spin,
                                              double nbar) {
  const int nf = n_max + 1;
  Eigen::VectorXd pn(nf);
  if (nbar <= 0.0) {
    pn.setZero();
    pn(0) = 1.0;
  } else {
    const double r = nbar / (1.0 + nbar);
    double w = 1.0 / (1.0 + nbar);
    double tot = 0.0;
    for (int n = 0; n < nf; ++n) {
      pn(n) = w;
      tot += w;
      w *= r;
    }
    pn /= tot;
  }
  Mat motion = Mat::Zero(nf, nf);
  for (int n = 0; n < nf; ++n) motion(n, n) = pn(n);
  SpinMotionState s;
  s.n_max = n_max;
  Mat4 sp = spin * spin.adjoint();
  s.rho = Mat::Zero(4 * nf, 4 * nf);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      s.rho.block(a * nf, b * nf, nf, nf) = sp(a, b) * motion;
  return s;
}

Eigen::Matrix4cd SpinMotionState::spin_rho() const {
  const int nf = n_max + 1;
  Mat4 out = Mat4::Zero();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      out(a, b) = rho.block(a * nf, b * nf, nf, nf).trace();
  return out;
}

Mat SpinMotionState::motion_rho() const {
  const int nf = n_max + 1;
  Mat out = Mat::Zero(nf, nf);
  for (int a = 0; a < 4; ++a) out += rho.block(a * nf, a * nf, nf, nf);
  return out;
}

double SpinMotionState::hermiticity_defect() const {
  return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

double SpinMotionState::trace_defect() const { return std::abs(rho.trace() - cplx(1.0, 0.0)); }

double SpinMotionState::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Mat> es((rho + rho.adjoint()) / 2.0);
  return es.eigenvalues().minCoeff();
}

double SpinMotionState::trailing_population(int tail) const {
  const int nf = n_max + 1;
  double p = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int n = nf - tail; n < nf; ++n)
      if (n >= 0) p += std::real(rho(a * nf + n, a * nf + n));
  return p;
}

Mat2 pauli_rotation(const PulseSpec& p) {
  // exp(-i t/2 (n.sigma)) = cos(t/2) I - i sin(t/2) (n.sigma)
  const double c = std::cos(p.theta / 2.0), s = std::sin(p.theta / 2.0);
  Mat2 u;
  u << c, cplx(0, -s) * std::polar(1.0, -p.phi),
       cplx(0, -s) * std::polar(1.0, p.phi), c;
  return u;
}

Mat2 pulse_with_errors(double theta, double phi, double amplitude_error,
                       double detuning_error, double rabi) {
  if (rabi <= 0.0) throw std::invalid_argument("pulse_with_errors: rabi must be > 0");
  const double tau = theta / rabi;
  Mat2 gen = 0.5 * theta * (1.0 + amplitude_error) *
                 (std::cos(phi) * sigma_x() + std::sin(phi) * sigma_y()) +
             0.5 * detuning_error * tau * sigma_z();
  return (cplx(0, -1) * gen).exp();
}

Mat2 composite_pi_transfer(double amplitude_error, double detuning_error, double rabi) {
  // Amplitude-robust composite pi: phases 0, 2pi/3, pi/3, 2pi/3, 0.
  static const double phases[5] = {0.0, 2.0 * kPi / 3.0, kPi / 3.0, 2.0 * kPi / 3.0, 0.0};
  Mat2 u = Mat2::Identity();
  for (double ph : phases)
    u = pulse_with_errors(kPi, ph, amplitude_error, detuning_error, rabi) * u;
  return u;
}

Mat2 spin_echo_variant(double phase3, double inter_pulse_phase) {
  Mat2 dz = Mat2::Identity();
  if (inter_pulse_phase != 0.0) {
    dz(0, 0) = std::polar(1.0, -inter_pulse_phase / 2.0);
    dz(1, 1) = std::polar(1.0, inter_pulse_phase / 2.0);
  }
  return pauli_rotation({kPi / 2.0, phase3}) * dz * pauli_rotation({kPi, 0.0}) * dz *
         pauli_rotation({kPi / 2.0, 0.0});
}

std::pair<Mat2, Mat2> spin_echo_sequence() {
  return {spin_echo_variant(kPi / 2.0), spin_echo_variant(3.0 * kPi / 2.0)};
}

namespace {
// log(n!)
double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

// Associated Laguerre L_n^a(x), a >= 0 integer, via the stable three-term recurrence.
double assoc_laguerre(int n, int a, double x) {
  if (n == 0) return 1.0;
  double lm1 = 1.0;
  double l = 1.0 + a - x;
  for (int k = 2; k <= n; ++k) {
    double lk = ((2.0 * k - 1.0 + a - x) * l - (k - 1.0 + a) * lm1) / k;
    lm1 = l;
    l = lk;
  }
  return l;
}
}  // namespace

cplx sideband_matrix_element(int n, int m, double eta) {
  if (n < 0 || m < 0) throw std::out_of_range("sideband_matrix_element: negative index");
  // <n| e^{i eta (b + b^dag)} |m>, n >= m:
  //   e^{-eta^2/2} (i eta)^{n-m} sqrt(m!/n!) L_m^{n-m}(eta^2)
  const int lo = std::min(n, m), hi = std::max(n, m), d = hi - lo;
  const double x = eta * eta;
  double mag = std::exp(-x / 2.0 + 0.5 * (log_factorial(lo) - log_factorial(hi))) *
               std::pow(eta, d) * assoc_laguerre(lo, d, x);
  // (i)^d phase; symmetric in n<->m for this operator.
  cplx ipow(1.0, 0.0);
  switch (d % 4) {
    case 0: ipow = {1, 0}; break;
    case 1: ipow = {0, 1}; break;
    case 2: ipow = {-1, 0}; break;
    case 3: ipow = {0, -1}; break;
  }
  return ipow * mag;
}

Mat sideband_operator(int n_max, double eta) {
  const int nf = n_max + 1;
  Mat m(nf, nf);
  for (int i = 0; i < nf; ++i)
    for (int j = 0; j < nf; ++j) m(i, j) = sideband_matrix_element(i, j, eta);
  return m;
}

cplx displacement_matrix_element(int m, int n, cplx alpha) {
  // <m|D(a)|n>, m >= n: sqrt(n!/m!) a^{m-n} e^{-|a|^2/2} L_n^{m-n}(|a|^2)
  const double x = std::norm(alpha);
  if (m >= n) {
    double mag = std::exp(-x / 2.0 + 0.5 * (log_factorial(n) - log_factorial(m)));
    cplx ap = std::pow(alpha, m - n);
    return mag * ap * assoc_laguerre(n, m - n, x);
  }
  // <m|D(a)|n> = <n|D(-a)|m>^* ... use D(a)^dag = D(-a):
  return std::conj(displacement_matrix_element(n, m, -alpha));
}

double displacement_diagonal(int n, double abs2_alpha) {
  return std::exp(-abs2_alpha / 2.0) * assoc_laguerre(n, 0, abs2_alpha);
}

double micromotion_factor(int order, double mod_index) {
  if (order < 0) throw std::invalid_argument("micromotion_factor: order must be >= 0");
  return std::cyl_bessel_j(static_cast<double>(order), mod_index);
}

double unitarity_defect(const Mat& u) {
  Mat d = u.adjoint() * u - Mat::Identity(u.rows(), u.cols());
  return d.cwiseAbs().maxCoeff();
}

double distance_up_to_phase(const Mat& a, const Mat& b) {
  cplx ph = (b.adjoint() * a).trace();
  if (std::abs(ph) < 1e-300) return (a - b).cwiseAbs().maxCoeff();
  ph /= std::abs(ph);
  return (a - ph * b).cwiseAbs().maxCoeff();
}

}  // namespace iongate
