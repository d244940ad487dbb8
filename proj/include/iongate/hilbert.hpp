#ifndef IONGATE_HILBERT_HPP
#define IONGATE_HILBERT_HPP

#include <Eigen/Dense>
#include <complex>
#include <utility>

namespace iongate {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;

// Pauli matrices in the {|up>, |down>} basis; |up> = (1,0).
Mat2 sigma_x();
Mat2 sigma_y();
Mat2 sigma_z();
Mat2 sigma_plus();   // |up><down|

// A (theta, phi) pulse: rotation by theta about the axis (cos phi, sin phi, 0).
struct PulseSpec {
  double theta = 0.0;
  double phi = 0.0;
};

// Two-ion axial mode geometry and micromotion parameters.
struct ModeGeometry {
  double omega_z = 2.0 * kPi * 3.58e6;   // axial frequency, rad/s
  double eta_single = 0.25;              // single-ion Lamb-Dicke parameter
  double eta_S = 0.19;                   // stretch mode
  double eta_C = 0.25;                   // COM mode (single-ion normalization)
  double mod_index = 2.9;                // micromotion modulation index
};

// Density matrix on (qubit x qubit) x Fock(n_max) for one motional mode.
struct SpinMotionState {
  int n_max = 20;
  Mat rho;  // dimension 4*(n_max+1)

  int dim() const { return 4 * (n_max + 1); }

  static SpinMotionState pure(int n_max, const Vec& psi);
  // |spin> x thermal(nbar), spin given as a 4-vector.
  static SpinMotionState spin_thermal(int n_max, const Eigen::Vector4cd& spin, double nbar);

  Eigen::Matrix4cd spin_rho() const;       // motion traced out
  Mat motion_rho() const;                  // spin traced out
  double hermiticity_defect() const;       // max |rho - rho^dag|
  double trace_defect() const;             // |Tr rho - 1|
  double min_eigenvalue() const;
  double trailing_population(int tail = 2) const;  // population in the top `tail` Fock levels
};

// exp(-i theta/2 (cos phi sx + sin phi sy))
Mat2 pauli_rotation(const PulseSpec& p);

// (theta, phi) pulse with fractional amplitude error and a detuning term in the
// generator; detuning is given in rad/s, the nominal Rabi rate sets the duration.
Mat2 pulse_with_errors(double theta, double phi, double amplitude_error,
                       double detuning_error, double rabi);

// Five-pulse composite pi transfer, amplitude-robust phase pattern
// (0, 2pi/3, pi/3, 2pi/3, 0).
Mat2 composite_pi_transfer(double amplitude_error, double detuning_error, double rabi);

// (pi/2,0), (pi,0), (pi/2, phase3) with an optional static phase error inserted
// between pulses. phase3 = pi/2 gives the r3 reference variant, 3pi/2 gives r4.
Mat2 spin_echo_variant(double phase3, double inter_pulse_phase = 0.0);

// r3 and r4 reference-preparation unitaries.
std::pair<Mat2, Mat2> spin_echo_sequence();

// Exact <n| exp(i eta (b + b^dag)) |m> via associated Laguerre polynomials.
cplx sideband_matrix_element(int n, int m, double eta);

// Full (n_max+1)-dimensional matrix of exp(i eta (b + b^dag)).
Mat sideband_operator(int n_max, double eta);

// Coherent displacement matrix element <m|D(alpha)|n> on the truncated space.
cplx displacement_matrix_element(int m, int n, cplx alpha);

// <n|D(alpha)|n> = e^{-|a|^2/2} L_n(|a|^2)
double displacement_diagonal(int n, double abs2_alpha);

// Bessel J_order(mod_index); micromotion sideband Rabi-rate factor.
double micromotion_factor(int order, double mod_index);

// max |U^dag U - I|
double unitarity_defect(const Mat& u);

// Hilbert-Schmidt distance up to global phase, normalized per element.
double distance_up_to_phase(const Mat& a, const Mat& b);

}  // namespace iongate

#endif
