#ifndef IONGATE_MS_GATE_HPP
#define IONGATE_MS_GATE_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iongate/hilbert.hpp"

namespace iongate {

// Pulse envelope: a square gate window convolved with a cosine smoothing
// kernel of width rise_fall. This keeps the spectral nulls of the square
// window (phase-space closure is preserved exactly) while suppressing the
// spectral tails at spectator transitions.
struct Envelope {
  double rise_fall = 0.0;  // ramp duration, s (0 = square)

  // amplitude at time t for a gate whose flat-top closure window is t_gate;
  // the full pulse occupies [0, t_gate + rise_fall].
  double value(double t, double t_gate) const;
  double total_duration(double t_gate) const { return t_gate + rise_fall; }
};

// One Molmer-Sorensen gate scenario (square of the drive geometry).
struct GateConfig {
  double delta = 0.0;     // sideband detuning, rad/s
  double omega = 0.0;     // carrier Rabi rate, rad/s
  double eta_S = 0.19;    // stretch-mode Lamb-Dicke parameter
  double t_gate = 0.0;    // closure window, s
  double rise_fall = 0.0; // envelope ramp, s
  std::array<double, 2> phi_b{0.0, 0.0};  // blue-sideband phases per ion
  std::array<double, 2> phi_r{0.0, 0.0};  // red-sideband phases per ion
  int loops = 1;
  int n_max = 20;

  double spin_phase(int ion) const { return 0.5 * (phi_b[ion] + phi_r[ion]); }
  double motion_phase(int ion) const { return 0.5 * (phi_b[ion] - phi_r[ion]); }

  double closure_defect() const;             // relative |t_gate - 2 pi loops / delta|
  double max_entanglement_defect() const;    // relative |eta_S omega - delta/2|

  // Closed, maximally entangling gate of duration t (eta_S omega = delta/2).
  static GateConfig closed_gate(double t, int loops = 1, double eta_S = 0.19,
                                double rise_fall = 0.0);

  Envelope envelope() const { return Envelope{rise_fall}; }

  // Ideal Bell target produced from |up,up>: (|uu> + e^{-i(sum psi_j + pi/2)}|dd>)/sqrt2.
  Eigen::Vector4cd bell_target() const;
};

// All noise parameters of one gate scenario. Scattering entries are per-gate
// error contributions (Table-style calibrated inputs); the channel strengths
// are derived from them.
struct NoiseModel {
  double raman_rate = 0.0;        // total Raman scattering error per gate
  double rayleigh_error = 0.0;    // total Rayleigh (recoil dephasing) error per gate
  double mode_freq_rms = 0.0;     // electrode/charging stretch-frequency jitter, Hz rms
  double rabi_frac_rms = 0.0;     // fractional Rabi-rate jitter (laser power)
  double nbar_C = 0.0;            // initial COM thermal occupation
  double nbar_S = 0.0;            // initial stretch thermal occupation
  double heating_rate_S = 0.0;    // quanta/s
  double heating_rate_C = 0.0;    // quanta/s
  double dephasing_rate = 0.0;    // laser path phase diffusion, rad^2/s
  double leakage_fraction = 1.0 / 3.0;  // Raman scatters leaving the qubit manifold

  // quasi-static stretch-frequency shift from rocking-mode excitation
  double chi = 0.0;               // nonlinear coupling, Hz
  double nbar_x = 0.0;
  double nbar_y = 0.0;
  double eta_C = 0.25;            // Debye-Waller Lamb-Dicke parameter for the COM mode
  bool com_normalized_eta = false;  // use eta_C / sqrt(2) instead
  double qubit_freq_rms = 0.0;    // Hz rms (coherence-time limited)

  double effective_eta_C() const {
    return com_normalized_eta ? eta_C / std::sqrt(2.0) : eta_C;
  }
  bool all_zero() const;
};

struct GateOutcome {
  Eigen::Matrix4cd rho_final = Eigen::Matrix4cd::Zero();  // qubit block; trace = 1 - leakage
  double bell_fidelity = 0.0;       // true fidelity, leakage counted as error
  double apparent_fidelity = 0.0;   // leakage detected as dark (renormalized block)
  double bell_std_err = 0.0;
  double leakage_pop = 0.0;
  std::vector<std::pair<std::string, double>> error_breakdown;
};

// ---------------------------------------------------------------------------
// Propagators

struct PropagateOptions {
  double tolerance = 1e-9;     // step-doubling target on the final state
  bool beyond_lamb_dicke = false;
  double mode_freq_shift = 0.0;  // rad/s, added as shift * b^dag b
  double omega_scale = 1.0;
  // optional heating jump: (time, +1 for b^dag / -1 for b)
  std::optional<std::pair<double, int>> jump;
  int min_steps = 16;
  int max_steps = 1 << 15;
};

// Time-ordered commutator-free 4th-order integration of the MS interaction,
// with step doubling until the final state moves by < tolerance.
SpinMotionState ms_propagate_numeric(const GateConfig& cfg, const SpinMotionState& initial,
                                     const Envelope& env, const PropagateOptions& opts = {});

// Closed-form spin-dependent-displacement propagator (square envelope,
// Lamb-Dicke Hamiltonian).
SpinMotionState ms_propagate_analytic(const GateConfig& cfg, const SpinMotionState& initial);

// Full-space unitary of the closed-form propagator.
Mat ms_analytic_unitary(const GateConfig& cfg, double mode_freq_shift = 0.0,
                        double omega_scale = 1.0);

// Per-branch displacement/phase of the Lamb-Dicke interaction (exact for any
// envelope; quadrature under the hood). Branch order: (+,+), (+,-), (-,+), (-,-)
// in the joint eigenbasis of the per-ion spin operators at the config phases.
struct BranchAmplitudes {
  std::array<cplx, 4> alpha;
  std::array<double, 4> phase;
};
BranchAmplitudes ld_branch_amplitudes(const GateConfig& cfg, const Envelope& env,
                                      double mode_freq_shift = 0.0, double omega_scale = 1.0,
                                      double t_final = -1.0);

// Final two-qubit density matrix for initial spin rho (x) Fock |n0>, motion
// traced out. Exact for the Lamb-Dicke Hamiltonian with any envelope.
Eigen::Matrix4cd ld_spin_rho_after_gate(const GateConfig& cfg, const Envelope& env,
                                        const Eigen::Matrix4cd& spin_rho_in, int n0,
                                        double mode_freq_shift = 0.0,
                                        double omega_scale = 1.0);

// Spin-basis change between the z product basis and the joint eigenbasis of
// the config's per-ion spin operators (columns = branch states).
Eigen::Matrix4cd branch_basis(const GateConfig& cfg);

// Effective two-qubit unitary of the closed ideal gate (motion disentangles).
Eigen::Matrix4cd ms_effective_spin_unitary(const GateConfig& cfg);

// |uu> -> |uu>, |ud> -> i|ud>, |du> -> i|du>, |dd> -> |dd> up to global phase,
// insensitive to common shifts of the beam phases.
Eigen::Matrix4cd phase_insensitive_gate(const GateConfig& cfg);

// ---------------------------------------------------------------------------
// Noise channels

// Raman + Rayleigh scattering on the two-qubit state. Returns the qubit block
// (trace reduced by leakage) and the leaked population.
std::pair<Eigen::Matrix4cd, double> apply_scattering_channel(const Eigen::Matrix4cd& rho,
                                                             const NoiseModel& model);

// Kraus operators of the same channel on the two-ion three-level space
// (|up>, |down>, |leak|) per ion; for CPTP checks.
std::vector<Mat> scattering_kraus_qutrit(const NoiseModel& model);

// Per-shot quasi-static draw.
struct QuasiStaticDraw {
  double mode_freq_shift = 0.0;  // rad/s (includes chi (nx+ny+1) term, uncentered)
  double rabi_fraction = 0.0;    // delta Omega / Omega
};
QuasiStaticDraw sample_quasistatic_noise(const NoiseModel& model, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Monte-Carlo error budget

struct MonteCarloOptions {
  int shots = 1000;
  std::uint64_t seed = 1;
};

GateOutcome gate_error_monte_carlo(const GateConfig& cfg, const NoiseModel& model,
                                   int shots, std::uint64_t seed);

// Calibrated noise model for the reference operating point (900 GHz-scale
// Raman detuning, 30 us gate).
NoiseModel table_one_noise_model();

// Semi-analytic heating error: heating_rate * t averaged over jump times.
double heating_error_estimate(const GateConfig& cfg, const NoiseModel& model);

// ---------------------------------------------------------------------------
// Closed-form error estimates

double rabi_fluctuation_error(double delta_omega_frac);
double lamb_dicke_correction_error(double eta, double nbar);

struct Spectator {
  std::string label;
  double detuning = 0.0;    // rad/s
  double coupling = 0.0;    // Rabi rate, rad/s
};

// Default spectator set for a maximally entangling gate: carrier and COM
// sideband couplings of both bichromatic tones.
std::vector<Spectator> default_spectators(const GateConfig& cfg, const ModeGeometry& geom);

// First-order spectator excitation probability summed over spectators.
double offresonant_error_estimate(const Envelope& env, double t_gate,
                                  const std::vector<Spectator>& spectators);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepPoint {
  double x = 0.0;  // detuning magnitude (GHz) or duration (s)
  double total_error = 0.0;
  double std_err = 0.0;
  std::vector<std::pair<std::string, double>> decomposition;
};

struct DetuningScenario {
  double detuning_ghz = 0.0;   // |Delta| / 2pi, GHz
  double raman_rate = 0.0;     // per-gate error at this detuning
  double rayleigh_error = 0.0;
};

// Raman error scaled 1/Delta^2 and Rayleigh constant, anchored at the
// reference point.
std::vector<DetuningScenario> calibrated_detuning_scenarios(
    const std::vector<double>& detunings_ghz, double anchor_ghz, double raman_at_anchor,
    double rayleigh);

std::vector<SweepPoint> sweep_detuning(const std::vector<DetuningScenario>& scenarios,
                                       const GateConfig& cfg, const NoiseModel& base,
                                       int shots, std::uint64_t seed);

std::vector<SweepPoint> sweep_duration(const std::vector<double>& t_list,
                                       const NoiseModel& model, int shots, std::uint64_t seed,
                                       double eta_S = 0.19, double rise_fall = 0.0);

// Least-squares slope of log(y) vs log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace iongate

#endif
