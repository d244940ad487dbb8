#ifndef IONGATE_RB_HPP
#define IONGATE_RB_HPP

#include <cstdint>
#include <vector>

#include "iongate/hilbert.hpp"
#include "iongate/rng.hpp"

namespace iongate {

// Rotation axis of an RB step element; None means wait / identity.
enum class RBAxis { None, X, Y, Z };

// One computational step: a Pauli pi (two pi/2 pulses about one axis, or a
// frame flip for z, or a wait) followed by a pi/2 Clifford (or identity).
struct RBStep {
  RBAxis pauli = RBAxis::None;     // axis of the pi rotation
  RBAxis clifford = RBAxis::None;  // axis of the pi/2 rotation
  int clifford_sign = +1;          // +1 or -1 quarter turn
};

// A physical or frame rotation used in the recovery step.
struct RBPulse {
  RBAxis axis = RBAxis::None;
  int quarter_turns = 0;  // rotation angle = quarter_turns * pi/2
};

struct RBSequence {
  int length = 0;               // number of computational steps
  std::vector<RBStep> steps;    // `length` entries
  std::vector<RBPulse> recovery;
  int target = 0;               // ideal outcome: 0 = |up>, 1 = |down>
  std::uint64_t seed = 0;
};

// Per-pi/2-pulse noise plus idle decoherence. depolarizing_per_pulse is the
// average gate error of the per-pulse depolarizing channel (Bloch contraction
// 1 - 2*eps). rabi_frac_rms is a quasi-static fractional Rabi-rate error drawn
// once per sequence. z rotations are frame updates (zero duration, no noise);
// identity elements wait for the would-be pulse time and dephase with
// coherence_time.
struct RBNoise {
  double depolarizing_per_pulse = 2.5e-5;
  double rabi_frac_rms = 1.0e-3;
  double coherence_time = 1.5;  // s
  double pulse_time = 2.0e-6;   // s per pi/2 pulse
};

struct RBFit {
  std::vector<int> lengths;
  std::vector<double> mean_fidelity;   // per length
  std::vector<double> sem;             // standard error of the mean per length
  double A = 0.0, B = 0.0, p = 1.0;    // F(l) = A p^l + B; B pinned at 1/2
  double epg = 0.0;                    // (1 - p) / 2
  double spam = 0.0;                   // 1 - (A + B)
  double epg_err = 0.0;                // from the fit covariance
  double spam_err = 0.0;
  Eigen::Matrix3d cov;                 // (p, A, B) covariance
  std::vector<double> residuals;       // per length, data - model
  bool converged = false;
};

std::vector<RBSequence> generate_sequences(const std::vector<int>& lengths, int per_length,
                                           std::uint64_t seed);

// Ideal unitary of the whole sequence including recovery.
Mat2 sequence_unitary(const RBSequence& seq);

// Survival probability of one sequence under the noise model; spam is the
// end-to-end state-preparation-and-measurement flip probability.
double simulate_sequence(const RBSequence& seq, const RBNoise& noise, double spam, Rng& rng);

std::vector<double> simulate_rb(const std::vector<RBSequence>& seqs, const RBNoise& noise,
                                double spam, std::uint64_t seed);

RBFit fit_rb(const std::vector<RBSequence>& seqs, const std::vector<double>& survivals);

// Fit from pre-aggregated (length, mean, sem) points.
RBFit fit_rb_points(const std::vector<int>& lengths, const std::vector<double>& means,
                    const std::vector<double>& sems);

}  // namespace iongate

#endif
