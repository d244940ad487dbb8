#ifndef IONGATE_TOMOGRAPHY_HPP
#define IONGATE_TOMOGRAPHY_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "iongate/hilbert.hpp"

namespace iongate {

// Photon-counting detection model: per bright ion a Poisson core whose mean is
// reduced when the ion depumps to dark during the window, plus Poisson
// background; counts above max_count are pooled.
struct OpticsModel {
  double mean_bright = 30.0;      // photons per fully bright ion per window
  double mean_background = 2.0;   // photons per shot, state-independent
  double detect_window = 330e-6;  // s
  double depump_rate = 30.0;      // bright->dark conversions, 1/s
  int max_count = 150;
};

struct CountHistogram {
  std::vector<long> counts;  // index = photon count, 0..max_count
  long shots = 0;

  void add(int c) {
    if (c >= static_cast<int>(counts.size())) c = static_cast<int>(counts.size()) - 1;
    ++counts[c];
    ++shots;
  }
};

// 13 histograms of one tomography run: 4 references + 9 analysis settings.
struct TomographyData {
  std::array<CountHistogram, 4> reference;
  std::array<CountHistogram, 9> data;
};

struct BinnedHistogram {
  std::vector<int> edges;     // n_bins+1 increasing count values; bin b = [e_b, e_{b+1})
  std::vector<long> counts;   // per-bin occurrences
  long shots = 0;
};

struct SubspaceDistributions {
  Eigen::Matrix<double, 3, Eigen::Dynamic> q;  // rows: both-bright, one-bright, both-dark
};

struct TomographySetup {
  Eigen::Matrix<double, 4, 3> a;     // reference subspace populations
  std::vector<Mat2> analysis_pulses; // 9 entries: identity + (pi/2, n pi/4)
  double transfer_error = 0.0;       // per-ion two-way |2,2> transfer leakage

  static TomographySetup standard();
  // subspace populations of analysis setting k on state rho (3-vector)
  Eigen::Vector3d b_row(int k, const Eigen::Matrix4cd& rho) const;
  Eigen::Matrix<double, 9, 3> b_map(const Eigen::Matrix4cd& rho) const;
};

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  int failures = 0;
};

struct MLResult {
  Eigen::Matrix4cd rho_hat;
  SubspaceDistributions q_hat;
  double loglik = 0.0;
  double fidelity = 0.0;  // <Phi+|rho|Phi+>, Phi+ = (|uu> + |dd>)/sqrt2
  int iterations = 0;
  bool converged = false;
  int monotonicity_violations = 0;
  std::optional<ConfidenceInterval> ci;
};

struct MLOptions {
  double tol = 1e-10;   // relative log-likelihood improvement
  int max_iter = 5000;
  Eigen::Matrix4cd init_rho = 0.25 * Eigen::Matrix4cd::Identity();
  std::optional<Eigen::Matrix<double, 3, Eigen::Dynamic>> init_q;
};

// ---------------------------------------------------------------------------
// Synthetic data generation

// One count sampled with n_bright ions bright (0..2).
int sample_count(int n_bright, const OpticsModel& optics, class Rng& rng);

CountHistogram simulate_histogram(const Eigen::Vector3d& populations,
                                  const OpticsModel& optics, long shots, std::uint64_t seed);

TomographyData simulate_detection(const Eigen::Matrix4cd& rho, const TomographySetup& setup,
                                  const OpticsModel& optics, long shots, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Count binning

struct BinningResult {
  std::vector<int> edges;                   // n_bins+1 edges covering 0..max_count+1
  double mutual_information = 0.0;          // nats, on the training set
  bool degenerate = false;                  // fewer distinct counts than bins
  std::array<CountHistogram, 4> remainder;  // references minus the training split
};

// Mutual information (nats) between bin index and reference label, uniform
// prior over the 4 references.
double binning_mutual_information(const std::array<CountHistogram, 4>& refs,
                                  const std::vector<int>& edges);

BinningResult train_binning(const std::array<CountHistogram, 4>& references,
                            double train_frac, std::uint64_t seed, int n_bins = 7);

BinnedHistogram bin_histogram(const CountHistogram& h, const std::vector<int>& edges);

// ---------------------------------------------------------------------------
// Maximum-likelihood fit

double log_likelihood(const std::array<BinnedHistogram, 4>& refs,
                      const std::array<BinnedHistogram, 9>& data,
                      const TomographySetup& setup, const Eigen::Matrix4cd& rho,
                      const Eigen::Matrix<double, 3, Eigen::Dynamic>& q);

MLResult ml_fit(const std::array<BinnedHistogram, 4>& refs,
                const std::array<BinnedHistogram, 9>& data, const TomographySetup& setup,
                const MLOptions& opts = {});

ConfidenceInterval bootstrap_ci(const MLResult& fit, const TomographySetup& setup,
                                const std::array<BinnedHistogram, 4>& refs,
                                const std::array<BinnedHistogram, 9>& data, int resamples,
                                std::uint64_t seed, const MLOptions& opts = {});

struct LRCheck {
  double lr_data = 0.0;  // 2 (loglik_saturated - loglik_model)
  double z = 0.0;        // standardized against the bootstrap null
  double pvalue = 0.0;   // bootstrap tail probability
};

LRCheck lr_model_check(const MLResult& fit, const TomographySetup& setup,
                       const std::array<BinnedHistogram, 4>& refs,
                       const std::array<BinnedHistogram, 9>& data, int resamples,
                       std::uint64_t seed, const MLOptions& opts = {});

// ---------------------------------------------------------------------------
// Sensitivity analyses and bounds

double sensitivity_reference_populations(double xi, const std::array<BinnedHistogram, 4>& refs,
                                         const std::array<BinnedHistogram, 9>& data,
                                         const TomographySetup& setup,
                                         const MLOptions& opts = {});

double sensitivity_transfer_leakage(double transfer_error,
                                    const std::array<BinnedHistogram, 4>& refs,
                                    const std::array<BinnedHistogram, 9>& data,
                                    const TomographySetup& setup, const MLOptions& opts = {});

double pumping_bound(double t_b, double l, double t_bar_b);

double bell_fidelity_lower_bound(double ml_fidelity, double epsilon);

}  // namespace iongate

#endif
