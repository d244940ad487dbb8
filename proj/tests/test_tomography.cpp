#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "iongate/rng.hpp"
#include "iongate/tomography.hpp"

using namespace iongate;

namespace {

Eigen::Vector4cd bell_plus() {
  Eigen::Vector4cd v;
  v << 1.0 / std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0);
  return v;
}

// Bell state mixed down to a target <Phi+|rho|Phi+> with orthogonal junk.
Eigen::Matrix4cd bell_mixture(double fidelity) {
  const Eigen::Vector4cd phi = bell_plus();
  const Eigen::Matrix4cd pure = phi * phi.adjoint();
  return fidelity * pure + (1.0 - fidelity) / 3.0 * (Eigen::Matrix4cd::Identity() - pure);
}

double bell_overlap(const Eigen::Matrix4cd& rho) {
  const Eigen::Vector4cd phi = bell_plus();
  return std::real((phi.adjoint() * rho * phi)(0, 0));
}

Eigen::Matrix4cd random_density(Rng& rng) {
  Eigen::Matrix4cd g;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) g(i, j) = cplx(rng.normal(0, 1), rng.normal(0, 1));
  Eigen::Matrix4cd rho = g * g.adjoint();
  return rho / rho.trace();
}

struct FitInput {
  std::array<BinnedHistogram, 4> refs;
  std::array<BinnedHistogram, 9> data;
};

// generate, train binning on references, bin everything with training excluded
FitInput make_fit_input(const Eigen::Matrix4cd& rho, const TomographySetup& setup,
                        const OpticsModel& optics, long shots, std::uint64_t seed,
                        double train_frac = 0.1) {
  TomographyData td = simulate_detection(rho, setup, optics, shots, seed);
  BinningResult br = train_binning(td.reference, train_frac, derive_seed(seed, 1000));
  FitInput in;
  for (int i = 0; i < 4; ++i) in.refs[i] = bin_histogram(br.remainder[i], br.edges);
  for (int k = 0; k < 9; ++k) in.data[k] = bin_histogram(td.data[k], br.edges);
  return in;
}

double mean_count(const CountHistogram& h) {
  double s = 0.0;
  for (int c = 0; c < static_cast<int>(h.counts.size()); ++c) s += c * double(h.counts[c]);
  return s / h.shots;
}

}  // namespace

TEST_CASE("setup: reference matrix and b_map") {
  TomographySetup s = TomographySetup::standard();
  for (int i = 0; i < 4; ++i) CHECK(s.a.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.analysis_pulses.size() == 9);

  Eigen::Matrix4cd up = Eigen::Matrix4cd::Zero();
  up(0, 0) = 1.0;
  Eigen::Vector3d b0 = s.b_row(0, up);
  CHECK(b0(0) == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::Matrix4cd r1 = random_density(rng), r2 = random_density(rng);
    const double lam = rng.uniform();
    auto lhs = s.b_map(lam * r1 + (1.0 - lam) * r2);
    auto rhs = (lam * s.b_map(r1) + (1.0 - lam) * s.b_map(r2)).eval();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    for (int k = 0; k < 9; ++k) CHECK(lhs.row(k).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }

  // transfer-leakage rows still sum to 1 and stay linear
  TomographySetup leaky = s;
  leaky.transfer_error = 1e-3;
  Eigen::Matrix4cd r1 = random_density(rng), r2 = random_density(rng);
  auto lhs = leaky.b_map(0.3 * r1 + 0.7 * r2);
  auto rhs = (0.3 * leaky.b_map(r1) + 0.7 * leaky.b_map(r2)).eval();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  for (int k = 0; k < 9; ++k) CHECK(lhs.row(k).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("detection model: Poisson limits and depumping tail") {
  OpticsModel clean;
  clean.depump_rate = 0.0;
  clean.mean_background = 0.0;
  Eigen::Vector3d both_bright(1.0, 0.0, 0.0);
  CountHistogram h = simulate_histogram(both_bright, clean, 40000, 11);
  double mean = mean_count(h), var = 0.0;
  for (int c = 0; c < static_cast<int>(h.counts.size()); ++c)
    var += h.counts[c] * (c - mean) * (c - mean);
  var /= h.shots;
  CHECK(mean == doctest::Approx(60.0).epsilon(0.01));
  CHECK(var == doctest::Approx(60.0).epsilon(0.05));  // Poisson: variance = mean

  // both-dark reference: mean approximately 2
  OpticsModel optics;
  Eigen::Vector3d dark(0.0, 0.0, 1.0);
  CHECK(mean_count(simulate_histogram(dark, optics, 40000, 12)) ==
        doctest::Approx(2.0).epsilon(0.05));

  // depumping adds low-count mass to the one-bright subspace; KS vs the
  // no-depumping distribution grows with rate
  Eigen::Vector3d one(0.0, 1.0, 0.0);
  auto cdf = [](const CountHistogram& hh) {
    std::vector<double> c(hh.counts.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < hh.counts.size(); ++i) {
      acc += double(hh.counts[i]) / hh.shots;
      c[i] = acc;
    }
    return c;
  };
  OpticsModel o0 = optics, o1 = optics, o2 = optics;
  o0.depump_rate = 0.0;
  o1.depump_rate = 300.0;
  o2.depump_rate = 1500.0;
  auto c0 = cdf(simulate_histogram(one, o0, 60000, 13));
  auto c1 = cdf(simulate_histogram(one, o1, 60000, 13));
  auto c2 = cdf(simulate_histogram(one, o2, 60000, 13));
  double ks1 = 0.0, ks2 = 0.0;
  for (std::size_t i = 0; i < c0.size(); ++i) {
    ks1 = std::max(ks1, std::abs(c1[i] - c0[i]));
    ks2 = std::max(ks2, std::abs(c2[i] - c0[i]));
  }
  CHECK(ks1 > 0.01);
  CHECK(ks2 > ks1);
}

TEST_CASE("binning: disjoint supports reach log 4, identical references tie-break left") {
  const int size = 40;
  std::array<CountHistogram, 4> refs;
  for (int i = 0; i < 4; ++i) {
    refs[i].counts.assign(size, 0);
    for (int c = 10 * i; c < 10 * i + 5; ++c) {
      refs[i].counts[c] = 200;
      refs[i].shots += 200;
    }
  }
  BinningResult br = train_binning(refs, 0.5, 3);
  CHECK(br.mutual_information == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  CHECK_FALSE(br.degenerate);
  // remainder + training = original shot counts
  long total = 0;
  for (int i = 0; i < 4; ++i) total += br.remainder[i].shots;
  CHECK(total == 2000);

  // exact ties: cuts inside the empty low range contribute 0 regardless of
  // placement, so the leftmost tie-break pushes the three free cuts to 1,2,3
  std::array<CountHistogram, 4> high;
  for (int i = 0; i < 4; ++i) {
    high[i].counts.assign(size, 0);
    high[i].counts[30 + 2 * i] = 200;
    high[i].counts[31 + 2 * i] = 200;
    high[i].shots = 400;
  }
  BinningResult tie = train_binning(high, 0.5, 5);
  CHECK(tie.mutual_information == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  const std::vector<int> expect = {0, 1, 2, 3, 32, 34, 36, size};
  CHECK(tie.edges == expect);

  // degenerate: fewer distinct counts than bins
  std::array<CountHistogram, 4> narrow;
  for (int i = 0; i < 4; ++i) {
    narrow[i].counts.assign(size, 0);
    narrow[i].counts[2 * i] = 100;
    narrow[i].shots = 100;
  }
  BinningResult deg = train_binning(narrow, 0.5, 5);
  CHECK(deg.degenerate);
  CHECK(deg.edges.size() <= 5);
}

TEST_CASE("binning DP matches brute force on a small instance") {
  OpticsModel small;
  small.mean_bright = 8.0;
  small.mean_background = 1.0;
  small.max_count = 30;
  TomographySetup setup = TomographySetup::standard();
  std::array<CountHistogram, 4> refs;
  for (int i = 0; i < 4; ++i)
    refs[i] = simulate_histogram(setup.a.row(i).transpose(), small, 4000, 100 + i);

  BinningResult br = train_binning(refs, 0.5, 42);

  // reconstruct the training set = original - remainder
  std::array<CountHistogram, 4> train;
  for (int i = 0; i < 4; ++i) {
    train[i].counts.resize(refs[i].counts.size());
    for (std::size_t c = 0; c < refs[i].counts.size(); ++c)
      train[i].counts[c] = refs[i].counts[c] - br.remainder[i].counts[c];
    train[i].shots = refs[i].shots - br.remainder[i].shots;
  }
  CHECK(binning_mutual_information(train, br.edges) ==
        doctest::Approx(br.mutual_information).epsilon(1e-10));

  // exhaustive search over all 7-bin partitions of {0..30}
  const int size = 31;
  double best = -1.0;
  std::vector<int> e(8);
  e[0] = 0;
  e[7] = size;
  for (e[1] = 1; e[1] <= size - 6; ++e[1])
    for (e[2] = e[1] + 1; e[2] <= size - 5; ++e[2])
      for (e[3] = e[2] + 1; e[3] <= size - 4; ++e[3])
        for (e[4] = e[3] + 1; e[4] <= size - 3; ++e[4])
          for (e[5] = e[4] + 1; e[5] <= size - 2; ++e[5])
            for (e[6] = e[5] + 1; e[6] <= size - 1; ++e[6])
              best = std::max(best, binning_mutual_information(train, e));
  CHECK(br.mutual_information == doctest::Approx(best).epsilon(1e-10));

  // and beats 1e4 random partitions
  Rng rng(9);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<int> cuts;
    while (cuts.size() < 6) {
      int c = 1 + rng.uniform_int(size - 1);
      if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<int> edges = {0};
    edges.insert(edges.end(), cuts.begin(), cuts.end());
    edges.push_back(size);
    CHECK(binning_mutual_information(train, edges) <= br.mutual_information + 1e-12);
  }
}

TEST_CASE("ml_fit: large-N self-consistent recovery") {
  TomographySetup setup = TomographySetup::standard();
  OpticsModel optics;
  const Eigen::Vector4cd phi = bell_plus();
  const Eigen::Matrix4cd rho = phi * phi.adjoint();
  FitInput in = make_fit_input(rho, setup, optics, 1000000, 21);
  MLResult fit = ml_fit(in.refs, in.data, setup);
  CHECK(fit.monotonicity_violations == 0);
  CHECK(fit.fidelity >= 0.999);
  // estimate invariants
  CHECK(std::abs(fit.rho_hat.trace() - cplx(1, 0)) < 1e-9);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(fit.rho_hat);
  CHECK(es.eigenvalues().minCoeff() > -1e-9);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(fit.q_hat.q.row(j).sum() - 1.0) < 1e-12);
    CHECK(fit.q_hat.q.row(j).minCoeff() >= 0.0);
  }
}

TEST_CASE("ml_fit: maximally mixed state has no fitted parity amplitude") {
  TomographySetup setup = TomographySetup::standard();
  OpticsModel optics;
  FitInput in = make_fit_input(0.25 * Eigen::Matrix4cd::Identity(), setup, optics, 20000, 22);
  MLResult fit = ml_fit(in.refs, in.data, setup);
  CHECK(std::abs(fit.rho_hat(0, 3)) < 0.01);  // ~3 sigma of shot noise
  CHECK(fit.monotonicity_violations == 0);
}

TEST_CASE("estimator consistency: error scales as 1/sqrt(shots)") {
  TomographySetup setup = TomographySetup::standard();
  OpticsModel optics;
  // Interior truth: at near-unit fidelity the estimator is non-regular (the
  // true state sits against the positivity boundary) and the error saturates,
  // so the 1/sqrt(shots) law is probed away from the boundary.
  const double f_true = 0.70;
  const Eigen::Matrix4cd rho = bell_mixture(f_true);
  std::vector<double> xs, ys;
  int level = 0;
  for (long shots : {1000L, 10000L, 100000L, 1000000L}) {
    double sq = 0.0;
    const int reps = 16;
    for (int r = 0; r < reps; ++r) {
      FitInput in = make_fit_input(rho, setup, optics, shots, derive_seed(31, 100 * level + r));
      MLResult fit = ml_fit(in.refs, in.data, setup);
      CHECK(fit.monotonicity_violations == 0);
      sq += (fit.fidelity - f_true) * (fit.fidelity - f_true);
    }
    xs.push_back(std::log(double(shots)));
    ys.push_back(0.5 * std::log(sq / reps));
    ++level;
  }
  // least-squares slope of log(rmse) vs log(shots)
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = num / den;
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.1));
}

TEST_CASE("bootstrap CI at paper-scale settings") {
  TomographySetup setup = TomographySetup::standard();
  OpticsModel optics;
  const Eigen::Matrix4cd rho = bell_mixture(0.9992);
  FitInput in = make_fit_input(rho, setup, optics, 20000, 41);
  MLResult fit = ml_fit(in.refs, in.data, setup);
  ConfidenceInterval ci = bootstrap_ci(fit, setup, in.refs, in.data, 500, 42);
  const double hw = 0.5 * (ci.hi - ci.lo);
  CHECK(hw > 1.0e-4);
  CHECK(hw < 1.2e-3);
  CHECK(ci.lo <= fit.fidelity);
  CHECK(ci.hi >= fit.fidelity);
  CHECK(ci.failures == 0);

  // determinism
  ConfidenceInterval ci2 = bootstrap_ci(fit, setup, in.refs, in.data, 500, 42);
  CHECK(ci2.lo == ci.lo);
  CHECK(ci2.hi == ci.hi);

  CHECK_THROWS(bootstrap_ci(fit, setup, in.refs, in.data, 50, 42));
}

TEST_CASE("likelihood-ratio model check") {
  TomographySetup setup = TomographySetup::standard();
  OpticsModel optics;
  const Eigen::Matrix4cd rho = bell_mixture(0.9992);
  FitInput in = make_fit_input(rho, setup, optics, 20000, 51);
  MLResult fit = ml_fit(in.refs, in.data, setup);
  LRCheck ok = lr_model_check(fit, setup, in.refs, in.data, 200, 52);
  CHECK(std::abs(ok.z) <= 2.0);
  CHECK(ok.pvalue > 0.02);

  // injected analysis-pulse miscalibration (0.2 rad over-rotation): a common
  // phase offset would be absorbed into the fitted coherence phase, but a
  // rotation-angle error is a genuine model misspecification
  TomographySetup wrong = setup;
  for (int n = 0; n < 8; ++n)
    wrong.analysis_pulses[n + 1] = pauli_rotation({kPi / 2.0 + 0.2, n * kPi / 4.0});
  TomographyData td = simulate_detection(rho, wrong, optics, 20000, 53);
  BinningResult br = train_binning(td.reference, 0.1, 54);
  FitInput bad;
  for (int i = 0; i < 4; ++i) bad.refs[i] = bin_histogram(br.remainder[i], br.edges);
  for (int k = 0; k < 9; ++k) bad.data[k] = bin_histogram(td.data[k], br.edges);
  MLResult badfit = ml_fit(bad.refs, bad.data, setup);
  LRCheck miss = lr_model_check(badfit, setup, bad.refs, bad.data, 200, 55);
  CHECK(miss.z > 3.0);
  CHECK(miss.z > ok.z);
}

TEST_CASE("sensitivity analyses") {
  TomographySetup setup = TomographySetup::standard();
  OpticsModel optics;
  const Eigen::Matrix4cd rho = bell_mixture(0.9992);
  FitInput in = make_fit_input(rho, setup, optics, 20000, 61);

  CHECK(sensitivity_reference_populations(0.0, in.refs, in.data, setup) == 0.0);
  CHECK(sensitivity_transfer_leakage(0.0, in.refs, in.data, setup) == 0.0);

  // monotone in xi, small compared to the ~4e-4 CI at the endpoint
  double prev = 0.0;
  bool increasing = true, decreasing = true;
  for (double xi : {1e-4, 2e-4, 3e-4, 4e-4, 5e-4}) {
    const double shift = sensitivity_reference_populations(xi, in.refs, in.data, setup);
    if (shift < prev) increasing = false;
    if (shift > prev) decreasing = false;
    prev = shift;
  }
  CHECK((increasing || decreasing));
  CHECK(std::abs(prev) < 4e-4);

  CHECK(std::abs(sensitivity_transfer_leakage(4e-4, in.refs, in.data, setup)) < 1e-3);
}

TEST_CASE("transfer leakage: apparent-vs-true gap grows linearly") {
  TomographySetup setup = TomographySetup::standard();
  OpticsModel optics;
  const double f_true = 0.9985;
  const Eigen::Matrix4cd rho = bell_mixture(f_true);
  std::vector<double> tes = {0.0, 5e-4, 1e-3, 2e-3};
  std::vector<double> gaps;
  for (double te : tes) {
    TomographySetup gen = setup;
    gen.transfer_error = te;  // data generated with the leakage channel
    FitInput in = make_fit_input(rho, gen, optics, 100000, 71);  // common random numbers
    MLResult fit = ml_fit(in.refs, in.data, setup);              // fitted without it
    gaps.push_back(fit.fidelity - f_true);
  }
  const double g1 = gaps[2] - gaps[0], g2 = gaps[3] - gaps[0];
  CHECK(std::abs(g1) > 1e-4);  // visible effect at 1e-3
  CHECK(g2 / g1 == doctest::Approx(2.0).epsilon(0.5));
}

TEST_CASE("pumping bound and Bell-fidelity lower bound") {
  CHECK(pumping_bound(8e-4, 0.8, 0.0) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(pumping_bound(0.0, 0.8, 0.1) == 0.0);
  CHECK(pumping_bound(0.05, 0.5, 0.4) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pumping_bound(0.9, 0.5, 0.1) == 1.0);  // clamped
  CHECK_THROWS(pumping_bound(0.1, 0.3, 0.3));

  CHECK(bell_fidelity_lower_bound(0.9992, 1e-3) == doctest::Approx(0.9972).epsilon(1e-12));
  CHECK(bell_fidelity_lower_bound(0.5, 0.0) == 0.5);
  CHECK(bell_fidelity_lower_bound(1e-4, 0.3) == 0.0);
}

TEST_CASE("per-ion pumping error reduces ML fidelity with slope 2") {
  TomographySetup setup = TomographySetup::standard();
  OpticsModel optics;
  const Eigen::Vector4cd phi = bell_plus();
  const Eigen::Matrix4cd pure = phi * phi.adjoint();
  Eigen::Matrix4cd ud = Eigen::Matrix4cd::Zero(), du = Eigen::Matrix4cd::Zero(),
                   dd = Eigen::Matrix4cd::Zero();
  ud(1, 1) = 1.0;
  du(2, 2) = 1.0;
  dd(3, 3) = 1.0;
  // Epsilons large enough that the fidelity drop dominates the estimator's
  // boundary bias at the pure-state endpoint.
  std::vector<double> eps = {0.0, 5e-3, 1e-2, 2e-2};
  std::vector<double> fids;
  for (double e : eps) {
    // unpumped ion enters (and stays) dark; both-failed shots are both-dark
    const Eigen::Matrix4cd rho = (1.0 - e) * (1.0 - e) * pure +
                                 e * (1.0 - e) * (ud + du) + e * e * dd;
    FitInput in = make_fit_input(rho, setup, optics, 200000, 81);  // common random numbers
    fids.push_back(ml_fit(in.refs, in.data, setup).fidelity);
  }
  // least-squares slope of fidelity vs epsilon
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    mx += eps[i];
    my += fids[i];
  }
  mx /= eps.size();
  my /= eps.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    num += (eps[i] - mx) * (fids[i] - my);
    den += (eps[i] - mx) * (eps[i] - mx);
  }
  CHECK(num / den == doctest::Approx(-2.0).epsilon(0.1));
}

TEST_CASE("bootstrap coverage (light)") {
  TomographySetup setup = TomographySetup::standard();
  OpticsModel optics;
  const double f_true = 0.9985;
  const Eigen::Matrix4cd rho = bell_mixture(f_true);
  int covered = 0;
  const int trials = 30;
  for (int t = 0; t < trials; ++t) {
    FitInput in = make_fit_input(rho, setup, optics, 20000, derive_seed(91, t));
    MLResult fit = ml_fit(in.refs, in.data, setup);
    ConfidenceInterval ci = bootstrap_ci(fit, setup, in.refs, in.data, 120, derive_seed(92, t));
    if (ci.lo <= f_true && f_true <= ci.hi) ++covered;
  }
  // 68% nominal; binomial 3 sigma on 30 trials is roughly +-0.26
  CHECK(covered >= 12);
  CHECK(covered <= 28);
}
