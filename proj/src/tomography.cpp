#include "iongate/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "iongate/rng.hpp"

namespace iongate {

namespace {

Eigen::Matrix4cd kron2(const Mat2& a, const Mat2& b) {
  Eigen::Matrix4cd out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

Mat2 reduce_first(const Eigen::Matrix4cd& rho) {  // trace out ion 2
  Mat2 r;
  r(0, 0) = rho(0, 0) + rho(1, 1);
  r(0, 1) = rho(0, 2) + rho(1, 3);
  r(1, 0) = rho(2, 0) + rho(3, 1);
  r(1, 1) = rho(2, 2) + rho(3, 3);
  return r;
}

Mat2 reduce_second(const Eigen::Matrix4cd& rho) {  // trace out ion 1
  Mat2 r;
  r(0, 0) = rho(0, 0) + rho(2, 2);
  r(0, 1) = rho(0, 1) + rho(2, 3);
  r(1, 0) = rho(1, 0) + rho(3, 2);
  r(1, 1) = rho(1, 1) + rho(3, 3);
  return r;
}

// POVM elements E_kj with Tr(rho E_kj) = subspace-j probability of analysis
// setting k, including the optional stuck-dark transfer-leakage channel.
struct PovmSet {
  std::array<std::array<Eigen::Matrix4cd, 3>, 9> e;
};

PovmSet povm_elements(const TomographySetup& setup) {
  PovmSet out;
  const double te = setup.transfer_error;
  const double w2 = (1.0 - te) * (1.0 - te);  // both ions in the qubit manifold
  const double w1 = te * (1.0 - te);          // one specific ion stuck dark
  const double w0 = te * te;
  Eigen::Matrix4cd p_uu = Eigen::Matrix4cd::Zero();
  p_uu(0, 0) = 1.0;
  Eigen::Matrix4cd p_mid = Eigen::Matrix4cd::Zero();
  p_mid(1, 1) = 1.0;
  p_mid(2, 2) = 1.0;
  Eigen::Matrix4cd p_dd = Eigen::Matrix4cd::Zero();
  p_dd(3, 3) = 1.0;
  for (int k = 0; k < 9; ++k) {
    const Mat2& u = setup.analysis_pulses[k];
    const Eigen::Matrix4cd uu = kron2(u, u);
    const Mat2 bright1 = u.adjoint() * (Mat2() << 1, 0, 0, 0).finished() * u;
    const Mat2 dark1 = Mat2::Identity() - bright1;
    // single-ion operators lifted to two qubits (stuck ion acts as identity)
    const Eigen::Matrix4cd bright_a = kron2(Mat2::Identity(), bright1);  // ion 1 stuck
    const Eigen::Matrix4cd bright_b = kron2(bright1, Mat2::Identity());  // ion 2 stuck
    const Eigen::Matrix4cd dark_a = kron2(Mat2::Identity(), dark1);
    const Eigen::Matrix4cd dark_b = kron2(dark1, Mat2::Identity());
    out.e[k][0] = w2 * uu.adjoint() * p_uu * uu;
    out.e[k][1] = w2 * uu.adjoint() * p_mid * uu + w1 * (bright_a + bright_b);
    out.e[k][2] = w2 * uu.adjoint() * p_dd * uu + w1 * (dark_a + dark_b) +
                  w0 * Eigen::Matrix4cd::Identity();
  }
  return out;
}

double safe_log(double x) { return std::log(std::max(x, 1e-300)); }

}  // namespace

TomographySetup TomographySetup::standard() {
  TomographySetup s;
  s.a << 1.0, 0.0, 0.0,      // r1: both bright
      0.0, 0.0, 1.0,          // r2: both dark
      0.25, 0.5, 0.25,        // r3: spin echo, phase3 = pi/2
      0.25, 0.5, 0.25;        // r4: spin echo, phase3 = 3pi/2
  s.analysis_pulses.push_back(Mat2::Identity());
  for (int n = 0; n < 8; ++n)
    s.analysis_pulses.push_back(pauli_rotation({kPi / 2.0, n * kPi / 4.0}));
  return s;
}

Eigen::Vector3d TomographySetup::b_row(int k, const Eigen::Matrix4cd& rho) const {
  const Mat2& u = analysis_pulses[k];
  const Eigen::Matrix4cd uu = kron2(u, u);
  const Eigen::Matrix4cd r = uu * rho * uu.adjoint();
  Eigen::Vector3d p;
  p << std::real(r(0, 0)), std::real(r(1, 1) + r(2, 2)), std::real(r(3, 3));
  if (transfer_error > 0.0) {
    const double te = transfer_error;
    const Mat2 red1 = u * reduce_first(rho) * u.adjoint();
    const Mat2 red2 = u * reduce_second(rho) * u.adjoint();
    const double pb1 = std::real(red1(0, 0));
    const double pb2 = std::real(red2(0, 0));
    Eigen::Vector3d stuck1, stuck2;
    stuck1 << 0.0, pb1, 1.0 - pb1;  // ion 1 stuck dark, ion 2 measured
    stuck2 << 0.0, pb2, 1.0 - pb2;
    Eigen::Vector3d dark;
    dark << 0.0, 0.0, 1.0;
    p = (1.0 - te) * (1.0 - te) * p + te * (1.0 - te) * (stuck1 + stuck2) + te * te * dark;
  }
  return p;
}

Eigen::Matrix<double, 9, 3> TomographySetup::b_map(const Eigen::Matrix4cd& rho) const {
  Eigen::Matrix<double, 9, 3> b;
  for (int k = 0; k < 9; ++k) b.row(k) = b_row(k, rho).transpose();
  return b;
}

// ---------------------------------------------------------------------------
// Synthetic data generation

int sample_count(int n_bright, const OpticsModel& optics, Rng& rng) {
  int total = rng.poisson(optics.mean_background);
  for (int i = 0; i < n_bright; ++i) {
    const double s = rng.exponential(optics.depump_rate);
    const double frac = std::min(s, optics.detect_window) / optics.detect_window;
    total += rng.poisson(optics.mean_bright * frac);
  }
  return std::min(total, optics.max_count);
}

namespace {

std::vector<double> poisson_pmf(double mu, int cap) {
  std::vector<double> p(cap + 1, 0.0);
  if (mu <= 0.0) {
    p[0] = 1.0;
    return p;
  }
  p[0] = std::exp(-mu);
  for (int c = 1; c <= cap; ++c) p[c] = p[c - 1] * mu / c;
  double s = 0.0;
  for (double v : p) s += v;
  p[cap] += std::max(0.0, 1.0 - s);  // overflow pooled
  return p;
}

std::vector<double> convolve_pooled(const std::vector<double>& a, const std::vector<double>& b,
                                    int cap) {
  std::vector<double> r(cap + 1, 0.0);
  for (int i = 0; i <= cap; ++i) {
    if (a[i] == 0.0) continue;
    for (int j = 0; j <= cap; ++j) r[std::min(i + j, cap)] += a[i] * b[j];
  }
  return r;
}

// exact count distributions per subspace (both-bright / one-bright / both-dark)
std::array<std::vector<double>, 3> subspace_pmfs(const OpticsModel& o) {
  const int cap = o.max_count;
  const std::vector<double> bg = poisson_pmf(o.mean_background, cap);
  std::vector<double> p1;
  const double a = o.depump_rate * o.detect_window;
  if (a <= 0.0) {
    p1 = poisson_pmf(o.mean_bright, cap);
  } else {
    // survive the window: full Poisson core; otherwise mixture over the
    // exponential depumping time (Simpson quadrature over s/T)
    p1 = poisson_pmf(o.mean_bright, cap);
    for (double& v : p1) v *= std::exp(-a);
    const int n = 512;
    for (int i = 0; i <= n; ++i) {
      const double x = static_cast<double>(i) / n;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      const std::vector<double> px = poisson_pmf(o.mean_bright * x, cap);
      const double f = w / (3.0 * n) * a * std::exp(-a * x);
      for (int c = 0; c <= cap; ++c) p1[c] += f * px[c];
    }
    double s = 0.0;
    for (double v : p1) s += v;
    for (double& v : p1) v /= s;  // remove quadrature defect
  }
  std::array<std::vector<double>, 3> q;
  q[2] = bg;
  q[1] = convolve_pooled(p1, bg, cap);
  q[0] = convolve_pooled(p1, q[1], cap);
  return q;
}

}  // namespace

CountHistogram simulate_histogram(const Eigen::Vector3d& populations,
                                  const OpticsModel& optics, long shots, std::uint64_t seed) {
  Rng rng(seed);
  CountHistogram h;
  h.counts.assign(optics.max_count + 1, 0);
  const std::array<std::vector<double>, 3> pmf = subspace_pmfs(optics);
  std::array<std::vector<double>, 3> cdf;
  for (int j = 0; j < 3; ++j) {
    cdf[j].resize(pmf[j].size());
    double acc = 0.0;
    for (std::size_t c = 0; c < pmf[j].size(); ++c) {
      acc += pmf[j][c];
      cdf[j][c] = acc;
    }
  }
  // two aligned uniforms per shot (subspace, count) so that runs sharing a
  // seed differ only at shots whose subspace actually changed
  for (long s = 0; s < shots; ++s) {
    const double u = rng.uniform();
    int subspace = 2;
    if (u < populations(0))
      subspace = 0;
    else if (u < populations(0) + populations(1))
      subspace = 1;
    const double v = rng.uniform();
    const auto it = std::lower_bound(cdf[subspace].begin(), cdf[subspace].end(), v);
    h.add(static_cast<int>(it - cdf[subspace].begin()));
  }
  return h;
}

TomographyData simulate_detection(const Eigen::Matrix4cd& rho, const TomographySetup& setup,
                                  const OpticsModel& optics, long shots, std::uint64_t seed) {
  TomographyData out;
  for (int i = 0; i < 4; ++i)
    out.reference[i] =
        simulate_histogram(setup.a.row(i).transpose(), optics, shots, derive_seed(seed, i));
  for (int k = 0; k < 9; ++k)
    out.data[k] = simulate_histogram(setup.b_row(k, rho), optics, shots, derive_seed(seed, 4 + k));
  return out;
}

// ---------------------------------------------------------------------------
// Count binning

double binning_mutual_information(const std::array<CountHistogram, 4>& refs,
                                  const std::vector<int>& edges) {
  const int nb = static_cast<int>(edges.size()) - 1;
  double mi = 0.0;
  for (int b = 0; b < nb; ++b) {
    double p[4];
    double pbar = 0.0;
    for (int i = 0; i < 4; ++i) {
      long n = 0;
      for (int c = edges[b]; c < edges[b + 1] && c < static_cast<int>(refs[i].counts.size()); ++c)
        n += refs[i].counts[c];
      p[i] = refs[i].shots > 0 ? static_cast<double>(n) / refs[i].shots : 0.0;
      pbar += 0.25 * p[i];
    }
    if (pbar <= 0.0) continue;
    for (int i = 0; i < 4; ++i)
      if (p[i] > 0.0) mi += 0.25 * p[i] * std::log(p[i] / pbar);
  }
  return mi;
}

BinningResult train_binning(const std::array<CountHistogram, 4>& references,
                            double train_frac, std::uint64_t seed, int n_bins) {
  if (train_frac <= 0.0 || train_frac >= 1.0)
    throw std::invalid_argument("train_frac must be in (0,1)");
  const int size = static_cast<int>(references[0].counts.size());
  BinningResult out;
  std::array<CountHistogram, 4> train;
  for (int i = 0; i < 4; ++i) {
    // expand to per-shot counts and take a seeded random split without replacement
    std::vector<int> values;
    values.reserve(references[i].shots);
    for (int c = 0; c < static_cast<int>(references[i].counts.size()); ++c)
      for (long r = 0; r < references[i].counts[c]; ++r) values.push_back(c);
    Rng rng(seed, static_cast<std::uint64_t>(i));
    std::shuffle(values.begin(), values.end(), rng.engine());
    const long n_train = static_cast<long>(std::floor(train_frac * values.size()));
    train[i].counts.assign(size, 0);
    out.remainder[i].counts.assign(size, 0);
    for (long s = 0; s < static_cast<long>(values.size()); ++s) {
      if (s < n_train)
        train[i].add(values[s]);
      else
        out.remainder[i].add(values[s]);
    }
  }

  // distinct occupied counts in the training set
  int distinct = 0;
  for (int c = 0; c < size; ++c) {
    long tot = 0;
    for (int i = 0; i < 4; ++i) tot += train[i].counts[c];
    if (tot > 0) ++distinct;
  }
  int nb = n_bins;
  if (distinct < n_bins) {
    nb = std::max(distinct, 1);
    out.degenerate = true;
  }

  // prefix sums of training occupancy per reference
  std::array<std::vector<double>, 4> pre;
  for (int i = 0; i < 4; ++i) {
    pre[i].assign(size + 1, 0.0);
    const double n = std::max<long>(train[i].shots, 1);
    for (int c = 0; c < size; ++c) pre[i][c + 1] = pre[i][c] + train[i].counts[c] / n;
  }
  auto seg = [&](int a, int b) {  // MI contribution of bin [a,b)
    double p[4];
    double pbar = 0.0;
    for (int i = 0; i < 4; ++i) {
      p[i] = pre[i][b] - pre[i][a];
      pbar += 0.25 * p[i];
    }
    if (pbar <= 0.0) return 0.0;
    double f = 0.0;
    for (int i = 0; i < 4; ++i)
      if (p[i] > 0.0) f += 0.25 * p[i] * std::log(p[i] / pbar);
    return f;
  };

  // exact DP over cut positions; on exact score ties the earliest cut wins
  const double kNeg = -1e300;
  std::vector<std::vector<double>> dp(nb + 1, std::vector<double>(size + 1, kNeg));
  std::vector<std::vector<int>> cut(nb + 1, std::vector<int>(size + 1, -1));
  for (int c = 1; c <= size; ++c) dp[1][c] = seg(0, c);
  for (int k = 2; k <= nb; ++k)
    for (int c = k; c <= size; ++c)
      for (int cp = k - 1; cp < c; ++cp) {
        const double v = dp[k - 1][cp] + seg(cp, c);
        if (v > dp[k][c]) {
          dp[k][c] = v;
          cut[k][c] = cp;
        }
      }

  out.edges.assign(nb + 1, 0);
  out.edges[nb] = size;
  int c = size;
  for (int k = nb; k >= 2; --k) {
    c = cut[k][c];
    out.edges[k - 1] = c;
  }
  out.mutual_information = dp[nb][size];
  return out;
}

BinnedHistogram bin_histogram(const CountHistogram& h, const std::vector<int>& edges) {
  BinnedHistogram out;
  out.edges = edges;
  const int nb = static_cast<int>(edges.size()) - 1;
  out.counts.assign(nb, 0);
  for (int c = 0; c < static_cast<int>(h.counts.size()); ++c) {
    if (h.counts[c] == 0) continue;
    int b = nb - 1;
    for (int k = 0; k < nb; ++k)
      if (c < edges[k + 1]) {
        b = k;
        break;
      }
    out.counts[b] += h.counts[c];
  }
  out.shots = h.shots;
  return out;
}

// ---------------------------------------------------------------------------
// Maximum-likelihood fit

namespace {

using QMat = Eigen::Matrix<double, 3, Eigen::Dynamic>;

double loglik_rows(const std::array<BinnedHistogram, 4>& refs,
                   const std::array<BinnedHistogram, 9>& data,
                   const Eigen::Matrix<double, 4, 3>& a, const Eigen::Matrix<double, 9, 3>& b,
                   const QMat& q) {
  const int nb = static_cast<int>(q.cols());
  KahanSum ll;
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < nb; ++c)
      if (refs[i].counts[c] > 0) ll.add(refs[i].counts[c] * safe_log(a.row(i) * q.col(c)));
  for (int k = 0; k < 9; ++k)
    for (int c = 0; c < nb; ++c)
      if (data[k].counts[c] > 0) ll.add(data[k].counts[c] * safe_log(b.row(k) * q.col(c)));
  return ll.sum;
}

Eigen::Matrix<double, 9, 3> b_from_povm(const PovmSet& povm, const Eigen::Matrix4cd& rho) {
  Eigen::Matrix<double, 9, 3> b;
  for (int k = 0; k < 9; ++k)
    for (int j = 0; j < 3; ++j) b(k, j) = std::real((povm.e[k][j] * rho).trace());
  return b;
}

}  // namespace

double log_likelihood(const std::array<BinnedHistogram, 4>& refs,
                      const std::array<BinnedHistogram, 9>& data,
                      const TomographySetup& setup, const Eigen::Matrix4cd& rho,
                      const Eigen::Matrix<double, 3, Eigen::Dynamic>& q) {
  return loglik_rows(refs, data, setup.a, setup.b_map(rho), q);
}

MLResult ml_fit(const std::array<BinnedHistogram, 4>& refs,
                const std::array<BinnedHistogram, 9>& data, const TomographySetup& setup,
                const MLOptions& opts) {
  const int nb = static_cast<int>(refs[0].counts.size());
  for (const auto& h : refs)
    if (static_cast<int>(h.counts.size()) != nb) throw std::invalid_argument("bin mismatch");
  for (const auto& h : data)
    if (static_cast<int>(h.counts.size()) != nb) throw std::invalid_argument("bin mismatch");

  const PovmSet povm = povm_elements(setup);
  Eigen::Matrix4cd rho = opts.init_rho;
  QMat q;
  if (opts.init_q && opts.init_q->cols() == nb) {
    q = *opts.init_q;
  } else {
    // moment initialization from the references: r1 and r2 are pure
    // subspaces, the echo references give the one-bright row by inversion
    q = QMat::Constant(3, nb, 1.0 / nb);
    if (refs[0].shots > 0 && refs[1].shots > 0 && refs[2].shots + refs[3].shots > 0) {
      Eigen::VectorXd q0(nb), q2(nb), mid(nb);
      for (int c = 0; c < nb; ++c) {
        q0(c) = static_cast<double>(refs[0].counts[c]) / refs[0].shots;
        q2(c) = static_cast<double>(refs[1].counts[c]) / refs[1].shots;
        mid(c) = static_cast<double>(refs[2].counts[c] + refs[3].counts[c]) /
                 (refs[2].shots + refs[3].shots);
      }
      Eigen::VectorXd q1 = (2.0 * mid - 0.5 * q0 - 0.5 * q2).cwiseMax(0.0);
      if (q1.sum() > 0.0) q1 /= q1.sum();
      q.row(0) = q0.transpose();
      q.row(1) = q1.transpose();
      q.row(2) = q2.transpose();
      // keep strictly positive so no entry starts in the EM absorbing state
      q = 0.99 * q + 0.01 * QMat::Constant(3, nb, 1.0 / nb);
    }
  }

  long n_data = 0;
  for (const auto& h : data) n_data += h.shots;

  MLResult res;
  Eigen::Matrix<double, 9, 3> b = b_from_povm(povm, rho);
  double ll = loglik_rows(refs, data, setup.a, b, q);
  const double viol_tol = 1e-6;

  // One monotone climb (alternating EM half-steps plus safeguarded
  // over-relaxation) on the outer (q, rho, b, ll) state.
  auto run_em = [&](int budget) -> std::pair<int, bool> {
  int it = 0;
  int quiet = 0;       // consecutive sub-threshold iterations (plateau guard)
  double gamma = 2.0;  // over-relaxation factor, adapted as steps succeed/fail
  bool settled = false;
  for (; it < budget; ++it) {
    const double ll_start = ll;
    const QMat q_old = q;
    const Eigen::Matrix4cd rho_old = rho;

    // --- q half-step: EM update for the shared mixture components
    QMat accum = QMat::Zero(3, nb);
    for (int c = 0; c < nb; ++c) {
      for (int i = 0; i < 4; ++i) {
        if (refs[i].counts[c] == 0) continue;
        const double p = std::max(double(setup.a.row(i) * q.col(c)), 1e-300);
        for (int j = 0; j < 3; ++j)
          accum(j, c) += refs[i].counts[c] * setup.a(i, j) * q(j, c) / p;
      }
      for (int k = 0; k < 9; ++k) {
        if (data[k].counts[c] == 0) continue;
        const double p = std::max(double(b.row(k) * q.col(c)), 1e-300);
        for (int j = 0; j < 3; ++j) accum(j, c) += data[k].counts[c] * b(k, j) * q(j, c) / p;
      }
    }
    for (int j = 0; j < 3; ++j) {
      const double s = accum.row(j).sum();
      if (s > 0.0) q.row(j) = accum.row(j) / s;
    }
    double ll_q = loglik_rows(refs, data, setup.a, b, q);
    if (ll_q < ll - viol_tol) ++res.monotonicity_violations;
    ll = ll_q;

    // --- rho half-step: RpR with dilution fallback
    Eigen::Matrix4cd r_op = Eigen::Matrix4cd::Zero();
    for (int k = 0; k < 9; ++k)
      for (int c = 0; c < nb; ++c) {
        if (data[k].counts[c] == 0) continue;
        const double p = std::max(double(b.row(k) * q.col(c)), 1e-300);
        Eigen::Matrix4cd e_kc = Eigen::Matrix4cd::Zero();
        for (int j = 0; j < 3; ++j) e_kc += q(j, c) * povm.e[k][j];
        r_op += (data[k].counts[c] / p) * e_kc;
      }
    if (n_data > 0) {
      r_op /= static_cast<double>(n_data);
      Eigen::Matrix4cd cand = r_op * rho * r_op;
      cand = 0.5 * (cand + cand.adjoint().eval());
      double tr = std::real(cand.trace());
      bool accepted = false;
      if (tr > 0.0) {
        cand /= tr;
        const double ll_c = loglik_rows(refs, data, setup.a, b_from_povm(povm, cand), q);
        if (ll_c >= ll - 1e-12 * (1.0 + std::abs(ll))) {
          rho = cand;
          ll = ll_c;
          accepted = true;
        }
      }
      if (!accepted) {
        double eps = 0.5;
        for (int trial = 0; trial < 40 && !accepted; ++trial, eps *= 0.5) {
          Eigen::Matrix4cd g = Eigen::Matrix4cd::Identity() + eps * r_op;
          Eigen::Matrix4cd c2 = g * rho * g.adjoint();
          c2 = 0.5 * (c2 + c2.adjoint().eval());
          const double tr2 = std::real(c2.trace());
          if (tr2 <= 0.0) continue;
          c2 /= tr2;
          const double ll_c = loglik_rows(refs, data, setup.a, b_from_povm(povm, c2), q);
          if (ll_c >= ll) {
            rho = c2;
            ll = ll_c;
            accepted = true;
          }
        }
      }
      b = b_from_povm(povm, rho);
    }
    if (ll < ll_q - viol_tol) ++res.monotonicity_violations;

    // --- monotone-safeguarded over-relaxation: EM contracts slowly along the
    // q <-> rho trade-off direction, so try extrapolating the combined step
    {
      QMat q_ex = q_old + gamma * (q - q_old);
      bool feasible = true;
      for (int j = 0; j < 3 && feasible; ++j) {
        // floor, don't clip: an exact zero is absorbing under the
        // multiplicative EM update and would freeze that entry forever
        for (int c = 0; c < nb; ++c)
          q_ex(j, c) = std::max(q_ex(j, c), q(j, c) > 0.0 ? 1e-12 : 0.0);
        const double s = q_ex.row(j).sum();
        if (s <= 0.0)
          feasible = false;
        else
          q_ex.row(j) /= s;
      }
      if (feasible) {
        Eigen::Matrix4cd rho_ex = rho_old + gamma * (rho - rho_old);
        rho_ex = 0.5 * (rho_ex + rho_ex.adjoint().eval());
        // floor (not clip) the spectrum: RpR preserves rank, so a zeroed
        // eigenvalue could never recover and the iteration would get stuck
        // on a rank-deficient plateau
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(rho_ex);
        Eigen::Vector4d ev = es.eigenvalues().cwiseMax(1e-9);
        if (ev.sum() > 0.0) {
          rho_ex = es.eigenvectors() * (ev / ev.sum()).asDiagonal() *
                   es.eigenvectors().adjoint();
          const Eigen::Matrix<double, 9, 3> b_ex = b_from_povm(povm, rho_ex);
          const double ll_ex = loglik_rows(refs, data, setup.a, b_ex, q_ex);
          if (ll_ex > ll) {
            q = q_ex;
            rho = rho_ex;
            b = b_ex;
            ll = ll_ex;
            gamma = std::min(gamma * 1.5, 256.0);
          } else {
            gamma = std::max(gamma * 0.5, 2.0);
          }
        }
      }
    }

    if (ll - ll_start < opts.tol * (1.0 + std::abs(ll)))
      ++quiet;
    else
      quiet = 0;
    if (quiet >= 5) {
      settled = true;
      ++it;
      break;
    }
  }
  return {it, settled};
  };

  // The alternating scheme can settle on a saddle plateau well below the
  // maximum. After each tentative convergence, kick the iterate toward the
  // interior and re-climb; accept once a kick fails to improve.
  int it_total = 0;
  bool settled = false;
  QMat best_q = q;
  Eigen::Matrix4cd best_rho = rho;
  double best_ll = ll;
  for (int phase = 0; phase <= 2; ++phase) {
    if (phase > 0) {
      q = 0.98 * best_q + 0.02 * QMat::Constant(3, nb, 1.0 / nb);
      rho = 0.95 * best_rho + 0.05 * 0.25 * Eigen::Matrix4cd::Identity();
      b = b_from_povm(povm, rho);
      ll = loglik_rows(refs, data, setup.a, b, q);
    }
    auto [used, s] = run_em(opts.max_iter - it_total);
    it_total += used;
    settled = s;
    const bool improved = ll > best_ll + opts.tol * (1.0 + std::abs(best_ll));
    if (ll > best_ll) {
      best_q = q;
      best_rho = rho;
      best_ll = ll;
    }
    if (!settled) break;               // iteration cap reached
    if (phase > 0 && !improved) break;  // kick could not escape: converged
  }
  q = best_q;
  rho = best_rho;
  ll = best_ll;
  res.converged = settled;

  res.rho_hat = rho;
  res.q_hat.q = q;
  res.loglik = ll;
  res.iterations = it_total;
  Eigen::Vector4cd phi;
  phi << 1.0 / std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0);
  res.fidelity = std::clamp(std::real((phi.adjoint() * rho * phi)(0, 0)), 0.0, 1.0);
  return res;
}

// ---------------------------------------------------------------------------
// Bootstrap

namespace {

BinnedHistogram multinomial_resample(const Eigen::VectorXd& probs, long shots,
                                     const std::vector<int>& edges, Rng& rng) {
  BinnedHistogram h;
  h.edges = edges;
  const int nb = static_cast<int>(probs.size());
  h.counts.assign(nb, 0);
  h.shots = shots;
  long remaining = shots;
  double prem = probs.sum();
  for (int c = 0; c < nb && remaining > 0; ++c) {
    if (c == nb - 1) {
      h.counts[c] = remaining;
      break;
    }
    const double p = std::clamp(probs(c) / std::max(prem, 1e-300), 0.0, 1.0);
    const long n = std::binomial_distribution<long>(remaining, p)(rng.engine());
    h.counts[c] = n;
    remaining -= n;
    prem -= probs(c);
  }
  return h;
}

struct BootstrapDraw {
  std::array<BinnedHistogram, 4> refs;
  std::array<BinnedHistogram, 9> data;
};

BootstrapDraw resample_from_fit(const MLResult& fit, const TomographySetup& setup,
                                const std::array<BinnedHistogram, 4>& refs,
                                const std::array<BinnedHistogram, 9>& data, Rng& rng) {
  BootstrapDraw out;
  const auto& q = fit.q_hat.q;
  const Eigen::Matrix<double, 9, 3> b = setup.b_map(fit.rho_hat);
  for (int i = 0; i < 4; ++i) {
    const Eigen::VectorXd p = (setup.a.row(i) * q).transpose();
    out.refs[i] = multinomial_resample(p, refs[i].shots, refs[i].edges, rng);
  }
  for (int k = 0; k < 9; ++k) {
    const Eigen::VectorXd p = (b.row(k) * q).transpose();
    out.data[k] = multinomial_resample(p, data[k].shots, data[k].edges, rng);
  }
  return out;
}

MLOptions warm_start(const MLResult& fit, const MLOptions& opts) {
  MLOptions o = opts;
  o.init_rho = 0.9 * fit.rho_hat + 0.1 * 0.25 * Eigen::Matrix4cd::Identity();
  Eigen::Matrix<double, 3, Eigen::Dynamic> q = fit.q_hat.q;
  q = 0.9 * q + 0.1 * Eigen::Matrix<double, 3, Eigen::Dynamic>::Constant(3, q.cols(),
                                                                         1.0 / q.cols());
  o.init_q = q;
  return o;
}

double saturated_loglik(const std::array<BinnedHistogram, 4>& refs,
                        const std::array<BinnedHistogram, 9>& data) {
  KahanSum ll;
  auto add = [&](const BinnedHistogram& h) {
    for (long n : h.counts)
      if (n > 0) ll.add(n * std::log(static_cast<double>(n) / h.shots));
  };
  for (const auto& h : refs) add(h);
  for (const auto& h : data) add(h);
  return ll.sum;
}

}  // namespace

ConfidenceInterval bootstrap_ci(const MLResult& fit, const TomographySetup& setup,
                                const std::array<BinnedHistogram, 4>& refs,
                                const std::array<BinnedHistogram, 9>& data, int resamples,
                                std::uint64_t seed, const MLOptions& opts) {
  if (resamples < 100) throw std::invalid_argument("resamples must be >= 100");
  const MLOptions warm = warm_start(fit, opts);
  std::vector<double> fids;
  fids.reserve(resamples);
  int failures = 0;
  for (int r = 0; r < resamples; ++r) {
    Rng rng(seed, static_cast<std::uint64_t>(r));
    const BootstrapDraw d = resample_from_fit(fit, setup, refs, data, rng);
    try {
      const MLResult f = ml_fit(d.refs, d.data, setup, warm);
      if (std::isfinite(f.fidelity))
        fids.push_back(f.fidelity);
      else
        ++failures;
    } catch (const std::exception&) {
      ++failures;
    }
  }
  if (failures > resamples / 20) throw std::runtime_error("bootstrap: >5% of refits failed");
  std::sort(fids.begin(), fids.end());
  auto quantile = [&](double p) {
    const double x = p * (fids.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(x));
    const std::size_t hi = std::min(lo + 1, fids.size() - 1);
    return fids[lo] + (x - lo) * (fids[hi] - fids[lo]);
  };
  ConfidenceInterval ci;
  ci.lo = quantile(0.16);
  ci.hi = quantile(0.84);
  ci.failures = failures;
  return ci;
}

LRCheck lr_model_check(const MLResult& fit, const TomographySetup& setup,
                       const std::array<BinnedHistogram, 4>& refs,
                       const std::array<BinnedHistogram, 9>& data, int resamples,
                       std::uint64_t seed, const MLOptions& opts) {
  if (resamples < 100) throw std::invalid_argument("resamples must be >= 100");
  LRCheck out;
  out.lr_data = 2.0 * (saturated_loglik(refs, data) - fit.loglik);
  const MLOptions warm = warm_start(fit, opts);
  std::vector<double> lrs;
  lrs.reserve(resamples);
  int failures = 0;
  for (int r = 0; r < resamples; ++r) {
    Rng rng(seed, static_cast<std::uint64_t>(r));
    const BootstrapDraw d = resample_from_fit(fit, setup, refs, data, rng);
    try {
      const MLResult f = ml_fit(d.refs, d.data, setup, warm);
      lrs.push_back(2.0 * (saturated_loglik(d.refs, d.data) - f.loglik));
    } catch (const std::exception&) {
      ++failures;
    }
  }
  if (failures > resamples / 20) throw std::runtime_error("lr_model_check: >5% of refits failed");
  double mean = 0.0;
  for (double v : lrs) mean += v;
  mean /= lrs.size();
  double var = 0.0;
  for (double v : lrs) var += (v - mean) * (v - mean);
  var /= std::max<std::size_t>(lrs.size() - 1, 1);
  out.z = (out.lr_data - mean) / std::max(std::sqrt(var), 1e-300);
  long tail = 0;
  for (double v : lrs)
    if (v >= out.lr_data) ++tail;
  out.pvalue = static_cast<double>(tail + 1) / (lrs.size() + 1);
  return out;
}

// ---------------------------------------------------------------------------
// Sensitivity analyses and bounds

double sensitivity_reference_populations(double xi, const std::array<BinnedHistogram, 4>& refs,
                                         const std::array<BinnedHistogram, 9>& data,
                                         const TomographySetup& setup, const MLOptions& opts) {
  const double base = ml_fit(refs, data, setup, opts).fidelity;
  TomographySetup mod = setup;
  const double p = 0.5 + xi;  // per-ion bright population of the echo references
  for (int i : {2, 3}) {
    mod.a(i, 0) = p * p;
    mod.a(i, 1) = 2.0 * p * (1.0 - p);
    mod.a(i, 2) = (1.0 - p) * (1.0 - p);
  }
  return ml_fit(refs, data, mod, opts).fidelity - base;
}

double sensitivity_transfer_leakage(double transfer_error,
                                    const std::array<BinnedHistogram, 4>& refs,
                                    const std::array<BinnedHistogram, 9>& data,
                                    const TomographySetup& setup, const MLOptions& opts) {
  const double base = ml_fit(refs, data, setup, opts).fidelity;
  TomographySetup mod = setup;
  mod.transfer_error = transfer_error;
  return ml_fit(refs, data, mod, opts).fidelity - base;
}

double pumping_bound(double t_b, double l, double t_bar_b) {
  if (l <= t_bar_b) throw std::invalid_argument("pumping_bound: l must exceed t_bar_b");
  return std::clamp(t_b / (l - t_bar_b), 0.0, 1.0);
}

double bell_fidelity_lower_bound(double ml_fidelity, double epsilon) {
  return std::max(0.0, ml_fidelity - 2.0 * epsilon);
}

}  // namespace iongate
