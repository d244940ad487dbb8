#include "iongate/rb.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace iongate {

namespace {

Mat2 axis_rotation(RBAxis axis, double angle) {
  switch (axis) {
    case RBAxis::X:
      return pauli_rotation({angle, 0.0});
    case RBAxis::Y:
      return pauli_rotation({angle, kPi / 2});
    case RBAxis::Z: {
      Mat2 u = Mat2::Zero();
      u(0, 0) = std::exp(cplx(0.0, -angle / 2));
      u(1, 1) = std::exp(cplx(0.0, +angle / 2));
      return u;
    }
    case RBAxis::None:
      break;
  }
  return Mat2::Identity();
}

Mat2 step_unitary(const RBStep& s) {
  const Mat2 p = axis_rotation(s.pauli, kPi);
  const Mat2 c = axis_rotation(s.clifford, s.clifford_sign * kPi / 2);
  return c * p;
}

Mat2 recovery_unitary(const std::vector<RBPulse>& recovery) {
  Mat2 u = Mat2::Identity();
  for (const RBPulse& r : recovery) u = axis_rotation(r.axis, r.quarter_turns * kPi / 2) * u;
  return u;
}

// Physical pi/2 pulse with fractional Rabi error, followed by the
// depolarizing floor (average gate error eps -> Bloch contraction 1 - 2 eps).
void apply_pulse(Mat2& rho, RBAxis axis, int sign, double rabi_frac, const RBNoise& noise) {
  const Mat2 u = axis_rotation(axis, sign * (kPi / 2) * (1.0 + rabi_frac));
  rho = u * rho * u.adjoint();
  const double q = 2.0 * noise.depolarizing_per_pulse;
  rho = (1.0 - q) * rho + q * 0.5 * Mat2::Identity();
}

void apply_wait(Mat2& rho, double duration, const RBNoise& noise) {
  if (noise.coherence_time <= 0.0) return;
  const double damp = std::exp(-duration / noise.coherence_time);
  rho(0, 1) *= damp;
  rho(1, 0) *= damp;
}

}  // namespace

std::vector<RBSequence> generate_sequences(const std::vector<int>& lengths, int per_length,
                                           std::uint64_t seed) {
  if (lengths.empty()) throw std::invalid_argument("generate_sequences: no lengths");
  if (per_length < 1) throw std::invalid_argument("generate_sequences: per_length < 1");
  const RBAxis axes[4] = {RBAxis::None, RBAxis::X, RBAxis::Y, RBAxis::Z};
  std::vector<RBSequence> out;
  out.reserve(lengths.size() * per_length);
  std::uint64_t idx = 0;
  for (int l : lengths) {
    if (l < 0) throw std::invalid_argument("generate_sequences: negative length");
    for (int r = 0; r < per_length; ++r, ++idx) {
      RBSequence seq;
      seq.length = l;
      seq.seed = derive_seed(seed, idx);
      Rng rng(seq.seed);
      seq.steps.reserve(l);
      Mat2 u = Mat2::Identity();
      for (int i = 0; i < l; ++i) {
        RBStep s;
        s.pauli = axes[rng.uniform_int(4)];
        s.clifford = axes[rng.uniform_int(4)];
        s.clifford_sign = (s.clifford == RBAxis::None || rng.uniform() < 0.5) ? +1 : -1;
        seq.steps.push_back(s);
        u = step_unitary(s) * u;
      }
      // Recovery: the ideal state is a Pauli eigenstate; pick the shortest
      // rotation taking it back to the z axis.
      const Eigen::Vector2cd psi = u.col(0);
      const std::vector<std::vector<RBPulse>> candidates = {
          {}, {{RBAxis::Y, +1}}, {{RBAxis::Y, -1}}, {{RBAxis::X, +1}}, {{RBAxis::X, -1}}};
      bool found = false;
      for (const auto& cand : candidates) {
        const Eigen::Vector2cd out_psi = recovery_unitary(cand) * psi;
        for (int t = 0; t < 2; ++t) {
          if (std::norm(out_psi(t)) > 1.0 - 1e-9) {
            seq.recovery = cand;
            seq.target = t;
            found = true;
            break;
          }
        }
        if (found) break;
      }
      if (!found) throw std::logic_error("generate_sequences: no recovery found");
      out.push_back(std::move(seq));
    }
  }
  return out;
}

Mat2 sequence_unitary(const RBSequence& seq) {
  Mat2 u = Mat2::Identity();
  for (const RBStep& s : seq.steps) u = step_unitary(s) * u;
  return recovery_unitary(seq.recovery) * u;
}

double simulate_sequence(const RBSequence& seq, const RBNoise& noise, double spam, Rng& rng) {
  const double rabi_frac = rng.normal(0.0, noise.rabi_frac_rms);  // quasi-static
  Mat2 rho = Mat2::Zero();
  rho(0, 0) = 1.0;
  for (const RBStep& s : seq.steps) {
    switch (s.pauli) {
      case RBAxis::X:
      case RBAxis::Y:
        apply_pulse(rho, s.pauli, +1, rabi_frac, noise);
        apply_pulse(rho, s.pauli, +1, rabi_frac, noise);
        break;
      case RBAxis::Z: {
        const Mat2 u = axis_rotation(RBAxis::Z, kPi);  // frame update, noiseless
        rho = u * rho * u.adjoint();
        break;
      }
      case RBAxis::None:
        apply_wait(rho, 2.0 * noise.pulse_time, noise);
        break;
    }
    switch (s.clifford) {
      case RBAxis::X:
      case RBAxis::Y:
        apply_pulse(rho, s.clifford, s.clifford_sign, rabi_frac, noise);
        break;
      case RBAxis::Z: {
        const Mat2 u = axis_rotation(RBAxis::Z, s.clifford_sign * kPi / 2);
        rho = u * rho * u.adjoint();
        break;
      }
      case RBAxis::None:
        apply_wait(rho, noise.pulse_time, noise);
        break;
    }
  }
  for (const RBPulse& r : seq.recovery) {
    if (r.axis == RBAxis::Z || r.axis == RBAxis::None) {
      const Mat2 u = axis_rotation(r.axis, r.quarter_turns * kPi / 2);
      rho = u * rho * u.adjoint();
      continue;
    }
    const int sign = r.quarter_turns >= 0 ? +1 : -1;
    for (int n = 0; n < std::abs(r.quarter_turns); ++n)
      apply_pulse(rho, r.axis, sign, rabi_frac, noise);
  }
  const double s = std::real(rho(seq.target, seq.target));
  return (1.0 - spam) * s + spam * (1.0 - s);
}

std::vector<double> simulate_rb(const std::vector<RBSequence>& seqs, const RBNoise& noise,
                                double spam, std::uint64_t seed) {
  if (noise.depolarizing_per_pulse < 0.0 || noise.rabi_frac_rms < 0.0 || spam < 0.0)
    throw std::invalid_argument("simulate_rb: negative noise parameter");
  std::vector<double> out(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    Rng rng(seed, i);
    out[i] = simulate_sequence(seqs[i], noise, spam, rng);
  }
  return out;
}

namespace {

struct LinearFit {
  double A = 0.0, B = 0.0, sse = 0.0;
};

// For fixed p the model is linear in A; B is pinned at the randomized-
// measurement asymptote 1/2 (over sequence lengths with only a few percent of
// total decay a free asymptote is not identifiable and trades off against p).
LinearFit solve_a(double p, const std::vector<int>& ls, const std::vector<double>& ys,
                  const std::vector<double>& ws) {
  LinearFit f;
  f.B = 0.5;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const double x = std::pow(p, ls[i]);
    sxx += ws[i] * x * x;
    sxy += ws[i] * x * (ys[i] - f.B);
  }
  f.A = sxx > 1e-300 ? std::clamp(sxy / sxx, 0.0, 1.0) : 0.0;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const double r = ys[i] - (f.A * std::pow(p, ls[i]) + f.B);
    f.sse += ws[i] * r * r;
  }
  return f;
}

}  // namespace

RBFit fit_rb_points(const std::vector<int>& lengths, const std::vector<double>& means,
                    const std::vector<double>& sems) {
  if (lengths.size() < 3 || lengths.size() != means.size() || lengths.size() != sems.size())
    throw std::invalid_argument("fit_rb_points: need >= 3 (length, mean, sem) points");
  for (std::size_t i = 1; i < lengths.size(); ++i)
    if (lengths[i] <= lengths[i - 1])
      throw std::invalid_argument("fit_rb_points: lengths must be strictly increasing");
  std::vector<double> ws(sems.size());
  for (std::size_t i = 0; i < sems.size(); ++i) {
    const double s = std::max(sems[i], 1e-6);
    ws[i] = 1.0 / (s * s);
  }
  // Coarse scan over p, then ternary refinement of the weighted SSE.
  double best_p = 1.0, best_sse = solve_a(1.0, lengths, means, ws).sse;
  const int n_scan = 4000;
  for (int i = 0; i < n_scan; ++i) {
    const double p = 0.5 + 0.5 * i / n_scan;
    const double sse = solve_a(p, lengths, means, ws).sse;
    if (sse < best_sse) {
      best_sse = sse;
      best_p = p;
    }
  }
  double lo = std::max(0.5, best_p - 0.5 / n_scan), hi = std::min(1.0, best_p + 0.5 / n_scan);
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (solve_a(m1, lengths, means, ws).sse < solve_a(m2, lengths, means, ws).sse)
      hi = m2;
    else
      lo = m1;
  }
  double p = 0.5 * (lo + hi);
  if (solve_a(1.0, lengths, means, ws).sse <= best_sse + 1e-18) p = 1.0;  // no decay
  const LinearFit ab = solve_a(p, lengths, means, ws);

  RBFit fit;
  fit.lengths = lengths;
  fit.mean_fidelity = means;
  fit.sem = sems;
  fit.p = p;
  fit.A = ab.A;
  fit.B = ab.B;
  fit.epg = (1.0 - p) / 2.0;
  fit.spam = 1.0 - (ab.A + ab.B);
  fit.residuals.resize(lengths.size());
  for (std::size_t i = 0; i < lengths.size(); ++i)
    fit.residuals[i] = means[i] - (ab.A * std::pow(p, lengths[i]) + ab.B);
  // Gauss-Newton covariance in (p, A); B is fixed so its row/column is zero.
  Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const double l = lengths[i];
    Eigen::Vector2d j;
    j << ab.A * l * (l > 0 ? std::pow(p, l - 1) : 0.0), std::pow(p, l);
    jtj += ws[i] * j * j.transpose();
  }
  fit.cov.setZero();
  if (std::abs(jtj.determinant()) > 1e-300) {
    fit.cov.topLeftCorner<2, 2>() = jtj.inverse();
    fit.epg_err = 0.5 * std::sqrt(std::max(0.0, fit.cov(0, 0)));
    fit.spam_err = std::sqrt(std::max(0.0, fit.cov(1, 1)));
    fit.converged = p > 0.5 + 1e-9;
  } else {
    fit.converged = false;
  }
  return fit;
}

RBFit fit_rb(const std::vector<RBSequence>& seqs, const std::vector<double>& survivals) {
  if (seqs.size() != survivals.size())
    throw std::invalid_argument("fit_rb: size mismatch");
  std::map<int, std::vector<double>> by_len;
  for (std::size_t i = 0; i < seqs.size(); ++i) by_len[seqs[i].length].push_back(survivals[i]);
  std::vector<int> lengths;
  std::vector<double> means, sems;
  for (const auto& [l, v] : by_len) {
    double m = 0.0;
    for (double y : v) m += y;
    m /= v.size();
    double var = 0.0;
    for (double y : v) var += (y - m) * (y - m);
    var = v.size() > 1 ? var / (v.size() - 1) : 0.0;
    lengths.push_back(l);
    means.push_back(m);
    sems.push_back(std::sqrt(var / v.size()));
  }
  return fit_rb_points(lengths, means, sems);
}

}  // namespace iongate
