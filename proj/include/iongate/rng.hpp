#ifndef IONGATE_RNG_HPP
#define IONGATE_RNG_HPP

#include <cstdint>
#include <cmath>
#include <random>

namespace iongate {

// Deterministic seed derivation: master seed + stream index -> independent stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  Rng(std::uint64_t master, std::uint64_t stream) : eng_(derive_seed(master, stream)) {}

  double uniform() { return unif_(eng_); }
  double normal(double mean, double sigma) {
    return mean + sigma * std::normal_distribution<double>(0.0, 1.0)(eng_);
  }
  // Thermal (Bose-Einstein) occupation: geometric with mean nbar.
  int thermal_n(double nbar) {
    if (nbar <= 0.0) return 0;
    const double r = nbar / (1.0 + nbar);
    double u = uniform();
    // P(n) = (1-r) r^n; invert CDF
    int n = static_cast<int>(std::floor(std::log1p(-u) / std::log(r)));
    return n < 0 ? 0 : n;
  }
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<int>(mean)(eng_);
  }
  double exponential(double rate) {
    if (rate <= 0.0) return 1e300;
    return std::exponential_distribution<double>(rate)(eng_);
  }
  // index in [0, n)
  int uniform_int(int n) { return std::uniform_int_distribution<int>(0, n - 1)(eng_); }

  std::mt19937_64& engine() { return eng_; }

private:
  std::mt19937_64 eng_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

// Compensated (Kahan) accumulator; keeps aggregation order-insensitive at ~1e-16.
struct KahanSum {
  double sum = 0.0;
  double c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

}  // namespace iongate

#endif
