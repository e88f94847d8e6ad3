#pragma once

// Seeded randomness for reproducible runs. Draws are hand-rolled on top of
// mt19937_64 because the std <random> distributions are implementation
// defined; identical seeds must give identical streams across toolchains.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace edukd {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Combine a base seed with a stream index into an independent seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller with a cached spare.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Marsaglia-Tsang; shape boosting for shape < 1.
  double gamma(double shape, double scl) {
    if (shape <= 0.0 || scl <= 0.0) throw std::invalid_argument("Rng::gamma: nonpositive parameter");
    if (shape < 1.0) {
      double u = 0.0;
      do {
        u = uniform();
      } while (u <= 0.0);
      return gamma(shape + 1.0, scl) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = 0.0, v = 0.0;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scl;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scl;
    }
  }

  // Knuth multiplication, chunked so exp(-mean) stays representable.
  long long poisson(double mean) {
    if (mean < 0.0) throw std::invalid_argument("Rng::poisson: negative mean");
    long long total = 0;
    while (mean > 500.0) {
      total += poisson_chunk(500.0);
      mean -= 500.0;
    }
    return total + poisson_chunk(mean);
  }

  // Negative binomial via the gamma-Poisson mixture; `dispersion` is the
  // gamma shape, variance = mean + mean^2 / dispersion.
  long long neg_binomial(double mean, double dispersion) {
    if (mean <= 0.0) return 0;
    double lambda = gamma(dispersion, mean / dispersion);
    return poisson(lambda);
  }

  std::size_t pick(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::pick: empty range");
    // rejection to avoid modulo bias
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = 0;
    do {
      v = engine_();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
  }

  // Draw an index from unnormalized nonnegative weights.
  std::size_t categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) throw std::invalid_argument("Rng::categorical: weights sum to zero");
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[pick(i)]);
  }

 private:
  long long poisson_chunk(double mean) {
    double limit = std::exp(-mean);
    long long k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace edukd
