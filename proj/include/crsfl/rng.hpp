#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace crsfl {

// Deterministic random stream. Streams are keyed by up to three 64-bit
// values (experiment seed, client id, round) so that every consumer owns an
// independent stream and results do not depend on scheduling order.
//
// The engine is std::mt19937_64 (bit-exact across platforms per the
// standard); variates are derived from raw 64-bit draws rather than
// std::*_distribution, whose output is implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key0, std::uint64_t key1 = 0,
                     std::uint64_t key2 = 0)
      : engine_(mix(mix(mix(0x9e3779b97f4a7c15ull ^ key0) ^ key1) ^ key2)) {}

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform on (0, 1]; never returns zero.
  double uniform_pos() { return 1.0 - uniform(); }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform_pos();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Laplace(0, scale) by inverse CDF.
  double laplace(double scale) {
    double t = uniform() - 0.5;
    return t >= 0 ? -scale * std::log1p(-2.0 * t)
                  : scale * std::log1p(2.0 * t);
  }

  // Gamma(alpha, 1), Marsaglia-Tsang; alpha > 0.
  double gamma(double alpha) {
    if (alpha < 1.0) {
      return gamma(alpha + 1.0) * std::pow(uniform_pos(), 1.0 / alpha);
    }
    double d = alpha - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0) continue;
      v = v * v * v;
      double u = uniform_pos();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
        return d * v;
      }
    }
  }

  // Integer in [0, n); n > 0. Unbiased via rejection.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

  std::uint64_t raw() { return engine_(); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace crsfl
