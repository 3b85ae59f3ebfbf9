#pragma once

// Self-contained deterministic random number generation. The standard
// <random> distributions have implementation-defined sampling sequences,
// which would break bit-reproducibility of experiment outputs across
// toolchains, so all distribution sampling is implemented here.

#include <cmath>
#include <cstdint>
#include <limits>

namespace smp {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable seed for sub-stream `id` of a base seed (per meter, per sweep
// point, per trial...). Streams derived from distinct ids are independent
// for all practical purposes.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t id) {
  std::uint64_t s = base ^ (0x9e3779b97f4a7c15ULL * (id + 1));
  return splitmix64(s);
}

// xoshiro256++ with splitmix64 seeding.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n).
  int next_int(int n) { return int(next_u64() % std::uint64_t(n)); }

  bool bernoulli(double p) { return next_double() < p; }

  // Standard normal, Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double exponential(double scale) {
    // -log of (0,1]; next_double() is in [0,1) so 1-u is in (0,1].
    return -scale * std::log(1.0 - next_double());
  }

  double laplace(double scale) {
    double u;
    do {
      u = next_double() - 0.5;
    } while (u <= -0.5 + 1e-300);
    const double a = 1.0 - 2.0 * std::fabs(u);
    return (u < 0 ? scale : -scale) * std::log(a);
  }

  // Gamma(shape, scale), Marsaglia-Tsang squeeze with the shape<1 boost.
  double gamma(double shape, double scale) {
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0, scale);
      double u;
      do {
        u = next_double();
      } while (u == 0.0);
      return g * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = next_double();
      if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return scale * d * v;
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace smp
