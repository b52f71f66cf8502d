#pragma once

// Deterministic random streams. Everything stochastic in this library is
// keyed by an explicit (seed, stream) pair; replaying the same pair yields
// the same draws bit for bit on any platform. std:: distributions are
// deliberately avoided because their output is implementation-defined.

#include <cstdint>
#include <cmath>
#include <stdexcept>

namespace aoifl {

struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix2(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL);
  return splitmix64(x);
}

inline std::uint64_t rotl(std::uint64_t v, int k) {
  return (v << k) | (v >> (64 - k));
}

}  // namespace detail

// Derive an independent child seed; used to give each (policy, seed, round,
// client, ...) coordinate its own stream so outcomes do not depend on how
// many draws unrelated code consumed.
inline RngSeed derive(RngSeed s, std::uint64_t a, std::uint64_t b = 0) {
  return RngSeed{detail::mix2(s.seed, a * 2 + 1), detail::mix2(s.stream, b * 2 + 1)};
}

// xoshiro256++ seeded through splitmix64.
class Rng {
 public:
  explicit Rng(RngSeed s) {
    std::uint64_t x = s.seed;
    std::uint64_t y = detail::mix2(s.stream, 0x6a09e667f3bcc909ULL);
    bool all_zero = true;
    for (auto& w : state_) {
      w = detail::splitmix64(x) ^ detail::splitmix64(y);
      all_zero = all_zero && w == 0;
    }
    if (all_zero) state_[0] = 0x9e3779b97f4a7c15ULL;  // xoshiro state must be nonzero
  }

  std::uint64_t u64() {
    const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
    const std::uint64_t threshold = (-bound) % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t r = u64();
      if (r >= threshold) return r % bound;
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Marsaglia polar; one spare is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // Gamma(shape, 1). Marsaglia-Tsang for shape >= 1, boost trick below 1.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("Rng::gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u > 0.0 ? u : 0x1.0p-53, 1.0 / shape);
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
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

 private:
  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace aoifl
