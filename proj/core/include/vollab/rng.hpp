#pragma once
// Deterministic random number generation.
//
// The whole pipeline promises bit-exact reruns for a fixed seed, so we do not
// use std::mt19937 + <random> distributions: the standard pins the engine but
// not the distribution algorithms, which differ across library versions.
// Instead we hand-roll a xoshiro256++ engine seeded through splitmix64 and
// implement the few samplers we need (uniform, Box-Muller normal, log-uniform,
// Fisher-Yates shuffle) with a fixed algorithm.
//
// Substreams: Rng(seed, stream) produces statistically independent streams
// for different `stream` labels, which keys per-asset, per-epoch, and
// per-trial randomness without sharing state.

#include <cstdint>
#include <cmath>
#include <vector>

namespace vollab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    // Mix seed and stream through splitmix64 to fill the xoshiro state.
    // Streams with different labels land in unrelated regions of state space.
    std::uint64_t sm = seed ^ (0xA3C59AC2ULL + 0x9E3779B97F4A7C15ULL * stream);
    for (auto& word : s_) word = splitmix64(sm);
  }

  // Core engine: xoshiro256++ (Blackman & Vigna).
  std::uint64_t u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Log-uniform on [lo, hi], lo > 0: the hyperparameter-search sampler.
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  // Standard normal via Box-Muller; the antithetic pair member is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    // u1 in (0, 1]: guards the log.
    double u1 = 1.0 - unit();
    double u2 = unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Unbiased integer in [0, n) by rejection on the top of the range.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = u64();
    } while (x >= limit);
    return x % n;
  }

  // Fisher-Yates; the canonical shuffle for batch orders.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace vollab
