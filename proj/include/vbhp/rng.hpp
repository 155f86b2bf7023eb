#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace vbhp {

/// SplitMix64: the n-th output is a fixed bijective mix of seed + n * golden_gamma,
/// so a stream is fully determined by (seed, counter) on every platform.
/// Distributions are derived here by inversion rather than through <random>
/// distribution objects, whose algorithms differ between standard libraries.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : counter_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    counter_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = counter_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open_left() { return 1.0 - uniform(); }

  double exponential(double rate) { return -std::log(uniform_open_left()) / rate; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t counter_;
};

}  // namespace vbhp
