#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "emap/common.hpp"

namespace emap {

// Seeded generator with hand-written distributions. mt19937_64 output is
// pinned by the standard, and deriving uniforms/normals from raw bits here
// keeps artifacts byte-identical across standard library implementations
// (std::*_distribution algorithms are unspecified).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 significand bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    require(n > 0, "Rng::uniform_index: empty range");
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller, one cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    has_spare_ = true;
    return mag * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Walker alias table for O(1) draws from a fixed discrete distribution.
class AliasTable {
public:
  explicit AliasTable(const std::vector<double>& weights);

  std::size_t sample(Rng& rng) const;
  std::size_t size() const { return prob_.size(); }

private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

}  // namespace emap
