#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "emap/common.hpp"

namespace emap {

// Packed bit signature of fixed length. Bit order is LSB-first within each
// 64-bit word.
class Signature {
public:
  Signature() = default;
  explicit Signature(std::uint32_t bits)
      : bits_(bits), words_((bits + 63) / 64, 0) {}

  std::uint32_t length() const { return bits_; }

  bool get(std::uint32_t i) const {
    require(i < bits_, "Signature::get: bit index out of range");
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }
  void set(std::uint32_t i, bool v) {
    require(i < bits_, "Signature::set: bit index out of range");
    const std::uint64_t mask = 1ull << (i & 63);
    if (v)
      words_[i >> 6] |= mask;
    else
      words_[i >> 6] &= ~mask;
  }

  std::span<const std::uint64_t> words() const { return words_; }
  std::span<std::uint64_t> words() { return words_; }

  bool operator==(const Signature& other) const = default;

private:
  std::uint32_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

// One fixed seeded set of Gaussian hyperplanes shared by every hash in an
// index, so word and subcollection signatures live in the same code space.
class HyperplaneSet {
public:
  HyperplaneSet() = default;
  HyperplaneSet(std::uint32_t dim, std::uint32_t bits, std::uint64_t seed);

  std::uint32_t dim() const { return dim_; }
  std::uint32_t bits() const { return bits_; }
  std::uint64_t seed() const { return seed_; }

  std::span<const double> row(std::uint32_t i) const {
    return {rows_.data() + static_cast<std::size_t>(i) * dim_, dim_};
  }

private:
  std::uint32_t dim_ = 0;
  std::uint32_t bits_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> rows_;  // bits x dim, row-major
};

HyperplaneSet generate_hyperplanes(std::uint32_t dim, std::uint32_t bits,
                                   std::uint64_t seed);

// bit i = 1 iff r_i . x >= 0. Scale-invariant for positive scalings of x;
// the zero vector is rejected (its angle is undefined).
Signature sign_hash(std::span<const double> vec, const HyperplaneSet& planes);
Signature sign_hash(std::span<const float> vec, const HyperplaneSet& planes);

// Number of differing bits, via XOR + popcount.
std::uint32_t hamming(const Signature& a, const Signature& b);

// exp(cos(m*pi/l)): the similarity score reconstructed from a Hamming
// distance m between two l-bit signatures.
double similarity_estimate(std::uint32_t m, std::uint32_t l);

}  // namespace emap
