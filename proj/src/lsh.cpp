#include "emap/lsh.hpp"

#include <bit>
#include <cmath>

#include "emap/rng.hpp"

namespace emap {

HyperplaneSet::HyperplaneSet(std::uint32_t dim, std::uint32_t bits,
                             std::uint64_t seed)
    : dim_(dim), bits_(bits), seed_(seed) {
  require(dim >= 2, "HyperplaneSet: dim must be >= 2");
  require(bits >= 1, "HyperplaneSet: bits must be >= 1");
  rows_.resize(static_cast<std::size_t>(dim) * bits);
  Rng rng(seed);
  for (double& v : rows_) v = rng.normal();
}

HyperplaneSet generate_hyperplanes(std::uint32_t dim, std::uint32_t bits,
                                   std::uint64_t seed) {
  return HyperplaneSet(dim, bits, seed);
}

namespace {

template <typename T>
Signature sign_hash_impl(std::span<const T> vec, const HyperplaneSet& planes) {
  if (vec.size() != planes.dim())
    throw internal_error("sign_hash: vector dimension " +
                         std::to_string(vec.size()) + " != hyperplane dim " +
                         std::to_string(planes.dim()));
  bool all_zero = true;
  for (T v : vec) {
    if (v != T(0)) {
      all_zero = false;
      break;
    }
  }
  if (all_zero) throw data_error("sign_hash: zero vector has no direction");

  Signature sig(planes.bits());
  for (std::uint32_t i = 0; i < planes.bits(); ++i) {
    const auto row = planes.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j)
      dot += row[j] * static_cast<double>(vec[j]);
    if (dot >= 0.0) sig.set(i, true);
  }
  return sig;
}

}  // namespace

Signature sign_hash(std::span<const double> vec, const HyperplaneSet& planes) {
  return sign_hash_impl(vec, planes);
}

Signature sign_hash(std::span<const float> vec, const HyperplaneSet& planes) {
  return sign_hash_impl(vec, planes);
}

std::uint32_t hamming(const Signature& a, const Signature& b) {
  if (a.length() != b.length())
    throw internal_error("hamming: signature lengths differ");
  const auto wa = a.words();
  const auto wb = b.words();
  std::uint32_t m = 0;
  for (std::size_t i = 0; i < wa.size(); ++i)
    m += static_cast<std::uint32_t>(std::popcount(wa[i] ^ wb[i]));
  return m;
}

double similarity_estimate(std::uint32_t m, std::uint32_t l) {
  require(l >= 1, "similarity_estimate: l must be >= 1");
  if (m > l)
    throw internal_error("similarity_estimate: m exceeds signature length");
  const double pi = 3.14159265358979323846;
  return std::exp(std::cos(static_cast<double>(m) * pi / static_cast<double>(l)));
}

}  // namespace emap
