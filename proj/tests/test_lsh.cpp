#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "emap/lsh.hpp"
#include "emap/rng.hpp"
#include "support/statref.hpp"

using namespace emap;

namespace {

std::vector<double> random_unit_vector(Rng& rng, std::uint32_t dim) {
  std::vector<double> v(dim);
  double sq = 0.0;
  for (double& x : v) {
    x = rng.normal();
    sq += x * x;
  }
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
  return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot;
}

}  // namespace

TEST_CASE("generate_hyperplanes is seeded and shaped") {
  const auto a = generate_hyperplanes(100, 100, 42);
  const auto b = generate_hyperplanes(100, 100, 42);
  const auto c = generate_hyperplanes(100, 100, 43);
  CHECK(a.dim() == 100);
  CHECK(a.bits() == 100);
  bool same = true, diff = false;
  for (std::uint32_t i = 0; i < 100; ++i) {
    for (std::uint32_t j = 0; j < 100; ++j) {
      same = same && a.row(i)[j] == b.row(i)[j];
      diff = diff || a.row(i)[j] != c.row(i)[j];
    }
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("sign_hash bit rule") {
  // one hyperplane in 2-D, fixed by hand through a seeded search is fragile;
  // instead check the rule with direct dot-product comparison
  const auto planes = generate_hyperplanes(2, 16, 7);
  const std::vector<double> x{1.0, 0.0};
  const std::vector<double> neg_x{-1.0, 0.0};
  const auto sig_x = sign_hash(std::span<const double>(x), planes);
  const auto sig_neg = sign_hash(std::span<const double>(neg_x), planes);
  for (std::uint32_t i = 0; i < planes.bits(); ++i) {
    const double dot = planes.row(i)[0];  // r . (1,0)
    CHECK(sig_x.get(i) == (dot >= 0.0));
    // antipodal vector flips every bit except exact zeros (r.x == 0 maps to 1
    // on both sides of the boundary rule)
    if (dot != 0.0) CHECK(sig_neg.get(i) == (dot < 0.0));
  }
}

TEST_CASE("sign_hash boundary maps to 1") {
  // orthogonal vector: every dot is exactly 0 only for a zero row, so build
  // the boundary case directly through a vector orthogonal to one row
  const auto planes = generate_hyperplanes(2, 1, 11);
  const double r0 = planes.row(0)[0], r1 = planes.row(0)[1];
  const std::vector<double> orth{-r1, r0};  // r . orth == 0
  const auto sig = sign_hash(std::span<const double>(orth), planes);
  CHECK(sig.get(0));
}

TEST_CASE("sign_hash rejects bad input") {
  const auto planes = generate_hyperplanes(4, 8, 1);
  const std::vector<double> zero(4, 0.0);
  CHECK_THROWS_AS(sign_hash(std::span<const double>(zero), planes), data_error);
  const std::vector<double> wrong(3, 1.0);
  CHECK_THROWS_AS(sign_hash(std::span<const double>(wrong), planes),
                  internal_error);
}

TEST_CASE("scale invariance for positive scalings") {
  Rng rng(21);
  const auto planes = generate_hyperplanes(16, 64, 3);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto v = random_unit_vector(rng, 16);
    const double c = std::exp(rng.normal() * 2.0);  // positive scale
    std::vector<double> scaled(v);
    for (double& x : scaled) x *= c;
    CHECK(sign_hash(std::span<const double>(v), planes) ==
          sign_hash(std::span<const double>(scaled), planes));
  }
}

TEST_CASE("hamming distance") {
  Signature a(4), b(4);
  CHECK(hamming(a, b) == 0);
  // a=1010, b=0101 (bit 0 is leftmost here)
  a.set(0, true);
  a.set(2, true);
  b.set(1, true);
  b.set(3, true);
  CHECK(hamming(a, b) == 4);
  CHECK(hamming(a, a) == 0);
  CHECK(hamming(b, a) == 4);  // symmetric

  Signature full(8), empty(8);
  for (std::uint32_t i = 0; i < 8; ++i) full.set(i, true);
  CHECK(hamming(full, empty) == 8);  // complement pair

  Signature longer(9);
  CHECK_THROWS_AS(hamming(a, longer), internal_error);
}

TEST_CASE("similarity_estimate endpoints and monotonicity") {
  CHECK(similarity_estimate(0, 100) == doctest::Approx(std::exp(1.0)));
  CHECK(similarity_estimate(50, 100) == doctest::Approx(1.0));
  CHECK(similarity_estimate(100, 100) == doctest::Approx(std::exp(-1.0)));
  for (std::uint32_t m = 1; m <= 100; ++m)
    CHECK(similarity_estimate(m, 100) < similarity_estimate(m - 1, 100));
  CHECK_THROWS_AS(similarity_estimate(101, 100), internal_error);
}

TEST_CASE("hamming distance concentrates around the angle") {
  // E[m/l] = angle/pi; with l bits the estimator cos(m*pi/l) deviates from
  // the true cosine by O(1/sqrt(l))
  Rng rng(1234);
  const std::uint32_t dim = 24;

  for (std::uint32_t l : {100u, 1024u}) {
    const auto planes = generate_hyperplanes(dim, l, 77);
    double abs_err_sum = 0.0;
    std::vector<double> hamming_fracs, angles;
    const int pairs = 1000;
    for (int i = 0; i < pairs; ++i) {
      const auto x = random_unit_vector(rng, dim);
      const auto y = random_unit_vector(rng, dim);
      const auto sx = sign_hash(std::span<const double>(x), planes);
      const auto sy = sign_hash(std::span<const double>(y), planes);
      const double m = hamming(sx, sy);
      const double est_cos = std::cos(m * 3.14159265358979 / l);
      abs_err_sum += std::fabs(est_cos - cosine(x, y));
      hamming_fracs.push_back(m / l);
      angles.push_back(std::acos(std::clamp(cosine(x, y), -1.0, 1.0)));
    }
    const double mean_abs_err = abs_err_sum / pairs;
    const double bound = 3.0 * (3.14159265 / 2.0) * std::sqrt(0.25 / l);
    CHECK(mean_abs_err <= bound);
    // monotone agreement: hamming fraction tracks the angle
    CHECK(statref::spearman(hamming_fracs, angles) > 0.5);
  }
}
