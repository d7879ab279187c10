#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "emap/embedding.hpp"
#include "emap/index.hpp"
#include "emap/sampling.hpp"
#include "support/statref.hpp"

#include <nlohmann/json.hpp>

using namespace emap;

namespace {

// index over hand-set subcollection vectors (keep_exact on)
ApproxIndex toy_index(const std::vector<std::vector<double>>& sub_vectors,
                      std::uint32_t bits = 128, std::uint64_t seed = 5) {
  ApproxIndex idx;
  idx.dim = static_cast<std::uint32_t>(sub_vectors[0].size());
  idx.bits = bits;
  idx.hyperplane_seed = seed;
  idx.planes = generate_hyperplanes(idx.dim, bits, seed);
  for (const auto& v : sub_vectors) {
    idx.sub_signatures.push_back(sign_hash(std::span<const double>(v), idx.planes));
    idx.exact_sub_vectors.push_back(v);
  }
  return idx;
}

QueryVector unit_query(std::vector<double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  for (double& x : v) x /= std::sqrt(sq);
  QueryVector q;
  q.values = std::move(v);
  q.term_count = 1;
  return q;
}

}  // namespace

TEST_CASE("subcollection probabilities: equidistant signatures give uniform") {
  // identical sub vectors -> identical signatures -> equal Hamming distance
  const std::vector<std::vector<double>> subs(4, {0.3, 0.4, 0.5});
  const auto idx = toy_index(subs);
  const auto q = unit_query({1.0, 0.0, 0.0});
  const auto phi = subcollection_probabilities(q, idx);
  for (double p : phi) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("two-score softmax matches hand arithmetic") {
  // e^1 and e^0 -> (0.7311, 0.2689)
  const double a = std::exp(1.0), b = std::exp(0.0);
  const double expect_a = a / (a + b);
  // aligned and orthogonal subcollections against the query direction give
  // hashed scores near e^1 and e^0; assert the exact-mode arithmetic instead
  const std::vector<std::vector<double>> subs{{1.0, 0.0}, {0.0, 1.0}};
  const auto idx = toy_index(subs, 4096, 9);
  const auto q = unit_query({1.0, 0.0});
  const auto phi = subcollection_probabilities(q, idx, ScoreMode::exact);
  CHECK(phi[0] == doctest::Approx(expect_a).epsilon(1e-9));
  CHECK(phi[1] == doctest::Approx(1.0 - expect_a).epsilon(1e-9));
  CHECK(expect_a == doctest::Approx(0.7311).epsilon(1e-4));

  // hashed mode approaches the same with many bits
  const auto phi_hashed = subcollection_probabilities(q, idx, ScoreMode::hashed);
  CHECK(phi_hashed[0] == doctest::Approx(expect_a).epsilon(0.05));
}

TEST_CASE("closer signatures get larger probabilities") {
  const std::vector<std::vector<double>> subs{
      {1.0, 0.05, 0.0}, {0.7, 0.7, 0.1}, {-0.2, 1.0, 0.3}, {-1.0, -0.1, 0.0}};
  const auto idx = toy_index(subs, 512, 13);
  const auto q = unit_query({1.0, 0.0, 0.0});
  const Signature qsig = idx.hash_query(q.span());
  const auto phi = subcollection_probabilities(q, idx);
  for (std::size_t a = 0; a < subs.size(); ++a) {
    for (std::size_t b = 0; b < subs.size(); ++b) {
      const auto ma = hamming(qsig, idx.sub_signatures[a]);
      const auto mb = hamming(qsig, idx.sub_signatures[b]);
      if (ma < mb) CHECK(phi[a] > phi[b]);
    }
  }
  // normalization invariant
  double sum = 0.0;
  for (double p : phi) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("exact mode requires stored vectors") {
  const std::vector<std::vector<double>> subs{{1.0, 0.0}, {0.0, 1.0}};
  auto idx = toy_index(subs);
  idx.exact_sub_vectors.clear();
  const auto q = unit_query({1.0, 0.0});
  CHECK_THROWS_AS(subcollection_probabilities(q, idx, ScoreMode::exact),
                  data_error);
  CHECK_NOTHROW(subcollection_probabilities(q, idx, ScoreMode::hashed));
}

TEST_CASE("document probabilities") {
  TrainingConfig cfg;
  cfg.dim = 2;
  SUBCASE("single document gets probability 1") {
    EmbeddingModel m(cfg, 0, 1, 0);
    m.doc_vector_mut(0)[0] = 1.0f;
    const auto phi = document_probabilities(unit_query({0.3, 0.7}), m);
    REQUIRE(phi.size() == 1);
    CHECK(phi[0] == doctest::Approx(1.0));
  }
  SUBCASE("identical documents share probability uniformly") {
    EmbeddingModel m(cfg, 0, 5, 0);
    for (DocId d = 0; d < 5; ++d) m.doc_vector_mut(d)[1] = 1.0f;
    const auto phi = document_probabilities(unit_query({0.3, 0.7}), m);
    double sum = 0.0;
    for (double p : phi) {
      CHECK(p == doctest::Approx(0.2).epsilon(1e-12));
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("draws_for_rate") {
  CHECK(draws_for_rate(0.1, 128) == 13);
  CHECK(draws_for_rate(0.025, 128) == 3);
  CHECK(draws_for_rate(1.0, 64) == 64);
  CHECK(draws_for_rate(0.001, 64) == 1);  // floored at one draw
  CHECK_THROWS_AS(draws_for_rate(0.0, 64), data_error);
  CHECK_THROWS_AS(draws_for_rate(1.5, 64), data_error);
}

TEST_CASE("pps_sample basics") {
  SUBCASE("single subcollection is always drawn") {
    const auto plan = pps_sample({1.0}, 10, 3);
    for (SubId s : plan.sampled_ids) CHECK(s == 0);
  }
  SUBCASE("fixed seed replays; different seed differs") {
    const std::vector<double> phi{0.25, 0.25, 0.25, 0.25};
    const auto a = pps_sample(phi, 50, 7);
    const auto b = pps_sample(phi, 50, 7);
    const auto c = pps_sample(phi, 50, 8);
    CHECK(a.sampled_ids == b.sampled_ids);
    CHECK(a.sampled_ids != c.sampled_ids);
  }
  SUBCASE("law of large numbers at phi = (0.9, 0.1)") {
    const auto plan = pps_sample({0.9, 0.1}, 100000, 21);
    const double freq0 =
        static_cast<double>(std::count(plan.sampled_ids.begin(),
                                       plan.sampled_ids.end(), 0u)) /
        100000.0;
    CHECK(freq0 == doctest::Approx(0.9).epsilon(0.011));
  }
  SUBCASE("degenerate distributions are rejected") {
    CHECK_THROWS_AS(pps_sample({0.5, 0.4}, 5, 1), data_error);  // sums to 0.9
    CHECK_THROWS_AS(pps_sample({std::nan(""), 1.0}, 5, 1), data_error);
    CHECK_THROWS_AS(pps_sample({}, 5, 1), data_error);
  }
}

TEST_CASE("srcs_sample is uniform with the srcs tag") {
  const auto plan = srcs_sample(10, 100000, 5);
  CHECK(plan.method == SamplingMethod::srcs);
  for (double p : plan.probabilities) CHECK(p == doctest::Approx(0.1));
  std::vector<double> freq(10, 0.0);
  for (SubId s : plan.sampled_ids) freq[s] += 1.0 / 100000.0;
  for (double f : freq) CHECK(f == doctest::Approx(0.1).epsilon(0.11));
  // tighter absolute bound from the spec example
  for (double f : freq) CHECK(std::fabs(f - 0.1) <= 0.01);
}

TEST_CASE("empirical draw frequencies pass a chi-square test") {
  // 10^5 draws over a skewed 32-entry distribution, significance 0.01
  std::vector<double> phi(32);
  double total = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    phi[i] = 1.0 / static_cast<double>(1 + i);
    total += phi[i];
  }
  for (double& p : phi) p /= total;

  const int draws = 100000;
  const auto plan = pps_sample(phi, draws, 99);
  std::vector<double> observed(32, 0.0);
  for (SubId s : plan.sampled_ids) observed[s] += 1.0;

  double chi2 = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double expected = phi[i] * draws;
    chi2 += (observed[i] - expected) * (observed[i] - expected) / expected;
  }
  const double critical = statref::chi2_critical_by_integration(31, 0.01);
  CHECK(chi2 < critical);
}

TEST_CASE("distinct sampling") {
  const std::vector<double> phi{0.4, 0.3, 0.2, 0.1};
  SUBCASE("draws are distinct and sorted") {
    const auto plan = pps_sample_distinct(phi, 3, 17);
    CHECK(plan.sampled_ids.size() == 3);
    std::set<SubId> unique(plan.sampled_ids.begin(), plan.sampled_ids.end());
    CHECK(unique.size() == 3);
    CHECK(!plan.with_replacement);
  }
  SUBCASE("full rate covers everything") {
    const auto plan = pps_sample_distinct(phi, 4, 17);
    CHECK(plan.sampled_ids == std::vector<SubId>{0, 1, 2, 3});
  }
  SUBCASE("cannot ask for more than the population") {
    CHECK_THROWS_AS(pps_sample_distinct(phi, 5, 17), data_error);
  }
  SUBCASE("srcs variant covers everything at full rate") {
    const auto plan = srcs_sample_distinct(4, 4, 1);
    CHECK(plan.sampled_ids == std::vector<SubId>{0, 1, 2, 3});
  }
}

TEST_CASE("plan serializes to audit JSON") {
  const auto plan = pps_sample({0.5, 0.5}, 4, 11);
  const auto j = nlohmann::json::parse(plan.to_json());
  CHECK(j["method"] == "pps");
  CHECK(j["n"] == 4);
  CHECK(j["seed"] == 11);
  CHECK(j["sampled_ids"].size() == 4);
  CHECK(j["phi_summary"]["count"] == 2);
  CHECK(std::fabs(j["phi_summary"]["entropy"].get<double>() - std::log(2.0)) <
        1e-9);
}
