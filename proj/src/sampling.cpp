#include "emap/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "emap/rng.hpp"

namespace emap {

const char* method_name(SamplingMethod m) {
  return m == SamplingMethod::pps ? "pps" : "srcs";
}

std::string SamplingPlan::to_json() const {
  nlohmann::json j;
  j["method"] = method_name(method);
  j["rate"] = rate;
  j["n"] = draws;
  j["seed"] = seed;
  j["with_replacement"] = with_replacement;
  j["sampled_ids"] = sampled_ids;
  double min_phi = 1.0, max_phi = 0.0, entropy = 0.0;
  for (double p : probabilities) {
    min_phi = std::min(min_phi, p);
    max_phi = std::max(max_phi, p);
    if (p > 0.0) entropy -= p * std::log(p);
  }
  j["phi_summary"] = {{"count", probabilities.size()},
                      {"min", min_phi},
                      {"max", max_phi},
                      {"entropy", entropy}};
  return j.dump();
}

namespace {

std::vector<double> softmax(std::vector<double> scores) {
  require(!scores.empty(), "softmax over empty score list");
  // scores here are already exp(.) values in a bounded range; normalize
  const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
  require(total > 0.0 && std::isfinite(total), "degenerate similarity scores");
  for (double& s : scores) s /= total;
  return scores;
}

void check_phi(const std::vector<double>& phi) {
  if (phi.empty()) throw data_error("empty probability vector");
  double sum = 0.0;
  for (double p : phi) {
    if (!std::isfinite(p) || p < 0.0)
      throw data_error("invalid sampling probability");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw data_error("sampling probabilities sum to " + std::to_string(sum) +
                     ", expected 1");
}

}  // namespace

std::vector<double> subcollection_probabilities(const QueryVector& query,
                                                const ApproxIndex& index,
                                                ScoreMode mode) {
  if (index.sub_count() == 0) throw data_error("index has no subcollections");
  std::vector<double> scores(index.sub_count());
  if (mode == ScoreMode::hashed) {
    const Signature qsig = index.hash_query(query.span());
    for (std::size_t s = 0; s < index.sub_count(); ++s) {
      const std::uint32_t m = hamming(qsig, index.sub_signatures[s]);
      scores[s] = similarity_estimate(m, index.bits);
    }
  } else {
    if (!index.has_exact())
      throw data_error("exact scoring requires an index built with keep_exact");
    for (std::size_t s = 0; s < index.sub_count(); ++s) {
      const auto& sv = index.exact_sub_vectors[s];
      double dot = 0.0;
      for (std::size_t i = 0; i < sv.size(); ++i) dot += query.values[i] * sv[i];
      scores[s] = std::exp(dot);
    }
  }
  return softmax(std::move(scores));
}

std::vector<double> document_probabilities(const QueryVector& query,
                                           const EmbeddingModel& model) {
  if (model.doc_count() == 0) throw data_error("model has no documents");
  std::vector<double> scores(model.doc_count());
  for (DocId d = 0; d < model.doc_count(); ++d) {
    const auto dv = model.doc_vector(d);
    double dot = 0.0;
    for (std::size_t i = 0; i < dv.size(); ++i) dot += query.values[i] * dv[i];
    scores[d] = std::exp(dot);
  }
  return softmax(std::move(scores));
}

std::uint32_t draws_for_rate(double rate, std::size_t total) {
  if (!(rate > 0.0) || rate > 1.0)
    throw data_error("sampling rate must be in (0, 1]");
  const auto n = static_cast<std::uint32_t>(
      std::llround(rate * static_cast<double>(total)));
  return std::max<std::uint32_t>(1, n);
}

SamplingPlan pps_sample(const std::vector<double>& phi, std::uint32_t n,
                        std::uint64_t seed) {
  check_phi(phi);
  if (n < 1) throw data_error("sample size must be >= 1");
  SamplingPlan plan;
  plan.method = SamplingMethod::pps;
  plan.draws = n;
  plan.probabilities = phi;
  plan.seed = seed;
  plan.with_replacement = true;
  plan.rate = static_cast<double>(n) / static_cast<double>(phi.size());

  const AliasTable table(phi);
  Rng rng(seed);
  plan.sampled_ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i)
    plan.sampled_ids.push_back(static_cast<SubId>(table.sample(rng)));
  return plan;
}

SamplingPlan pps_sample_distinct(const std::vector<double>& phi, std::uint32_t n,
                                 std::uint64_t seed) {
  check_phi(phi);
  if (n < 1) throw data_error("sample size must be >= 1");
  if (n > phi.size())
    throw data_error("cannot draw " + std::to_string(n) +
                     " distinct subcollections from " +
                     std::to_string(phi.size()));
  SamplingPlan plan;
  plan.method = SamplingMethod::pps;
  plan.draws = n;
  plan.probabilities = phi;
  plan.seed = seed;
  plan.with_replacement = false;
  plan.rate = static_cast<double>(n) / static_cast<double>(phi.size());

  Rng rng(seed);
  std::vector<double> weight = phi;
  double remaining = 1.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    double target = rng.uniform() * remaining;
    std::size_t pick = weight.size();
    for (std::size_t s = 0; s < weight.size(); ++s) {
      if (weight[s] <= 0.0) continue;
      target -= weight[s];
      if (target <= 0.0) {
        pick = s;
        break;
      }
    }
    if (pick == weight.size()) {
      // numerical tail: take the last positive entry
      for (std::size_t s = weight.size(); s-- > 0;) {
        if (weight[s] > 0.0) {
          pick = s;
          break;
        }
      }
    }
    require(pick < weight.size(), "pps_sample_distinct: no candidate left");
    plan.sampled_ids.push_back(static_cast<SubId>(pick));
    remaining -= weight[pick];
    weight[pick] = 0.0;
    if (remaining <= 0.0 && i + 1 < n) {
      // all residual mass exhausted (can happen with zero-probability
      // entries); fall back to taking lowest-indexed unsampled entries
      for (std::size_t s = 0; s < weight.size() && plan.sampled_ids.size() < n;
           ++s) {
        if (std::find(plan.sampled_ids.begin(), plan.sampled_ids.end(),
                      static_cast<SubId>(s)) == plan.sampled_ids.end())
          plan.sampled_ids.push_back(static_cast<SubId>(s));
      }
      break;
    }
  }
  std::sort(plan.sampled_ids.begin(), plan.sampled_ids.end());
  return plan;
}

SamplingPlan srcs_sample(std::size_t total, std::uint32_t n, std::uint64_t seed) {
  if (total == 0) throw data_error("cannot sample from an empty index");
  std::vector<double> uniform(total, 1.0 / static_cast<double>(total));
  SamplingPlan plan = pps_sample(uniform, n, seed);
  plan.method = SamplingMethod::srcs;
  return plan;
}

SamplingPlan srcs_sample_distinct(std::size_t total, std::uint32_t n,
                                  std::uint64_t seed) {
  if (total == 0) throw data_error("cannot sample from an empty index");
  std::vector<double> uniform(total, 1.0 / static_cast<double>(total));
  SamplingPlan plan = pps_sample_distinct(uniform, n, seed);
  plan.method = SamplingMethod::srcs;
  return plan;
}

}  // namespace emap
