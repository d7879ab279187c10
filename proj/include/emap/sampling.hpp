#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emap/embedding.hpp"
#include "emap/index.hpp"

namespace emap {

enum class SamplingMethod : std::uint8_t { pps = 0, srcs = 1 };

const char* method_name(SamplingMethod m);

struct SamplingPlan {
  SamplingMethod method = SamplingMethod::pps;
  double rate = 0.0;               // requested fraction of subcollections
  std::uint32_t draws = 0;         // n
  std::vector<double> probabilities;  // phi, one per subcollection
  std::vector<SubId> sampled_ids;  // multiset of n ids
  std::uint64_t seed = 0;
  bool with_replacement = true;

  std::string to_json() const;
};

struct Estimate {
  double value = 0.0;        // tau-hat
  double error_bound = 0.0;  // epsilon
  double confidence = 0.95;
  std::uint32_t draws = 0;
  SamplingMethod method = SamplingMethod::pps;
  bool has_interval = false;  // false when n = 1
};

enum class ScoreMode : std::uint8_t { hashed = 0, exact = 1 };

// Softmax over per-subcollection similarity scores. Hashed mode scores
// exp(cos(m_s*pi/bits)) from signature Hamming distances; exact mode scores
// exp(q . s) against the stored real-valued subcollection vectors and
// requires an index built with keep_exact.
std::vector<double> subcollection_probabilities(const QueryVector& query,
                                                const ApproxIndex& index,
                                                ScoreMode mode = ScoreMode::hashed);

// Softmax of exp(q . d) over every document vector.
std::vector<double> document_probabilities(const QueryVector& query,
                                           const EmbeddingModel& model);

// n = max(1, round(rate * total)).
std::uint32_t draws_for_rate(double rate, std::size_t total);

// n independent draws from phi (with replacement), the Hansen-Hurwitz
// design used by the aggregation estimator.
SamplingPlan pps_sample(const std::vector<double>& phi, std::uint32_t n,
                        std::uint64_t seed);

// n distinct subcollections by successive draws without replacement.
// Retrieval-style executors use this so a 100% rate reads every
// subcollection exactly once.
SamplingPlan pps_sample_distinct(const std::vector<double>& phi, std::uint32_t n,
                                 std::uint64_t seed);

// Uniform baselines mirroring the two pps designs.
SamplingPlan srcs_sample(std::size_t total, std::uint32_t n, std::uint64_t seed);
SamplingPlan srcs_sample_distinct(std::size_t total, std::uint32_t n,
                                  std::uint64_t seed);

}  // namespace emap
