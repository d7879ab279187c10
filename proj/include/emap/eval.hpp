#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emap/corpus.hpp"
#include "emap/embedding.hpp"
#include "emap/index.hpp"
#include "emap/queries.hpp"

namespace emap {

enum class QueryFamily : std::uint8_t { count = 0, boolean = 1, ranked = 2, recommend = 3 };

const char* family_name(QueryFamily f);
QueryFamily parse_family(const std::string& name);

// Per-query evaluation row. Fields a family does not produce stay empty.
struct MetricRecord {
  std::string query_id;
  QueryFamily family = QueryFamily::count;
  SamplingMethod method = SamplingMethod::pps;
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> tau_hat;
  std::optional<double> epsilon;
  std::optional<double> tau;
  std::optional<double> est_rel_err;
  std::optional<double> act_rel_err;
  std::optional<double> recall;
  std::optional<double> p_at_k;
  std::optional<double> mse;
  std::optional<std::uint64_t> bytes_read;
  std::optional<double> wall_ms;
};

std::string metric_csv_header();
std::string metric_csv_row(const MetricRecord& rec);

// Phrases are contiguous token windows lifted from random documents, so
// every phrase occurs at least once. Lengths follow round(N(2,1)) floored
// at 1.
std::vector<std::vector<WordId>> gen_phrase_queries(const CorpusReader& corpus,
                                                    std::uint32_t count,
                                                    std::uint64_t seed);

// Word sets of size round(N(3,1)) floored at 1, drawn from the vocabulary
// in proportion to frequency, chained with uniformly random AND/OR.
std::vector<BooleanExpr> gen_boolean_queries(const Vocabulary& vocab,
                                             std::uint32_t count,
                                             std::uint64_t seed);

// Family-specific comparison of an approximate result against the precise
// one, filling the applicable metric fields.
MetricRecord compute_metrics(const Estimate& approx, double precise_tau);
MetricRecord compute_metrics(const std::vector<DocId>& approx_docs,
                             const std::vector<DocId>& precise_docs);
MetricRecord compute_metrics(const std::vector<std::pair<DocId, double>>& approx_topk,
                             const std::vector<std::pair<DocId, double>>& precise_topk);

struct ComparisonConfig {
  QueryFamily family = QueryFamily::count;
  std::vector<double> rates{0.1};
  std::vector<SamplingMethod> methods{SamplingMethod::pps, SamplingMethod::srcs};
  std::vector<std::uint64_t> seeds{1};
  std::uint32_t query_count = 100;
  std::uint64_t query_seed = 42;
  std::uint32_t top_k = 10;          // ranked / recommend
  double confidence = 0.95;          // count
  // recommend only
  std::uint32_t test_users = 0;      // 0 = all users present in the test file
  std::filesystem::path test_ratings_path;
};

struct ComparisonSummary {
  std::filesystem::path csv_path;
  std::filesystem::path summary_path;
  std::vector<std::filesystem::path> cdf_paths;
  std::uint64_t rows = 0;
};

// Runs every (query, rate, method, seed) combination, computing the precise
// answer once per query at full rate, and writes per-query rows, aggregate
// summaries, and CDF point files under out_prefix.
ComparisonSummary run_comparison(const CorpusReader& corpus,
                                 const EmbeddingModel& model,
                                 const ApproxIndex& index,
                                 const ComparisonConfig& config,
                                 const std::filesystem::path& out_prefix);

}  // namespace emap
