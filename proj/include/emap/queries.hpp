#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "emap/corpus.hpp"
#include "emap/embedding.hpp"
#include "emap/index.hpp"
#include "emap/sampling.hpp"

namespace emap {

// ---------------------------------------------------------------------------
// Boolean expressions: terms connected by AND / OR, AND binds tighter,
// parentheses allowed.
// ---------------------------------------------------------------------------

struct BooleanExpr {
  enum class Kind : std::uint8_t { term, and_op, or_op };
  Kind kind = Kind::term;
  std::string word;   // term only
  WordId word_id = 0; // term only
  std::unique_ptr<BooleanExpr> left, right;

  static BooleanExpr make_term(std::string word, WordId id);
  static BooleanExpr make_and(BooleanExpr l, BooleanExpr r);
  static BooleanExpr make_or(BooleanExpr l, BooleanExpr r);

  BooleanExpr clone() const;
  bool structurally_equal(const BooleanExpr& other) const;

  // All term word ids, left to right.
  std::vector<WordId> term_ids() const;
};

// Parses "w1 AND (w2 OR w3)". Operator keywords are case-insensitive; terms
// are run through the corpus tokenizer, so the words "and" / "or" cannot be
// query terms. Unknown words raise data_error.
BooleanExpr parse_boolean_query(const std::string& text, const Vocabulary& vocab);

// Minimal-parentheses rendering; parse(print(e)) reproduces e.
std::string print_boolean_query(const BooleanExpr& expr, const Vocabulary& vocab);

// Recursive score: term -> term_score(word_id); AND -> product; OR -> sum.
// The result is an unnormalized relevance, not a probability.
double boolean_similarity(const BooleanExpr& expr,
                          const std::function<double(WordId)>& term_score);

// Does a document (as a token set) satisfy the expression?
bool boolean_matches(const BooleanExpr& expr, const std::set<WordId>& doc_words);

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

// Contiguous occurrences of the phrase across the member documents,
// overlapping matches included.
std::uint64_t count_in_subcollection(std::span<const WordId> phrase,
                                     const LoadedSubcollection& sub);
std::uint64_t count_in_document(std::span<const WordId> phrase,
                                std::span<const WordId> tokens);

// Hansen-Hurwitz estimate over the plan's drawn multiset. tau_of(s) supplies
// the per-subcollection total for each drawn id; phi comes from the plan.
// n = 1 yields a point estimate flagged has_interval = false.
Estimate estimate_total(const SamplingPlan& plan,
                        const std::function<double(SubId)>& tau_of,
                        double confidence = 0.95);

// Counts the phrase in the sampled subcollections only (each distinct
// subcollection is read once) and applies estimate_total.
Estimate estimate_phrase_count(std::span<const WordId> phrase,
                               const SamplingPlan& plan,
                               const CorpusReader& corpus,
                               double confidence = 0.95);

// ---------------------------------------------------------------------------
// Retrieval
// ---------------------------------------------------------------------------

struct BooleanRetrievalResult {
  std::vector<DocId> doc_ids;  // sorted
  SamplingPlan plan;
};

// Samples round(rate*N) distinct subcollections with probabilities derived
// from boolean_similarity, then returns exactly the matching documents
// inside them.
BooleanRetrievalResult boolean_retrieve(const BooleanExpr& expr,
                                        const ApproxIndex& index,
                                        const CorpusReader& corpus, double rate,
                                        std::uint64_t seed,
                                        SamplingMethod method = SamplingMethod::pps);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct RankedResult {
  std::vector<std::pair<DocId, double>> entries;  // descending score
  bool truncated_early = false;  // fewer candidates than k
  SamplingPlan plan;
};

// Okapi BM25 over the sampled document set; document frequency, document
// count and average length all come from the sample. Ties break on doc_id.
RankedResult ranked_retrieve(std::span<const WordId> terms,
                             const ApproxIndex& index, const CorpusReader& corpus,
                             const EmbeddingModel& model, double rate,
                             std::uint32_t k, std::uint64_t seed,
                             SamplingMethod method = SamplingMethod::pps,
                             const Bm25Params& params = {},
                             ScoreMode mode = ScoreMode::hashed);

// BM25 idf: ln(1 + (N - df + 0.5) / (df + 0.5)).
double bm25_idf(std::uint64_t doc_count, std::uint64_t doc_freq);

// ---------------------------------------------------------------------------
// Recommendation
// ---------------------------------------------------------------------------

struct RatingRecord {
  DocId user_doc = 0;    // the user's document id
  std::string item_id;
  float rating = 0.0f;   // within [1, 5]
};

class RatingsTable {
public:
  static RatingsTable load(const std::filesystem::path& path);
  static RatingsTable from_records(std::vector<RatingRecord> records);

  const std::vector<RatingRecord>& records() const { return records_; }

  // (user_doc, rating) pairs for an item; empty when the item is unknown.
  const std::vector<std::pair<DocId, float>>& raters_of(const std::string& item) const;
  // (item, rating) pairs for a user.
  const std::vector<std::pair<std::string, float>>& items_of(DocId user) const;
  bool user_rated(DocId user, const std::string& item) const;

  std::vector<std::string> all_items() const;  // sorted

private:
  std::vector<RatingRecord> records_;
  std::unordered_map<std::string, std::vector<std::pair<DocId, float>>> by_item_;
  std::unordered_map<DocId, std::vector<std::pair<std::string, float>>> by_user_;
};

struct RatingPrediction {
  double value = 0.0;
  std::uint32_t neighbors = 0;  // |U'|
  bool predictable = false;     // false when no sampled neighbor rated the item
};

// Similarity-weighted average over the users in the plan's subcollections
// who rated the item (u excluded): weights softmax(exp(u . v)) over that set.
RatingPrediction predict_rating(DocId user, const std::string& item,
                                const SamplingPlan& plan, const ApproxIndex& index,
                                const RatingsTable& ratings,
                                const EmbeddingModel& model);

// Predicted ratings for every item some sampled neighbor rated and the user
// did not, sorted by prediction (ties on item id), truncated to k.
std::vector<std::pair<std::string, double>> recommend_topk(
    DocId user, const SamplingPlan& plan, const ApproxIndex& index,
    const RatingsTable& ratings, const EmbeddingModel& model, std::uint32_t k);

// Plan whose probabilities follow the similarity of this user's vector to
// each subcollection (distinct draws; srcs gives the uniform baseline).
SamplingPlan user_neighbor_plan(DocId user, const ApproxIndex& index,
                                const EmbeddingModel& model, double rate,
                                std::uint64_t seed,
                                SamplingMethod method = SamplingMethod::pps,
                                ScoreMode mode = ScoreMode::hashed);

}  // namespace emap
