#include "emap/queries.hpp"

#include <algorithm>
#include <cmath>

#include "emap/io.hpp"
#include "emap/stats.hpp"

namespace emap {

// --------------------------------------------------------------------------
// Boolean expressions
// --------------------------------------------------------------------------

BooleanExpr BooleanExpr::make_term(std::string word, WordId id) {
  BooleanExpr e;
  e.kind = Kind::term;
  e.word = std::move(word);
  e.word_id = id;
  return e;
}

BooleanExpr BooleanExpr::make_and(BooleanExpr l, BooleanExpr r) {
  BooleanExpr e;
  e.kind = Kind::and_op;
  e.left = std::make_unique<BooleanExpr>(std::move(l));
  e.right = std::make_unique<BooleanExpr>(std::move(r));
  return e;
}

BooleanExpr BooleanExpr::make_or(BooleanExpr l, BooleanExpr r) {
  BooleanExpr e;
  e.kind = Kind::or_op;
  e.left = std::make_unique<BooleanExpr>(std::move(l));
  e.right = std::make_unique<BooleanExpr>(std::move(r));
  return e;
}

BooleanExpr BooleanExpr::clone() const {
  BooleanExpr e;
  e.kind = kind;
  e.word = word;
  e.word_id = word_id;
  if (left) e.left = std::make_unique<BooleanExpr>(left->clone());
  if (right) e.right = std::make_unique<BooleanExpr>(right->clone());
  return e;
}

bool BooleanExpr::structurally_equal(const BooleanExpr& other) const {
  if (kind != other.kind) return false;
  if (kind == Kind::term) return word_id == other.word_id && word == other.word;
  return left->structurally_equal(*other.left) &&
         right->structurally_equal(*other.right);
}

std::vector<WordId> BooleanExpr::term_ids() const {
  std::vector<WordId> out;
  const std::function<void(const BooleanExpr&)> walk = [&](const BooleanExpr& e) {
    if (e.kind == Kind::term) {
      out.push_back(e.word_id);
      return;
    }
    walk(*e.left);
    walk(*e.right);
  };
  walk(*this);
  return out;
}

namespace {

struct BoolToken {
  enum class Type { word, and_kw, or_kw, lparen, rparen, end } type;
  std::string text;
};

std::vector<BoolToken> lex_boolean(const std::string& text) {
  std::vector<BoolToken> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '(') {
      out.push_back({BoolToken::Type::lparen, "("});
      ++i;
    } else if (c == ')') {
      out.push_back({BoolToken::Type::rparen, ")"});
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() && text[j] != '(' && text[j] != ')' &&
             !std::isspace(static_cast<unsigned char>(text[j])))
        ++j;
      std::string raw = text.substr(i, j - i);
      const auto toks = tokenize(raw);
      if (toks.empty())
        throw data_error("cannot tokenize query fragment '" + raw + "'");
      for (const auto& t : toks) {
        if (t == "and")
          out.push_back({BoolToken::Type::and_kw, t});
        else if (t == "or")
          out.push_back({BoolToken::Type::or_kw, t});
        else
          out.push_back({BoolToken::Type::word, t});
      }
      i = j;
    }
  }
  out.push_back({BoolToken::Type::end, ""});
  return out;
}

class BoolParser {
public:
  BoolParser(std::vector<BoolToken> tokens, const Vocabulary& vocab)
      : tokens_(std::move(tokens)), vocab_(vocab) {}

  BooleanExpr parse() {
    BooleanExpr e = parse_or();
    if (peek().type != BoolToken::Type::end)
      throw data_error("trailing input in Boolean query near '" + peek().text + "'");
    return e;
  }

private:
  const BoolToken& peek() const { return tokens_[pos_]; }
  const BoolToken& take() { return tokens_[pos_++]; }

  BooleanExpr parse_or() {
    BooleanExpr lhs = parse_and();
    while (peek().type == BoolToken::Type::or_kw) {
      take();
      lhs = BooleanExpr::make_or(std::move(lhs), parse_and());
    }
    return lhs;
  }

  BooleanExpr parse_and() {
    BooleanExpr lhs = parse_atom();
    while (peek().type == BoolToken::Type::and_kw) {
      take();
      lhs = BooleanExpr::make_and(std::move(lhs), parse_atom());
    }
    return lhs;
  }

  BooleanExpr parse_atom() {
    const BoolToken& t = take();
    if (t.type == BoolToken::Type::lparen) {
      BooleanExpr e = parse_or();
      if (take().type != BoolToken::Type::rparen)
        throw data_error("missing ')' in Boolean query");
      return e;
    }
    if (t.type == BoolToken::Type::word)
      return BooleanExpr::make_term(t.text, vocab_.require_id(t.text));
    throw data_error("expected a term in Boolean query, got '" + t.text + "'");
  }

  std::vector<BoolToken> tokens_;
  const Vocabulary& vocab_;
  std::size_t pos_ = 0;
};

}  // namespace

BooleanExpr parse_boolean_query(const std::string& text, const Vocabulary& vocab) {
  return BoolParser(lex_boolean(text), vocab).parse();
}

std::string print_boolean_query(const BooleanExpr& expr, const Vocabulary& vocab) {
  switch (expr.kind) {
    case BooleanExpr::Kind::term:
      return vocab.word(expr.word_id);
    case BooleanExpr::Kind::and_op: {
      // parenthesize OR children: AND binds tighter
      auto side = [&](const BooleanExpr& e) {
        const std::string s = print_boolean_query(e, vocab);
        return e.kind == BooleanExpr::Kind::or_op ? "(" + s + ")" : s;
      };
      return side(*expr.left) + " AND " + side(*expr.right);
    }
    case BooleanExpr::Kind::or_op:
      return print_boolean_query(*expr.left, vocab) + " OR " +
             print_boolean_query(*expr.right, vocab);
  }
  throw internal_error("unknown Boolean expression kind");
}

double boolean_similarity(const BooleanExpr& expr,
                          const std::function<double(WordId)>& term_score) {
  switch (expr.kind) {
    case BooleanExpr::Kind::term:
      return term_score(expr.word_id);
    case BooleanExpr::Kind::and_op:
      return boolean_similarity(*expr.left, term_score) *
             boolean_similarity(*expr.right, term_score);
    case BooleanExpr::Kind::or_op:
      return boolean_similarity(*expr.left, term_score) +
             boolean_similarity(*expr.right, term_score);
  }
  throw internal_error("unknown Boolean expression kind");
}

bool boolean_matches(const BooleanExpr& expr, const std::set<WordId>& doc_words) {
  switch (expr.kind) {
    case BooleanExpr::Kind::term:
      return doc_words.count(expr.word_id) > 0;
    case BooleanExpr::Kind::and_op:
      return boolean_matches(*expr.left, doc_words) &&
             boolean_matches(*expr.right, doc_words);
    case BooleanExpr::Kind::or_op:
      return boolean_matches(*expr.left, doc_words) ||
             boolean_matches(*expr.right, doc_words);
  }
  throw internal_error("unknown Boolean expression kind");
}

// --------------------------------------------------------------------------
// Aggregation
// --------------------------------------------------------------------------

std::uint64_t count_in_document(std::span<const WordId> phrase,
                                std::span<const WordId> tokens) {
  require(!phrase.empty(), "empty phrase");
  if (tokens.size() < phrase.size()) return 0;
  std::uint64_t count = 0;
  const std::size_t last = tokens.size() - phrase.size();
  for (std::size_t i = 0; i <= last; ++i) {
    bool match = true;
    for (std::size_t j = 0; j < phrase.size(); ++j) {
      if (tokens[i + j] != phrase[j]) {
        match = false;
        break;
      }
    }
    if (match) ++count;  // overlapping matches count
  }
  return count;
}

std::uint64_t count_in_subcollection(std::span<const WordId> phrase,
                                     const LoadedSubcollection& sub) {
  std::uint64_t total = 0;
  for (const Document& d : sub.documents)
    total += count_in_document(phrase, d.tokens);
  return total;
}

Estimate estimate_total(const SamplingPlan& plan,
                        const std::function<double(SubId)>& tau_of,
                        double confidence) {
  require(!plan.sampled_ids.empty(), "plan has no draws");
  require(plan.with_replacement,
          "the Hansen-Hurwitz estimator needs a with-replacement plan");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw data_error("confidence must be in (0, 1)");

  const std::uint32_t n = static_cast<std::uint32_t>(plan.sampled_ids.size());
  std::vector<double> ratios;
  ratios.reserve(n);
  for (SubId s : plan.sampled_ids) {
    require(s < plan.probabilities.size(), "sampled id outside plan");
    const double phi = plan.probabilities[s];
    require(phi > 0.0, "drew a zero-probability subcollection");
    ratios.push_back(tau_of(s) / phi);
  }
  double mean = 0.0;
  for (double r : ratios) mean += r;
  mean /= static_cast<double>(n);

  Estimate est;
  est.value = mean;
  est.confidence = confidence;
  est.draws = n;
  est.method = plan.method;
  if (n < 2) {
    est.has_interval = false;
    est.error_bound = 0.0;
    return est;
  }
  double ssq = 0.0;
  for (double r : ratios) ssq += (r - mean) * (r - mean);
  const double var_hat = ssq / (static_cast<double>(n) * (n - 1.0));
  est.error_bound = t_critical(n - 1.0, confidence) * std::sqrt(var_hat);
  est.has_interval = true;
  return est;
}

Estimate estimate_phrase_count(std::span<const WordId> phrase,
                               const SamplingPlan& plan,
                               const CorpusReader& corpus, double confidence) {
  if (phrase.empty()) throw data_error("empty phrase");
  // read each distinct subcollection once
  std::unordered_map<SubId, double> tau_cache;
  for (SubId s : plan.sampled_ids) {
    if (tau_cache.count(s)) continue;
    const auto sub = corpus.read_subcollection(s);
    tau_cache[s] = static_cast<double>(count_in_subcollection(phrase, sub));
  }
  return estimate_total(
      plan, [&](SubId s) { return tau_cache.at(s); }, confidence);
}

// --------------------------------------------------------------------------
// Retrieval
// --------------------------------------------------------------------------

BooleanRetrievalResult boolean_retrieve(const BooleanExpr& expr,
                                        const ApproxIndex& index,
                                        const CorpusReader& corpus, double rate,
                                        std::uint64_t seed,
                                        SamplingMethod method) {
  const std::size_t n_subs = index.sub_count();
  const std::uint32_t n = draws_for_rate(rate, n_subs);

  BooleanRetrievalResult result;
  if (method == SamplingMethod::pps) {
    std::vector<double> scores(n_subs);
    for (std::size_t s = 0; s < n_subs; ++s) {
      scores[s] = boolean_similarity(expr, [&](WordId w) {
        const std::uint32_t m =
            hamming(index.word_signatures[w], index.sub_signatures[s]);
        return similarity_estimate(m, index.bits);
      });
    }
    double total = 0.0;
    for (double v : scores) total += v;
    require(total > 0.0, "boolean similarity scores sum to zero");
    for (double& v : scores) v /= total;
    result.plan = pps_sample_distinct(scores, n, seed);
  } else {
    result.plan = srcs_sample_distinct(n_subs, n, seed);
  }
  result.plan.rate = rate;

  for (SubId s : result.plan.sampled_ids) {
    const auto sub = corpus.read_subcollection(s);
    for (const Document& d : sub.documents) {
      const std::set<WordId> words(d.tokens.begin(), d.tokens.end());
      if (boolean_matches(expr, words)) result.doc_ids.push_back(d.doc_id);
    }
  }
  std::sort(result.doc_ids.begin(), result.doc_ids.end());
  return result;
}

double bm25_idf(std::uint64_t doc_count, std::uint64_t doc_freq) {
  return std::log(1.0 + (static_cast<double>(doc_count) -
                         static_cast<double>(doc_freq) + 0.5) /
                            (static_cast<double>(doc_freq) + 0.5));
}

RankedResult ranked_retrieve(std::span<const WordId> terms,
                             const ApproxIndex& index, const CorpusReader& corpus,
                             const EmbeddingModel& model, double rate,
                             std::uint32_t k, std::uint64_t seed,
                             SamplingMethod method, const Bm25Params& params,
                             ScoreMode mode) {
  if (terms.empty()) throw data_error("ranked retrieval needs at least one term");
  if (k < 1) throw data_error("k must be >= 1");
  const std::uint32_t n = draws_for_rate(rate, index.sub_count());

  RankedResult result;
  if (method == SamplingMethod::pps) {
    const QueryVector q = compose_query_vector(terms, model);
    const auto phi = subcollection_probabilities(q, index, mode);
    result.plan = pps_sample_distinct(phi, n, seed);
  } else {
    result.plan = srcs_sample_distinct(index.sub_count(), n, seed);
  }
  result.plan.rate = rate;

  // candidate documents and sample-level statistics
  std::vector<Document> docs;
  for (SubId s : result.plan.sampled_ids) {
    auto sub = corpus.read_subcollection(s);
    for (auto& d : sub.documents) docs.push_back(std::move(d));
  }
  require(!docs.empty(), "sampled subcollections contained no documents");

  const std::uint64_t n_docs = docs.size();
  double avgdl = 0.0;
  for (const auto& d : docs) avgdl += static_cast<double>(d.tokens.size());
  avgdl /= static_cast<double>(n_docs);

  // document frequency per distinct term, over the sample
  std::unordered_map<WordId, std::uint64_t> df;
  for (WordId t : terms) df.emplace(t, 0);
  for (const auto& d : docs) {
    const std::set<WordId> words(d.tokens.begin(), d.tokens.end());
    for (auto& [t, count] : df)
      if (words.count(t)) ++count;
  }

  std::vector<std::pair<DocId, double>> scored;
  scored.reserve(n_docs);
  for (const auto& d : docs) {
    std::unordered_map<WordId, std::uint64_t> tf;
    for (WordId t : d.tokens) {
      // only query terms matter
      if (df.count(t)) ++tf[t];
    }
    double score = 0.0;
    const double dl = static_cast<double>(d.tokens.size());
    for (WordId t : terms) {  // a repeated query term contributes per occurrence
      const auto it = tf.find(t);
      if (it == tf.end()) continue;
      const double f = static_cast<double>(it->second);
      const double idf = bm25_idf(n_docs, df.at(t));
      const double denom =
          f + params.k1 * (1.0 - params.b + params.b * dl / avgdl);
      score += idf * f * (params.k1 + 1.0) / denom;
    }
    if (score > 0.0) scored.emplace_back(d.doc_id, score);
  }

  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (scored.size() < k) result.truncated_early = true;
  if (scored.size() > k) scored.resize(k);
  result.entries = std::move(scored);
  return result;
}

// --------------------------------------------------------------------------
// Recommendation
// --------------------------------------------------------------------------

namespace {
constexpr char kRatingsMagic[4] = {'E', 'M', 'R', 'T'};
constexpr std::uint32_t kRatingsVersion = 1;
}  // namespace

RatingsTable RatingsTable::load(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kRatingsMagic, kRatingsVersion);
  const std::uint64_t n = r.u64();
  std::vector<RatingRecord> records;
  records.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    RatingRecord rec;
    rec.user_doc = r.u32();
    rec.item_id = r.str();
    rec.rating = r.f32();
    records.push_back(std::move(rec));
  }
  return from_records(std::move(records));
}

RatingsTable RatingsTable::from_records(std::vector<RatingRecord> records) {
  RatingsTable t;
  for (const auto& rec : records) {
    if (rec.rating < 1.0f || rec.rating > 5.0f)
      throw data_error("rating outside [1, 5] for item " + rec.item_id);
    t.by_item_[rec.item_id].emplace_back(rec.user_doc, rec.rating);
    t.by_user_[rec.user_doc].emplace_back(rec.item_id, rec.rating);
  }
  t.records_ = std::move(records);
  return t;
}

const std::vector<std::pair<DocId, float>>& RatingsTable::raters_of(
    const std::string& item) const {
  static const std::vector<std::pair<DocId, float>> empty;
  const auto it = by_item_.find(item);
  return it == by_item_.end() ? empty : it->second;
}

const std::vector<std::pair<std::string, float>>& RatingsTable::items_of(
    DocId user) const {
  static const std::vector<std::pair<std::string, float>> empty;
  const auto it = by_user_.find(user);
  return it == by_user_.end() ? empty : it->second;
}

bool RatingsTable::user_rated(DocId user, const std::string& item) const {
  for (const auto& [i, r] : items_of(user))
    if (i == item) return true;
  return false;
}

std::vector<std::string> RatingsTable::all_items() const {
  std::vector<std::string> items;
  items.reserve(by_item_.size());
  for (const auto& [item, _] : by_item_) items.push_back(item);
  std::sort(items.begin(), items.end());
  return items;
}

SamplingPlan user_neighbor_plan(DocId user, const ApproxIndex& index,
                                const EmbeddingModel& model, double rate,
                                std::uint64_t seed, SamplingMethod method,
                                ScoreMode mode) {
  const std::uint32_t n = draws_for_rate(rate, index.sub_count());
  if (method == SamplingMethod::srcs) {
    auto plan = srcs_sample_distinct(index.sub_count(), n, seed);
    plan.rate = rate;
    return plan;
  }
  const auto uv = model.doc_vector(user);
  QueryVector q;
  q.values.assign(uv.begin(), uv.end());
  q.term_count = 1;
  const auto phi = subcollection_probabilities(q, index, mode);
  auto plan = pps_sample_distinct(phi, n, seed);
  plan.rate = rate;
  return plan;
}

namespace {

// Users in the plan's subcollections, excluding the target.
std::vector<bool> sampled_user_mask(DocId user, const SamplingPlan& plan,
                                    const ApproxIndex& index,
                                    std::size_t doc_count) {
  std::vector<bool> in_sample(doc_count, false);
  for (SubId s : plan.sampled_ids) {
    require(s < index.partition_map.size(), "plan references unknown subcollection");
    for (DocId d : index.partition_map[s].member_doc_ids)
      if (d < doc_count) in_sample[d] = true;
  }
  if (user < in_sample.size()) in_sample[user] = false;
  return in_sample;
}

}  // namespace

RatingPrediction predict_rating(DocId user, const std::string& item,
                                const SamplingPlan& plan, const ApproxIndex& index,
                                const RatingsTable& ratings,
                                const EmbeddingModel& model) {
  const auto in_sample = sampled_user_mask(user, plan, index, model.doc_count());
  const auto uv = model.doc_vector(user);

  double weight_sum = 0.0;
  double weighted_rating = 0.0;
  std::uint32_t neighbors = 0;
  for (const auto& [v, rating] : ratings.raters_of(item)) {
    if (v >= model.doc_count() || !in_sample[v]) continue;
    const auto vv = model.doc_vector(v);
    double dot = 0.0;
    for (std::size_t i = 0; i < uv.size(); ++i)
      dot += static_cast<double>(uv[i]) * vv[i];
    const double w = std::exp(dot);
    weight_sum += w;
    weighted_rating += w * rating;
    ++neighbors;
  }

  RatingPrediction pred;
  pred.neighbors = neighbors;
  if (neighbors == 0) return pred;  // no basis for a prediction
  pred.predictable = true;
  pred.value = weighted_rating / weight_sum;
  return pred;
}

std::vector<std::pair<std::string, double>> recommend_topk(
    DocId user, const SamplingPlan& plan, const ApproxIndex& index,
    const RatingsTable& ratings, const EmbeddingModel& model, std::uint32_t k) {
  const auto in_sample = sampled_user_mask(user, plan, index, model.doc_count());

  // candidate items: rated by at least one sampled neighbor, not by the user
  std::set<std::string> candidates;
  for (DocId v = 0; v < in_sample.size(); ++v) {
    if (!in_sample[v]) continue;
    for (const auto& [item, _] : ratings.items_of(v)) candidates.insert(item);
  }

  std::vector<std::pair<std::string, double>> predictions;
  for (const std::string& item : candidates) {
    if (ratings.user_rated(user, item)) continue;
    const auto pred = predict_rating(user, item, plan, index, ratings, model);
    if (pred.predictable) predictions.emplace_back(item, pred.value);
  }
  std::sort(predictions.begin(), predictions.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  if (predictions.size() > k) predictions.resize(k);
  return predictions;
}

}  // namespace emap
