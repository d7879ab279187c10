#include "emap/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "emap/rng.hpp"
#include "emap/sampling.hpp"

namespace emap {

const char* family_name(QueryFamily f) {
  switch (f) {
    case QueryFamily::count: return "count";
    case QueryFamily::boolean: return "bool";
    case QueryFamily::ranked: return "rank";
    case QueryFamily::recommend: return "recommend";
  }
  throw internal_error("unknown query family");
}

QueryFamily parse_family(const std::string& name) {
  if (name == "count") return QueryFamily::count;
  if (name == "bool") return QueryFamily::boolean;
  if (name == "rank") return QueryFamily::ranked;
  if (name == "recommend") return QueryFamily::recommend;
  throw data_error("unknown query family: '" + name + "'");
}

std::string metric_csv_header() {
  return "query_id,family,method,rate,seed,tau_hat,epsilon,tau,est_rel_err,"
         "act_rel_err,recall,p_at_k,mse,bytes_read,wall_ms";
}

namespace {

template <typename T>
void append_opt(std::ostringstream& os, const std::optional<T>& v) {
  os << ',';
  if (v) os << *v;
}

}  // namespace

std::string metric_csv_row(const MetricRecord& rec) {
  std::ostringstream os;
  os.precision(12);
  os << rec.query_id << ',' << family_name(rec.family) << ','
     << method_name(rec.method) << ',' << rec.rate << ',' << rec.seed;
  append_opt(os, rec.tau_hat);
  append_opt(os, rec.epsilon);
  append_opt(os, rec.tau);
  append_opt(os, rec.est_rel_err);
  append_opt(os, rec.act_rel_err);
  append_opt(os, rec.recall);
  append_opt(os, rec.p_at_k);
  append_opt(os, rec.mse);
  append_opt(os, rec.bytes_read);
  append_opt(os, rec.wall_ms);
  return os.str();
}

std::vector<std::vector<WordId>> gen_phrase_queries(const CorpusReader& corpus,
                                                    std::uint32_t count,
                                                    std::uint64_t seed) {
  const auto& manifest = corpus.manifest();
  require(manifest.num_documents > 0, "empty corpus");
  Rng rng(seed);
  std::vector<std::vector<WordId>> phrases;
  phrases.reserve(count);
  while (phrases.size() < count) {
    // pick a random document via its subcollection
    const SubId sid =
        static_cast<SubId>(rng.uniform_index(manifest.num_subcollections));
    const auto& members = manifest.subcollections[sid].member_doc_ids;
    const std::size_t di = rng.uniform_index(members.size());
    const auto sub = corpus.read_subcollection(sid);
    const auto& tokens = sub.documents[di].tokens;

    auto len = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(rng.normal(2.0, 1.0))));
    len = std::min(len, tokens.size());
    const std::size_t start = rng.uniform_index(tokens.size() - len + 1);
    phrases.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                         tokens.begin() + static_cast<std::ptrdiff_t>(start + len));
  }
  return phrases;
}

std::vector<BooleanExpr> gen_boolean_queries(const Vocabulary& vocab,
                                             std::uint32_t count,
                                             std::uint64_t seed) {
  require(vocab.size() > 0, "empty vocabulary");
  Rng rng(seed);
  std::vector<double> weights(vocab.size());
  for (WordId w = 0; w < vocab.size(); ++w)
    weights[w] = static_cast<double>(vocab.frequency(w));
  const AliasTable by_freq(weights);

  std::vector<BooleanExpr> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto size = static_cast<std::uint32_t>(
        std::max<long long>(1, std::llround(rng.normal(3.0, 1.0))));
    std::vector<WordId> words;
    words.reserve(size);
    for (std::uint32_t j = 0; j < size; ++j)
      words.push_back(static_cast<WordId>(by_freq.sample(rng)));

    BooleanExpr expr =
        BooleanExpr::make_term(vocab.word(words[0]), words[0]);
    for (std::uint32_t j = 1; j < size; ++j) {
      BooleanExpr term = BooleanExpr::make_term(vocab.word(words[j]), words[j]);
      if (rng.uniform() < 0.5)
        expr = BooleanExpr::make_and(std::move(expr), std::move(term));
      else
        expr = BooleanExpr::make_or(std::move(expr), std::move(term));
    }
    out.push_back(std::move(expr));
  }
  return out;
}

MetricRecord compute_metrics(const Estimate& approx, double precise_tau) {
  MetricRecord rec;
  rec.family = QueryFamily::count;
  rec.tau_hat = approx.value;
  rec.tau = precise_tau;
  if (approx.has_interval) rec.epsilon = approx.error_bound;
  if (approx.has_interval && approx.value != 0.0)
    rec.est_rel_err = approx.error_bound / std::fabs(approx.value);
  if (precise_tau != 0.0)
    rec.act_rel_err = std::fabs(approx.value - precise_tau) / precise_tau;
  return rec;
}

MetricRecord compute_metrics(const std::vector<DocId>& approx_docs,
                             const std::vector<DocId>& precise_docs) {
  MetricRecord rec;
  rec.family = QueryFamily::boolean;
  if (precise_docs.empty()) return rec;  // recall undefined, left empty
  std::uint64_t hit = 0;
  std::set<DocId> precise(precise_docs.begin(), precise_docs.end());
  for (DocId d : approx_docs)
    if (precise.count(d)) ++hit;
  rec.recall = static_cast<double>(hit) / static_cast<double>(precise.size());
  return rec;
}

MetricRecord compute_metrics(
    const std::vector<std::pair<DocId, double>>& approx_topk,
    const std::vector<std::pair<DocId, double>>& precise_topk) {
  MetricRecord rec;
  rec.family = QueryFamily::ranked;
  if (precise_topk.empty()) return rec;
  std::set<DocId> precise;
  for (const auto& [d, s] : precise_topk) precise.insert(d);
  std::uint64_t hit = 0;
  for (const auto& [d, s] : approx_topk)
    if (precise.count(d)) ++hit;
  rec.p_at_k = static_cast<double>(hit) / static_cast<double>(precise_topk.size());
  return rec;
}

namespace {

struct CsvSink {
  std::ofstream out;
  std::uint64_t rows = 0;

  explicit CsvSink(const std::filesystem::path& path) : out(path) {
    if (!out) throw data_error("cannot write " + path.string());
    out << metric_csv_header() << '\n';
  }
  void add(const MetricRecord& rec) {
    out << metric_csv_row(rec) << '\n';
    ++rows;
  }
};

// per (metric, method, rate) aggregation for the summary and CDF files
struct GroupKey {
  std::string method;
  double rate;
  bool operator<(const GroupKey& o) const {
    if (method != o.method) return method < o.method;
    return rate < o.rate;
  }
};

double percentile(std::vector<double> values, double p) {
  require(!values.empty(), "percentile of empty set");
  std::sort(values.begin(), values.end());
  const double idx = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

class Aggregator {
public:
  Aggregator(std::string metric_name, QueryFamily family)
      : metric_name_(std::move(metric_name)), family_(family) {}

  void add(const MetricRecord& rec, std::optional<double> value) {
    if (value) groups_[{method_name(rec.method), rec.rate}].push_back(*value);
  }

  void write(const std::filesystem::path& summary_path,
             const std::filesystem::path& cdf_prefix,
             std::vector<std::filesystem::path>& cdf_paths) const {
    std::ofstream out(summary_path);
    if (!out) throw data_error("cannot write " + summary_path.string());
    out << "family,metric,method,rate,queries,mean,p50,p90\n";
    out.precision(10);
    for (const auto& [key, values] : groups_) {
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      out << family_name(family_) << ',' << metric_name_ << ',' << key.method
          << ',' << key.rate << ',' << values.size() << ',' << mean << ','
          << percentile(values, 0.5) << ',' << percentile(values, 0.9) << '\n';

      std::ostringstream name;
      name << cdf_prefix.string() << "_cdf_" << family_name(family_) << '_'
           << metric_name_ << '_' << key.method << '_' << key.rate << ".csv";
      std::filesystem::path cdf_path(name.str());
      std::ofstream cdf(cdf_path);
      if (!cdf) throw data_error("cannot write " + cdf_path.string());
      cdf << "value,cumulative_fraction\n";
      cdf.precision(10);
      std::vector<double> sorted(values);
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        cdf << sorted[i] << ','
            << static_cast<double>(i + 1) / static_cast<double>(sorted.size())
            << '\n';
      }
      cdf_paths.push_back(cdf_path);
    }
  }

private:
  std::string metric_name_;
  QueryFamily family_;
  std::map<GroupKey, std::vector<double>> groups_;
};

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

void run_count_family(const CorpusReader& corpus, const ApproxIndex& index,
                      const EmbeddingModel& model, const ComparisonConfig& cfg,
                      CsvSink& csv, Aggregator& agg) {
  const auto phrases = gen_phrase_queries(corpus, cfg.query_count, cfg.query_seed);
  const std::size_t n_subs = index.sub_count();

  for (std::size_t qi = 0; qi < phrases.size(); ++qi) {
    const auto& phrase = phrases[qi];
    // precise tau and per-subcollection counts, independent of any sampler
    std::vector<double> tau_s(n_subs);
    double tau = 0.0;
    for (SubId s = 0; s < n_subs; ++s) {
      tau_s[s] = static_cast<double>(
          count_in_subcollection(phrase, corpus.read_subcollection(s)));
      tau += tau_s[s];
    }

    const QueryVector q = compose_query_vector(phrase, model);
    const auto phi_pps = subcollection_probabilities(q, index);

    for (SamplingMethod method : cfg.methods) {
      for (double rate : cfg.rates) {
        const std::uint32_t n = draws_for_rate(rate, n_subs);
        for (std::uint64_t seed : cfg.seeds) {
          const auto t0 = std::chrono::steady_clock::now();
          const std::uint64_t mix = seed * 1000003ull + qi;
          SamplingPlan plan = method == SamplingMethod::pps
                                  ? pps_sample(phi_pps, n, mix)
                                  : srcs_sample(n_subs, n, mix);
          plan.rate = rate;
          corpus.reset_bytes_read();
          const Estimate est =
              estimate_phrase_count(phrase, plan, corpus, cfg.confidence);
          MetricRecord rec = compute_metrics(est, tau);
          rec.query_id = "q" + std::to_string(qi);
          rec.method = method;
          rec.rate = rate;
          rec.seed = seed;
          rec.bytes_read = corpus.bytes_read();
          rec.wall_ms = elapsed_ms(t0);
          csv.add(rec);
          agg.add(rec, rec.est_rel_err);
        }
      }
    }
  }
}

void run_boolean_family(const CorpusReader& corpus, const ApproxIndex& index,
                        const ComparisonConfig& cfg, CsvSink& csv,
                        Aggregator& agg) {
  const auto exprs =
      gen_boolean_queries(corpus.vocabulary(), cfg.query_count, cfg.query_seed);

  for (std::size_t qi = 0; qi < exprs.size(); ++qi) {
    const auto& expr = exprs[qi];
    // precise result: full-rate execution (sampler independent)
    const auto precise =
        boolean_retrieve(expr, index, corpus, 1.0, 0, SamplingMethod::srcs);

    for (SamplingMethod method : cfg.methods) {
      for (double rate : cfg.rates) {
        for (std::uint64_t seed : cfg.seeds) {
          const auto t0 = std::chrono::steady_clock::now();
          corpus.reset_bytes_read();
          const auto approx = boolean_retrieve(expr, index, corpus, rate,
                                               seed * 1000003ull + qi, method);
          MetricRecord rec = compute_metrics(approx.doc_ids, precise.doc_ids);
          rec.query_id = "q" + std::to_string(qi);
          rec.method = method;
          rec.rate = rate;
          rec.seed = seed;
          rec.bytes_read = corpus.bytes_read();
          rec.wall_ms = elapsed_ms(t0);
          csv.add(rec);
          agg.add(rec, rec.recall);
        }
      }
    }
  }
}

void run_ranked_family(const CorpusReader& corpus, const ApproxIndex& index,
                       const EmbeddingModel& model, const ComparisonConfig& cfg,
                       CsvSink& csv, Aggregator& agg) {
  const auto exprs =
      gen_boolean_queries(corpus.vocabulary(), cfg.query_count, cfg.query_seed);

  for (std::size_t qi = 0; qi < exprs.size(); ++qi) {
    const auto terms = exprs[qi].term_ids();
    const auto precise = ranked_retrieve(terms, index, corpus, model, 1.0,
                                         cfg.top_k, 0, SamplingMethod::srcs);

    for (SamplingMethod method : cfg.methods) {
      for (double rate : cfg.rates) {
        for (std::uint64_t seed : cfg.seeds) {
          const auto t0 = std::chrono::steady_clock::now();
          corpus.reset_bytes_read();
          const auto approx =
              ranked_retrieve(terms, index, corpus, model, rate, cfg.top_k,
                              seed * 1000003ull + qi, method);
          MetricRecord rec = compute_metrics(approx.entries, precise.entries);
          rec.query_id = "q" + std::to_string(qi);
          rec.method = method;
          rec.rate = rate;
          rec.seed = seed;
          rec.bytes_read = corpus.bytes_read();
          rec.wall_ms = elapsed_ms(t0);
          csv.add(rec);
          agg.add(rec, rec.p_at_k);
        }
      }
    }
  }
}

void run_recommend_family(const CorpusReader& corpus, const ApproxIndex& index,
                          const EmbeddingModel& model,
                          const ComparisonConfig& cfg, CsvSink& csv,
                          Aggregator& agg_mse, Aggregator& agg_pk) {
  const auto ratings = RatingsTable::load(corpus.paths().ratings());
  const auto test_path = cfg.test_ratings_path.empty()
                             ? corpus.paths().ratings_test()
                             : cfg.test_ratings_path;
  const auto heldout = RatingsTable::load(test_path);

  // test users = users with held-out ratings, in doc id order
  std::set<DocId> users;
  for (const auto& rec : heldout.records()) users.insert(rec.user_doc);
  std::vector<DocId> test_users(users.begin(), users.end());
  if (cfg.test_users > 0 && test_users.size() > cfg.test_users)
    test_users.resize(cfg.test_users);

  for (std::size_t ui = 0; ui < test_users.size(); ++ui) {
    const DocId u = test_users[ui];
    const auto& held_items = heldout.items_of(u);
    std::set<std::string> purchased;
    for (const auto& [item, r] : held_items) purchased.insert(item);

    auto evaluate = [&](const SamplingPlan& plan, MetricRecord& rec) {
      double se_sum = 0.0;
      std::uint64_t predicted = 0;
      for (const auto& [item, actual] : held_items) {
        const auto pred = predict_rating(u, item, plan, index, ratings, model);
        if (!pred.predictable) continue;  // miss, scored against P@k only
        se_sum += (pred.value - actual) * (pred.value - actual);
        ++predicted;
      }
      if (predicted > 0) rec.mse = se_sum / static_cast<double>(predicted);
      const auto topk = recommend_topk(u, plan, index, ratings, model, cfg.top_k);
      if (!topk.empty()) {
        std::uint64_t hits = 0;
        for (const auto& [item, score] : topk)
          if (purchased.count(item)) ++hits;
        rec.p_at_k = static_cast<double>(hits) / static_cast<double>(cfg.top_k);
      }
    };

    for (SamplingMethod method : cfg.methods) {
      for (double rate : cfg.rates) {
        for (std::uint64_t seed : cfg.seeds) {
          const auto t0 = std::chrono::steady_clock::now();
          const SamplingPlan plan = user_neighbor_plan(
              u, index, model, rate, seed * 1000003ull + ui, method);
          MetricRecord rec;
          rec.family = QueryFamily::recommend;
          rec.query_id = "u" + std::to_string(u);
          rec.method = method;
          rec.rate = rate;
          rec.seed = seed;
          evaluate(plan, rec);
          rec.wall_ms = elapsed_ms(t0);
          csv.add(rec);
          agg_mse.add(rec, rec.mse);
          agg_pk.add(rec, rec.p_at_k);
        }
      }
    }
  }
}

}  // namespace

ComparisonSummary run_comparison(const CorpusReader& corpus,
                                 const EmbeddingModel& model,
                                 const ApproxIndex& index,
                                 const ComparisonConfig& config,
                                 const std::filesystem::path& out_prefix) {
  if (config.rates.empty() || config.methods.empty() || config.seeds.empty())
    throw data_error("comparison needs at least one rate, method, and seed");

  ComparisonSummary summary;
  summary.csv_path = out_prefix.string() + "_queries.csv";
  summary.summary_path = out_prefix.string() + "_summary.csv";
  if (out_prefix.has_parent_path())
    std::filesystem::create_directories(out_prefix.parent_path());

  CsvSink csv(summary.csv_path);

  switch (config.family) {
    case QueryFamily::count: {
      Aggregator agg("est_rel_err", QueryFamily::count);
      run_count_family(corpus, index, model, config, csv, agg);
      agg.write(summary.summary_path, out_prefix, summary.cdf_paths);
      break;
    }
    case QueryFamily::boolean: {
      Aggregator agg("recall", QueryFamily::boolean);
      run_boolean_family(corpus, index, config, csv, agg);
      agg.write(summary.summary_path, out_prefix, summary.cdf_paths);
      break;
    }
    case QueryFamily::ranked: {
      Aggregator agg("p_at_k", QueryFamily::ranked);
      run_ranked_family(corpus, index, model, config, csv, agg);
      agg.write(summary.summary_path, out_prefix, summary.cdf_paths);
      break;
    }
    case QueryFamily::recommend: {
      Aggregator agg_mse("mse", QueryFamily::recommend);
      Aggregator agg_pk("p_at_k", QueryFamily::recommend);
      run_recommend_family(corpus, index, model, config, csv, agg_mse, agg_pk);
      // both metrics share the summary file
      std::filesystem::path mse_summary =
          out_prefix.string() + "_summary_mse.csv";
      std::filesystem::path pk_summary = out_prefix.string() + "_summary_pk.csv";
      agg_mse.write(mse_summary, out_prefix, summary.cdf_paths);
      agg_pk.write(pk_summary, out_prefix, summary.cdf_paths);
      summary.summary_path = mse_summary;
      break;
    }
  }
  summary.rows = csv.rows;
  return summary;
}

}  // namespace emap
