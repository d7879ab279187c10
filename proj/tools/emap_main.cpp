// emap: similarity-guided approximate text analytics over a partitioned
// corpus. Pipeline: ingest -> train -> allocate -> index -> query / eval.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "emap/allocation.hpp"
#include "emap/corpus.hpp"
#include "emap/embedding.hpp"
#include "emap/eval.hpp"
#include "emap/index.hpp"
#include "emap/queries.hpp"
#include "emap/sampling.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct CommonPaths {
  std::string corpus_dir;
  std::string model_path;
  std::string index_path;
};

fs::path default_data_dir() {
  if (const char* env = std::getenv("EMAP_DATA_DIR")) return env;
  return fs::current_path();
}

emap::CorpusReader open_corpus(const CommonPaths& p) {
  return emap::CorpusReader(p.corpus_dir);
}

emap::ApproxIndex open_index(const CommonPaths& p,
                             const emap::CorpusManifest& manifest) {
  if (!fs::exists(p.index_path))
    throw emap::data_error("index file not found: " + p.index_path);
  return emap::load_index(p.index_path, manifest);
}

emap::EmbeddingModel open_model(const CommonPaths& p) {
  if (!fs::exists(p.model_path))
    throw emap::data_error("model file not found: " + p.model_path);
  return emap::EmbeddingModel::load(p.model_path);
}

std::vector<emap::WordId> resolve_terms(const std::string& text,
                                        const emap::Vocabulary& vocab,
                                        bool skip_oov) {
  std::vector<emap::WordId> ids;
  for (const auto& tok : emap::tokenize(text)) {
    const auto id = vocab.id_of(tok);
    if (id) {
      ids.push_back(*id);
    } else if (skip_oov) {
      std::cerr << "warning: dropping out-of-vocabulary word '" << tok << "'\n";
    } else {
      throw emap::data_error("word not in vocabulary: '" + tok +
                             "' (use --skip-oov to drop it)");
    }
  }
  if (ids.empty()) throw emap::data_error("no usable query words in: " + text);
  return ids;
}

json plan_json(const emap::SamplingPlan& plan) {
  return json::parse(plan.to_json());
}

int run_cli(int argc, char** argv) {
  CLI::App app{"similarity-guided approximate text analytics engine"};
  app.require_subcommand(1);

  CommonPaths paths;
  paths.corpus_dir = (default_data_dir() / "corpus").string();
  paths.model_path = (default_data_dir() / "model.bin").string();
  paths.index_path = (default_data_dir() / "index.bin").string();

  std::uint64_t seed = 1;
  bool json_output = false;
  app.add_option("--seed", seed, "seed for all randomized steps");
  app.add_flag("--json", json_output, "machine-readable JSON output");

  // ---- ingest ----
  auto* ingest_cmd = app.add_subcommand("ingest", "tokenize and partition a corpus");
  std::string input_path, format_name = "plain-lines";
  std::uint64_t budget = 32 * 1024;
  std::uint32_t min_count = 5;
  double holdout_frac = 0.0;
  std::uint32_t holdout_users = 0;
  ingest_cmd->add_option("input", input_path, "input text/JSONL file")->required();
  ingest_cmd->add_option("--out", paths.corpus_dir, "output corpus directory");
  ingest_cmd->add_option("--format", format_name,
                         "plain-lines | json-records | review-records");
  ingest_cmd->add_option("--budget", budget, "subcollection byte budget");
  ingest_cmd->add_option("--min-count", min_count, "vocabulary frequency floor");
  ingest_cmd->add_option("--holdout-frac", holdout_frac,
                         "review-records: held-out rating fraction per test user");
  ingest_cmd->add_option("--holdout-users", holdout_users,
                         "review-records: number of test users");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train word/document vectors");
  emap::TrainingConfig tc;
  train_cmd->add_option("--corpus", paths.corpus_dir, "corpus directory");
  train_cmd->add_option("--out", paths.model_path, "model output path");
  train_cmd->add_option("--dim", tc.dim, "vector dimensions");
  train_cmd->add_option("--epochs", tc.epochs, "training epochs");
  train_cmd->add_option("--negatives", tc.negatives, "noise words per pair");
  train_cmd->add_option("--workers", tc.workers, "training threads");

  // ---- allocate ----
  auto* alloc_cmd = app.add_subcommand(
      "allocate", "recluster the corpus layout with spherical k-means");
  std::string alloc_out;
  std::uint32_t kmeans_k = 0;  // 0 = number of subcollections
  std::uint64_t alloc_budget = 0;  // 0 = keep the corpus budget
  alloc_cmd->add_option("--corpus", paths.corpus_dir, "corpus directory");
  alloc_cmd->add_option("--model", paths.model_path, "trained model path");
  alloc_cmd->add_option("--out", alloc_out, "reallocated corpus directory")
      ->required();
  alloc_cmd->add_option("--k", kmeans_k, "cluster count (default: N)");
  alloc_cmd->add_option("--budget", alloc_budget, "partition budget override");

  // ---- index ----
  auto* index_cmd = app.add_subcommand("index", "build the approximation index");
  emap::LshConfig lsh_cfg;
  bool keep_exact = false;
  index_cmd->add_option("--corpus", paths.corpus_dir, "corpus directory");
  index_cmd->add_option("--model", paths.model_path, "trained model path");
  index_cmd->add_option("--out", paths.index_path, "index output path");
  index_cmd->add_option("--bits", lsh_cfg.bits, "signature bits");
  index_cmd->add_flag("--keep-exact", keep_exact,
                      "retain real-valued vectors for exact-mode scoring");

  // ---- query ----
  auto* query_cmd = app.add_subcommand("query", "run a query over the index");
  query_cmd->require_subcommand(1);
  double rate = 0.1;
  double confidence = 0.95;
  std::uint32_t top_k = 10;
  bool exact_mode = false;
  bool skip_oov = false;
  std::string method_name_arg = "pps";
  query_cmd->add_option("--corpus", paths.corpus_dir, "corpus directory");
  query_cmd->add_option("--model", paths.model_path, "trained model path");
  query_cmd->add_option("--index", paths.index_path, "index path");
  query_cmd->add_option("--rate", rate, "sampling rate in (0, 1]");
  query_cmd->add_option("--method", method_name_arg, "pps | srcs");
  query_cmd->add_flag("--exact-mode", exact_mode,
                      "score with stored vectors instead of signatures");
  query_cmd->add_flag("--skip-oov", skip_oov,
                      "drop out-of-vocabulary query words with a warning");

  auto* q_count = query_cmd->add_subcommand("count", "estimate phrase occurrences");
  std::string phrase_text;
  q_count->add_option("phrase", phrase_text, "phrase to count")->required();
  q_count->add_option("--confidence", confidence, "confidence level");

  auto* q_bool = query_cmd->add_subcommand("bool", "Boolean retrieval");
  std::string bool_text;
  q_bool->add_option("expr", bool_text, "words with AND/OR and parentheses")
      ->required();

  auto* q_rank = query_cmd->add_subcommand("rank", "ranked retrieval (BM25)");
  std::string rank_text;
  q_rank->add_option("terms", rank_text, "query terms")->required();
  q_rank->add_option("--topk", top_k, "results to return");

  auto* q_rec = query_cmd->add_subcommand("recommend", "user-centric CF");
  std::string user_key;
  q_rec->add_option("user", user_key, "user id (ingest source key)")->required();
  q_rec->add_option("--topk", top_k, "recommendations to return");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand(
      "eval", "run an approximate-vs-precise comparison suite");
  std::string family_arg = "count";
  std::string eval_out = "eval/run";
  std::vector<double> eval_rates{0.1};
  std::vector<std::uint64_t> eval_seeds{1};
  std::uint32_t query_count = 100;
  eval_cmd->add_option("--corpus", paths.corpus_dir, "corpus directory");
  eval_cmd->add_option("--model", paths.model_path, "trained model path");
  eval_cmd->add_option("--index", paths.index_path, "index path");
  eval_cmd->add_option("--family", family_arg, "count | bool | rank | recommend");
  eval_cmd->add_option("--rates", eval_rates, "sampling rates");
  eval_cmd->add_option("--seeds", eval_seeds, "sampling seeds");
  eval_cmd->add_option("--queries", query_count, "generated query count");
  eval_cmd->add_option("--topk", top_k, "k for ranked / recommendation");
  eval_cmd->add_option("--out", eval_out, "output file prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  json out;

  if (*ingest_cmd) {
    emap::IngestOptions opt;
    opt.format = emap::parse_format(format_name);
    opt.tokenizer.min_count = min_count;
    opt.partition_budget = budget;
    opt.holdout_fraction = holdout_frac;
    opt.holdout_users = holdout_users;
    opt.holdout_seed = seed;
    emap::IngestStats stats;
    const auto manifest = emap::ingest(input_path, paths.corpus_dir, opt, &stats);
    out = {{"corpus_dir", paths.corpus_dir},
           {"documents", manifest.num_documents},
           {"subcollections", manifest.num_subcollections},
           {"vocabulary", manifest.vocab_size},
           {"tokens", manifest.total_tokens},
           {"records_skipped", stats.records_skipped},
           {"documents_dropped", stats.documents_dropped},
           {"ratings_held_out", stats.ratings_held_out}};
  } else if (*train_cmd) {
    tc.seed = seed;
    const auto corpus = open_corpus(paths);
    const auto docs = corpus.read_all_documents();
    const auto model = emap::train_pvdbow(docs, corpus.vocabulary(), tc,
                                          corpus.manifest().content_fingerprint);
    model.save(paths.model_path);
    out = {{"model", paths.model_path},
           {"dim", tc.dim},
           {"words", model.vocab_size()},
           {"documents", model.doc_count()}};
  } else if (*alloc_cmd) {
    const auto corpus = open_corpus(paths);
    const auto model = open_model(paths);
    const std::uint32_t k =
        kmeans_k > 0 ? kmeans_k
                     : static_cast<std::uint32_t>(
                           corpus.manifest().num_subcollections);
    emap::KmeansOptions kopt;
    kopt.seed = seed;
    const auto assignment = emap::spherical_kmeans(model, k, kopt);
    const std::uint64_t budget_out =
        alloc_budget > 0 ? alloc_budget : corpus.manifest().partition_budget;
    const auto manifest =
        emap::reallocate(corpus, assignment, budget_out, alloc_out);
    out = {{"corpus_dir", alloc_out},
           {"k", k},
           {"objective", assignment.objective},
           {"iterations", assignment.objective_trace.size()},
           {"subcollections", manifest.num_subcollections}};
  } else if (*index_cmd) {
    const auto corpus = open_corpus(paths);
    const auto model = open_model(paths);
    lsh_cfg.seed = seed;
    const auto index =
        emap::build_index(model, corpus.manifest(), lsh_cfg, keep_exact);
    emap::save_index(index, paths.index_path);
    const auto size = fs::file_size(paths.index_path);
    const auto payload = emap::index_signature_bytes(
        index.vocab_size(), index.sub_count(), index.bits);
    out = {{"index", paths.index_path},
           {"bits", index.bits},
           {"file_bytes", size},
           {"signature_bytes", payload},
           {"compression_vs_f64",
            static_cast<double>(emap::index_vector_baseline_bytes(
                index.vocab_size(), index.sub_count(), index.dim, 8)) /
                static_cast<double>(payload)},
           {"compression_vs_f32",
            static_cast<double>(emap::index_vector_baseline_bytes(
                index.vocab_size(), index.sub_count(), index.dim, 4)) /
                static_cast<double>(payload)}};
  } else if (*query_cmd) {
    const auto corpus = open_corpus(paths);
    const auto model = open_model(paths);
    const auto index = open_index(paths, corpus.manifest());
    const auto method = std::string(method_name_arg) == "srcs"
                            ? emap::SamplingMethod::srcs
                            : emap::SamplingMethod::pps;
    const auto mode =
        exact_mode ? emap::ScoreMode::exact : emap::ScoreMode::hashed;

    if (*q_count) {
      const auto phrase =
          resolve_terms(phrase_text, corpus.vocabulary(), skip_oov);
      const auto q = emap::compose_query_vector(phrase, model);
      const std::uint32_t n = emap::draws_for_rate(rate, index.sub_count());
      emap::SamplingPlan plan =
          method == emap::SamplingMethod::pps
              ? emap::pps_sample(
                    emap::subcollection_probabilities(q, index, mode), n, seed)
              : emap::srcs_sample(index.sub_count(), n, seed);
      plan.rate = rate;
      const auto est =
          emap::estimate_phrase_count(phrase, plan, corpus, confidence);
      out = {{"estimate", est.value},
             {"confidence", est.confidence},
             {"n", est.draws},
             {"method", emap::method_name(est.method)},
             {"bytes_read", corpus.bytes_read()},
             {"plan", plan_json(plan)}};
      if (est.has_interval)
        out["error_bound"] = est.error_bound;
      else
        out["no_interval"] = "single-draw plan has no error bound";
    } else if (*q_bool) {
      const auto expr = emap::parse_boolean_query(bool_text, corpus.vocabulary());
      const auto result =
          emap::boolean_retrieve(expr, index, corpus, rate, seed, method);
      out = {{"expr", emap::print_boolean_query(expr, corpus.vocabulary())},
             {"doc_ids", result.doc_ids},
             {"bytes_read", corpus.bytes_read()},
             {"plan", plan_json(result.plan)}};
    } else if (*q_rank) {
      const auto terms = resolve_terms(rank_text, corpus.vocabulary(), skip_oov);
      const auto result = emap::ranked_retrieve(terms, index, corpus, model,
                                                rate, top_k, seed, method,
                                                emap::Bm25Params{}, mode);
      json entries = json::array();
      for (const auto& [doc, score] : result.entries)
        entries.push_back({{"doc_id", doc}, {"score", score}});
      out = {{"results", entries},
             {"truncated_early", result.truncated_early},
             {"bytes_read", corpus.bytes_read()},
             {"plan", plan_json(result.plan)}};
    } else if (*q_rec) {
      const auto ratings = emap::RatingsTable::load(corpus.paths().ratings());
      // find the user's document by source key
      std::optional<emap::DocId> user;
      for (const auto& sub : corpus.manifest().subcollections) {
        const auto loaded = corpus.read_subcollection(sub.sub_id);
        for (const auto& d : loaded.documents)
          if (d.source_key == user_key) user = d.doc_id;
      }
      if (!user) throw emap::data_error("unknown user id: " + user_key);
      const auto plan =
          emap::user_neighbor_plan(*user, index, model, rate, seed, method, mode);
      const auto recs =
          emap::recommend_topk(*user, plan, index, ratings, model, top_k);
      json items = json::array();
      for (const auto& [item, predicted] : recs)
        items.push_back({{"item", item}, {"predicted_rating", predicted}});
      out = {{"user", user_key},
             {"recommendations", items},
             {"plan", plan_json(plan)}};
    }
  } else if (*eval_cmd) {
    const auto corpus = open_corpus(paths);
    const auto model = open_model(paths);
    const auto index = open_index(paths, corpus.manifest());
    emap::ComparisonConfig cfg;
    cfg.family = emap::parse_family(family_arg);
    cfg.rates = eval_rates;
    cfg.seeds = eval_seeds;
    cfg.query_count = query_count;
    cfg.query_seed = seed;
    cfg.top_k = top_k;
    const auto summary = emap::run_comparison(corpus, model, index, cfg, eval_out);
    out = {{"csv", summary.csv_path.string()},
           {"summary", summary.summary_path.string()},
           {"rows", summary.rows},
           {"cdf_files", summary.cdf_paths.size()}};
  }

  std::cout << out.dump(json_output ? -1 : 2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const emap::data_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}
