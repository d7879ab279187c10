#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "emap/eval.hpp"
#include "support/statref.hpp"
#include "support/synth.hpp"

using namespace emap;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "emap_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct Fixture {
  std::filesystem::path dir;
  CorpusManifest manifest;
  EmbeddingModel model;
  ApproxIndex index;

  CorpusReader reader() const { return CorpusReader(dir / "corpus"); }
};

Fixture pipeline(const std::string& name, std::uint32_t docs = 600) {
  Fixture f;
  f.dir = temp_dir(name);
  synth::TwoTopicSpec spec;
  spec.docs = docs;
  spec.sorted_by_topic = true;
  spec.leak = 0.3;
  synth::write_two_topic_corpus(f.dir / "in.txt", spec);
  IngestOptions opt;
  opt.tokenizer.min_count = 2;
  opt.partition_budget = 8 * 1024;
  f.manifest = ingest(f.dir / "in.txt", f.dir / "corpus", opt);
  CorpusReader reader(f.dir / "corpus");
  TrainingConfig tc;
  tc.dim = 24;
  tc.epochs = 10;
  tc.seed = 3;
  f.model = train_pvdbow(reader.read_all_documents(), reader.vocabulary(), tc,
                         f.manifest.content_fingerprint);
  LshConfig lsh;
  lsh.bits = 100;
  f.index = build_index(f.model, f.manifest, lsh);
  return f;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

TEST_CASE("gen_phrase_queries") {
  const auto f = pipeline("eval_phrases", 300);
  const auto reader = f.reader();

  const auto a = gen_phrase_queries(reader, 200, 5);
  const auto b = gen_phrase_queries(reader, 200, 5);
  const auto c = gen_phrase_queries(reader, 200, 6);
  CHECK(a == b);
  CHECK(a != c);

  // every phrase occurs at least once (it was lifted from a document)
  for (const auto& phrase : a) {
    std::uint64_t tau = 0;
    for (SubId s = 0; s < f.manifest.num_subcollections; ++s)
      tau += count_in_subcollection(phrase, reader.read_subcollection(s));
    CHECK(tau >= 1);
  }

  double mean_len = 0.0;
  for (const auto& phrase : a) mean_len += static_cast<double>(phrase.size());
  mean_len /= static_cast<double>(a.size());
  CHECK(mean_len == doctest::Approx(2.0).epsilon(0.11));  // 2.0 +- 0.2-ish
  CHECK(std::fabs(mean_len - 2.0) <= 0.2);
}

TEST_CASE("gen_boolean_queries") {
  const auto f = pipeline("eval_bools", 300);
  const auto reader = f.reader();
  const auto& vocab = reader.vocabulary();

  const auto a = gen_boolean_queries(vocab, 100, 9);
  const auto b = gen_boolean_queries(vocab, 100, 9);
  REQUIRE(a.size() == b.size());
  double mean_terms = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].structurally_equal(b[i]));
    // parse(print(e)) reproduces e
    const auto printed = print_boolean_query(a[i], vocab);
    CHECK(parse_boolean_query(printed, vocab).structurally_equal(a[i]));
    mean_terms += static_cast<double>(a[i].term_ids().size());
  }
  mean_terms /= static_cast<double>(a.size());
  CHECK(mean_terms == doctest::Approx(3.0).epsilon(0.15));
}

TEST_CASE("compute_metrics") {
  SUBCASE("identical retrieved sets give recall 1") {
    const std::vector<DocId> docs{1, 5, 9};
    const auto rec = compute_metrics(docs, docs);
    CHECK(*rec.recall == doctest::Approx(1.0));
  }
  SUBCASE("half-overlapping top-10 gives P@10 = 0.5") {
    std::vector<std::pair<DocId, double>> approx, precise;
    for (DocId d = 0; d < 10; ++d) {
      approx.emplace_back(d, 1.0);
      precise.emplace_back(d + 5, 1.0);  // shares 5..9
    }
    const auto rec = compute_metrics(approx, precise);
    CHECK(*rec.p_at_k == doctest::Approx(0.5));
  }
  SUBCASE("exact estimate yields zero errors") {
    Estimate est;
    est.value = 100.0;
    est.error_bound = 0.0;
    est.has_interval = true;
    const auto rec = compute_metrics(est, 100.0);
    CHECK(*rec.est_rel_err == doctest::Approx(0.0));
    CHECK(*rec.act_rel_err == doctest::Approx(0.0));
  }
  SUBCASE("empty precise set leaves recall unset") {
    const auto rec = compute_metrics(std::vector<DocId>{1}, std::vector<DocId>{});
    CHECK(!rec.recall.has_value());
  }
}

TEST_CASE("metric CSV rows leave unused fields empty") {
  MetricRecord rec;
  rec.query_id = "q1";
  rec.family = QueryFamily::boolean;
  rec.method = SamplingMethod::srcs;
  rec.rate = 0.25;
  rec.seed = 7;
  rec.recall = 0.5;
  const auto row = metric_csv_row(rec);
  const auto fields = split_csv(row + ",");
  // query_id family method rate seed | tau_hat epsilon tau est act | recall ...
  CHECK(fields[0] == "q1");
  CHECK(fields[1] == "bool");
  CHECK(fields[2] == "srcs");
  CHECK(fields[5].empty());   // tau_hat unused
  CHECK(fields[6].empty());   // epsilon unused
  CHECK(fields[10] == "0.5"); // recall
  CHECK(fields[12].empty());  // mse unused
}

TEST_CASE("run_comparison full-rate run is perfect and complete") {
  const auto f = pipeline("eval_full");
  const auto reader = f.reader();

  ComparisonConfig cfg;
  cfg.family = QueryFamily::count;
  cfg.rates = {1.0};
  cfg.methods = {SamplingMethod::pps, SamplingMethod::srcs};
  cfg.seeds = {1, 2};
  cfg.query_count = 6;
  cfg.query_seed = 21;
  const auto out = run_comparison(reader, f.model, f.index, cfg,
                                  f.dir / "out" / "run");

  const auto lines = read_lines(out.csv_path);
  CHECK(lines.size() == 1 + 6 * 1 * 2 * 2);  // header + q x r x m x s
  CHECK(out.rows == 24);

  // at rate 1.0 every draw has tau_s/phi_s averaging over all subcollections;
  // actual relative error is not forced to zero for pps draws, but the
  // estimates must be finite and the boolean/ranked families exact. For the
  // count family check act_rel_err of srcs when phi is uniform and n = N.
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_csv(lines[i] + ",");
    CHECK(!fields[5].empty());  // tau_hat present
    CHECK(!fields[7].empty());  // tau present
  }

  SUBCASE("boolean and ranked families are exact at rate 1.0") {
    ComparisonConfig bcfg;
    bcfg.family = QueryFamily::boolean;
    bcfg.rates = {1.0};
    bcfg.methods = {SamplingMethod::pps, SamplingMethod::srcs};
    bcfg.seeds = {1};
    bcfg.query_count = 5;
    const auto bout = run_comparison(reader, f.model, f.index, bcfg,
                                     f.dir / "out" / "bool");
    for (const auto& line : read_lines(bout.csv_path)) {
      if (line.rfind("q", 0) != 0) continue;
      const auto fields = split_csv(line + ",");
      if (!fields[10].empty())
        CHECK(std::stod(fields[10]) == doctest::Approx(1.0));
    }

    ComparisonConfig rcfg = bcfg;
    rcfg.family = QueryFamily::ranked;
    const auto rout = run_comparison(reader, f.model, f.index, rcfg,
                                     f.dir / "out" / "rank");
    for (const auto& line : read_lines(rout.csv_path)) {
      if (line.rfind("q", 0) != 0) continue;
      const auto fields = split_csv(line + ",");
      if (!fields[11].empty())
        CHECK(std::stod(fields[11]) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("similarity-driven sampling beats uniform sampling on skewed data") {
  const auto f = pipeline("eval_compare", 1200);
  const auto reader = f.reader();

  ComparisonConfig cfg;
  cfg.family = QueryFamily::count;
  cfg.rates = {0.1};
  cfg.methods = {SamplingMethod::pps, SamplingMethod::srcs};
  cfg.seeds = {1, 2, 3};
  cfg.query_count = 40;
  cfg.query_seed = 11;
  const auto out = run_comparison(reader, f.model, f.index, cfg,
                                  f.dir / "out" / "cmp");

  double pps_sum = 0.0, srcs_sum = 0.0;
  int pps_n = 0, srcs_n = 0;
  for (const auto& line : read_lines(out.csv_path)) {
    if (line.rfind("q", 0) != 0) continue;
    const auto fields = split_csv(line + ",");
    if (fields[8].empty()) continue;  // est_rel_err
    if (fields[2] == "pps") {
      pps_sum += std::stod(fields[8]);
      ++pps_n;
    } else {
      srcs_sum += std::stod(fields[8]);
      ++srcs_n;
    }
  }
  REQUIRE(pps_n > 0);
  REQUIRE(srcs_n > 0);
  CHECK(pps_sum / pps_n < srcs_sum / srcs_n);
}
