#include "emap/embedding.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "emap/io.hpp"
#include "emap/rng.hpp"

namespace emap {

namespace {

constexpr char kModelMagic[4] = {'E', 'M', 'M', 'D'};
constexpr std::uint32_t kModelVersion = 1;

void normalize_unit(std::span<float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  require(norm > 0.0, "cannot normalize a zero vector");
  const float inv = static_cast<float>(1.0 / norm);
  for (float& x : v) x *= inv;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void TrainingConfig::validate() const {
  if (dim < 2) throw data_error("embedding dim must be >= 2");
  if (negatives < 1) throw data_error("negative sample count must be >= 1");
  if (!(initial_lr > 0.0) || !(final_lr > 0.0) || final_lr > initial_lr)
    throw data_error("learning rates must be positive and decreasing");
  if (epochs < 1) throw data_error("epochs must be >= 1");
  if (workers < 1) throw data_error("worker count must be >= 1");
}

EmbeddingModel::EmbeddingModel(TrainingConfig config, std::size_t vocab_size,
                               std::size_t doc_count,
                               std::uint64_t corpus_fingerprint)
    : config_(config),
      num_words_(vocab_size),
      num_docs_(doc_count),
      fingerprint_(corpus_fingerprint),
      word_vecs_(vocab_size * config.dim),
      doc_vecs_(doc_count * config.dim) {}

std::span<const float> EmbeddingModel::word_vector(WordId w) const {
  require(w < num_words_, "word id out of range: " + std::to_string(w));
  return {word_vecs_.data() + static_cast<std::size_t>(w) * config_.dim,
          config_.dim};
}

std::span<const float> EmbeddingModel::doc_vector(DocId d) const {
  require(d < num_docs_, "doc id out of range: " + std::to_string(d));
  return {doc_vecs_.data() + static_cast<std::size_t>(d) * config_.dim,
          config_.dim};
}

std::span<float> EmbeddingModel::word_vector_mut(WordId w) {
  require(w < num_words_, "word id out of range: " + std::to_string(w));
  return {word_vecs_.data() + static_cast<std::size_t>(w) * config_.dim,
          config_.dim};
}

std::span<float> EmbeddingModel::doc_vector_mut(DocId d) {
  require(d < num_docs_, "doc id out of range: " + std::to_string(d));
  return {doc_vecs_.data() + static_cast<std::size_t>(d) * config_.dim,
          config_.dim};
}

void EmbeddingModel::save(const std::filesystem::path& path) const {
  BinaryWriter w(path);
  w.magic(kModelMagic, kModelVersion);
  w.u32(config_.dim);
  w.u64(num_words_);
  w.u64(num_docs_);
  w.u64(config_.seed);
  w.u64(fingerprint_);
  w.u32(config_.epochs);
  w.u32(config_.negatives);
  w.f64(config_.noise_exponent);
  w.f64(config_.initial_lr);
  w.f64(config_.final_lr);
  w.u32(config_.workers);
  w.f32_block(word_vecs_);
  w.f32_block(doc_vecs_);
}

EmbeddingModel EmbeddingModel::load(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kModelMagic, kModelVersion);
  TrainingConfig cfg;
  cfg.dim = r.u32();
  const std::uint64_t v = r.u64();
  const std::uint64_t m = r.u64();
  cfg.seed = r.u64();
  const std::uint64_t fp = r.u64();
  cfg.epochs = r.u32();
  cfg.negatives = r.u32();
  cfg.noise_exponent = r.f64();
  cfg.initial_lr = r.f64();
  cfg.final_lr = r.f64();
  cfg.workers = r.u32();
  EmbeddingModel model(cfg, v, m, fp);
  r.f32_block(model.word_vecs_);
  r.f32_block(model.doc_vecs_);
  return model;
}

namespace {

// One worker's pass over its share of documents. Updates are unsynchronized
// when several workers run; with one worker the whole schedule is fixed by
// the seed.
void train_worker(EmbeddingModel& model, const std::vector<Document>& docs,
                  const AliasTable& noise, const TrainingConfig& cfg,
                  std::uint32_t worker_id, std::uint64_t total_pairs,
                  std::atomic<std::uint64_t>& pairs_done) {
  Rng rng(cfg.seed * 0x9e3779b97f4a7c15ull + worker_id + 1);
  const std::uint32_t dim = cfg.dim;
  std::vector<float> doc_grad(dim);

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t di = worker_id; di < docs.size(); di += cfg.workers) {
      const Document& doc = docs[di];
      const auto dvec = model.doc_vector_mut(doc.doc_id);
      for (WordId target : doc.tokens) {
        const double progress =
            static_cast<double>(
                pairs_done.fetch_add(1, std::memory_order_relaxed)) /
            static_cast<double>(total_pairs);
        const float lr = static_cast<float>(
            cfg.initial_lr + (cfg.final_lr - cfg.initial_lr) * progress);

        std::fill(doc_grad.begin(), doc_grad.end(), 0.0f);

        // positive pair plus k noise words, sigmoid objective
        for (std::uint32_t s = 0; s <= cfg.negatives; ++s) {
          WordId w;
          float label;
          if (s == 0) {
            w = target;
            label = 1.0f;
          } else {
            w = static_cast<WordId>(noise.sample(rng));
            if (w == target) continue;
            label = 0.0f;
          }
          const auto wvec = model.word_vector_mut(w);
          double dot = 0.0;
          for (std::uint32_t c = 0; c < dim; ++c)
            dot += static_cast<double>(wvec[c]) * dvec[c];
          const float g = (label - static_cast<float>(sigmoid(dot))) * lr;
          for (std::uint32_t c = 0; c < dim; ++c) {
            doc_grad[c] += g * wvec[c];
            wvec[c] += g * dvec[c];
          }
          normalize_unit(wvec);
        }
        for (std::uint32_t c = 0; c < dim; ++c) dvec[c] += doc_grad[c];
        normalize_unit(dvec);
      }
    }
  }
}

}  // namespace

EmbeddingModel train_pvdbow(const std::vector<Document>& docs,
                            const Vocabulary& vocab,
                            const TrainingConfig& config,
                            std::uint64_t corpus_fingerprint) {
  config.validate();
  if (docs.empty()) throw data_error("cannot train on an empty corpus");
  if (vocab.size() == 0) throw data_error("cannot train with an empty vocabulary");

  EmbeddingModel model(config, vocab.size(), docs.size(), corpus_fingerprint);

  // random unit-length init
  Rng init_rng(config.seed);
  for (WordId w = 0; w < vocab.size(); ++w) {
    auto v = model.word_vector_mut(w);
    for (float& x : v) x = static_cast<float>(init_rng.normal());
    normalize_unit(v);
  }
  for (DocId d = 0; d < docs.size(); ++d) {
    auto v = model.doc_vector_mut(d);
    for (float& x : v) x = static_cast<float>(init_rng.normal());
    normalize_unit(v);
  }

  std::vector<double> noise_weights(vocab.size());
  for (WordId w = 0; w < vocab.size(); ++w)
    noise_weights[w] = std::pow(static_cast<double>(vocab.frequency(w)),
                                config.noise_exponent);
  const AliasTable noise(noise_weights);

  std::uint64_t pairs_per_epoch = 0;
  for (const Document& d : docs) pairs_per_epoch += d.tokens.size();
  const std::uint64_t total_pairs = pairs_per_epoch * config.epochs;
  require(total_pairs > 0, "no training pairs");

  std::atomic<std::uint64_t> pairs_done{0};
  if (config.workers == 1) {
    train_worker(model, docs, noise, config, 0, total_pairs, pairs_done);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(config.workers);
    for (std::uint32_t t = 0; t < config.workers; ++t)
      threads.emplace_back(train_worker, std::ref(model), std::cref(docs),
                           std::cref(noise), std::cref(config), t, total_pairs,
                           std::ref(pairs_done));
    for (auto& th : threads) th.join();
  }
  return model;
}

double word_doc_score(WordId w, DocId d, const EmbeddingModel& model) {
  const auto wv = model.word_vector(w);
  const auto dv = model.doc_vector(d);
  double dot = 0.0;
  for (std::size_t i = 0; i < wv.size(); ++i)
    dot += static_cast<double>(wv[i]) * dv[i];
  return std::exp(dot);
}

QueryVector compose_query_vector(std::span<const WordId> words,
                                 const EmbeddingModel& model) {
  if (words.empty()) throw data_error("query has no words");
  QueryVector q;
  q.values.assign(model.dim(), 0.0);
  for (WordId w : words) {
    const auto wv = model.word_vector(w);
    for (std::size_t i = 0; i < wv.size(); ++i) q.values[i] += wv[i];
  }
  double sq = 0.0;
  for (double x : q.values) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 1e-12))
    throw data_error("degenerate query: word vectors sum to zero");
  for (double& x : q.values) x /= norm;
  q.term_count = static_cast<std::uint32_t>(words.size());
  return q;
}

std::vector<double> subcollection_vector(std::span<const DocId> doc_ids,
                                         const EmbeddingModel& model) {
  if (doc_ids.empty()) throw data_error("subcollection has no documents");
  std::vector<double> mean(model.dim(), 0.0);
  for (DocId d : doc_ids) {
    const auto dv = model.doc_vector(d);
    for (std::size_t i = 0; i < dv.size(); ++i) mean[i] += dv[i];
  }
  const double inv = 1.0 / static_cast<double>(doc_ids.size());
  for (double& x : mean) x *= inv;
  return mean;
}

}  // namespace emap
