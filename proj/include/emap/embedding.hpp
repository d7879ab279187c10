#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "emap/corpus.hpp"

namespace emap {

struct TrainingConfig {
  std::uint32_t dim = 100;        // lambda_1
  std::uint32_t epochs = 10;
  std::uint32_t negatives = 5;    // noise words per positive pair
  double noise_exponent = 0.75;   // unigram^0.75 noise distribution
  double initial_lr = 0.025;
  double final_lr = 0.0001;
  std::uint64_t seed = 1;
  std::uint32_t workers = 1;      // 1 is the deterministic contract

  void validate() const;

  bool operator==(const TrainingConfig& other) const = default;
};

// Unit-norm word and document vectors. Word vectors are the output-side
// embeddings, the ones for which exp(w . d) tracks p(w|d).
class EmbeddingModel {
public:
  EmbeddingModel() = default;
  EmbeddingModel(TrainingConfig config, std::size_t vocab_size,
                 std::size_t doc_count, std::uint64_t corpus_fingerprint);

  const TrainingConfig& config() const { return config_; }
  std::uint32_t dim() const { return config_.dim; }
  std::size_t vocab_size() const { return num_words_; }
  std::size_t doc_count() const { return num_docs_; }
  std::uint64_t corpus_fingerprint() const { return fingerprint_; }

  std::span<const float> word_vector(WordId w) const;
  std::span<const float> doc_vector(DocId d) const;
  std::span<float> word_vector_mut(WordId w);
  std::span<float> doc_vector_mut(DocId d);

  void save(const std::filesystem::path& path) const;
  static EmbeddingModel load(const std::filesystem::path& path);

  bool operator==(const EmbeddingModel& other) const = default;

private:
  TrainingConfig config_;
  std::size_t num_words_ = 0;
  std::size_t num_docs_ = 0;
  std::uint64_t fingerprint_ = 0;
  std::vector<float> word_vecs_;  // V x dim row-major
  std::vector<float> doc_vecs_;   // M x dim row-major
};

// PV-DBOW with negative sampling; window spans the whole document. Every
// (word, document) occurrence pair takes one SGD step against `negatives`
// noise words drawn from unigram^noise_exponent, and each touched vector is
// projected back to unit length.
EmbeddingModel train_pvdbow(const std::vector<Document>& docs,
                            const Vocabulary& vocab,
                            const TrainingConfig& config,
                            std::uint64_t corpus_fingerprint);

// exp(w . d); in [e^-1, e^1] for unit vectors.
double word_doc_score(WordId w, DocId d, const EmbeddingModel& model);

struct QueryVector {
  std::vector<double> values;     // unit norm
  std::uint32_t term_count = 0;   // l, the number of query words

  std::span<const double> span() const { return values; }
};

// Element-wise sum of word vectors, normalized to unit length. A sum that
// cancels to zero is a degenerate query and is rejected.
QueryVector compose_query_vector(std::span<const WordId> words,
                                 const EmbeddingModel& model);

// Arithmetic mean of the member documents' vectors. Not re-normalized:
// sign hashing ignores positive scale.
std::vector<double> subcollection_vector(std::span<const DocId> doc_ids,
                                         const EmbeddingModel& model);

}  // namespace emap
