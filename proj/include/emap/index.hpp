#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "emap/corpus.hpp"
#include "emap/embedding.hpp"
#include "emap/lsh.hpp"

namespace emap {

struct LshConfig {
  std::uint32_t bits = 100;  // lambda_2
  std::uint64_t seed = 7;
};

// Signatures for every vocabulary word and every subcollection, sharing one
// hyperplane set. The partition map is carried from the manifest; the index
// file itself stores only signatures plus a fixed-size header (the
// hyperplane matrix is regenerated from its seed on load).
struct ApproxIndex {
  std::uint32_t dim = 0;    // lambda_1
  std::uint32_t bits = 0;   // lambda_2
  std::uint64_t hyperplane_seed = 0;
  std::uint64_t model_seed = 0;
  std::uint64_t corpus_fingerprint = 0;
  std::vector<Signature> word_signatures;  // V entries
  std::vector<Signature> sub_signatures;   // N entries
  // exact vectors, kept only when built with keep_exact
  std::vector<std::vector<float>> exact_word_vectors;
  std::vector<std::vector<double>> exact_sub_vectors;
  std::vector<Subcollection> partition_map;  // from the manifest
  HyperplaneSet planes;

  bool has_exact() const { return !exact_sub_vectors.empty(); }
  std::size_t vocab_size() const { return word_signatures.size(); }
  std::size_t sub_count() const { return sub_signatures.size(); }

  Signature hash_query(std::span<const double> vec) const {
    return sign_hash(vec, planes);
  }
};

ApproxIndex build_index(const EmbeddingModel& model,
                        const CorpusManifest& manifest, const LshConfig& config,
                        bool keep_exact = false);

void save_index(const ApproxIndex& index, const std::filesystem::path& path);

// The manifest supplies the partition map and is checked against the stored
// corpus fingerprint.
ApproxIndex load_index(const std::filesystem::path& path,
                       const CorpusManifest& manifest);

// Signature payload bytes for a saved index: ceil((V+N)*bits / 8).
std::uint64_t index_signature_bytes(std::uint64_t vocab_size,
                                    std::uint64_t sub_count, std::uint32_t bits);

// Size of the stored real-valued vectors the signatures replace, at the
// given float width (4 or 8 bytes).
std::uint64_t index_vector_baseline_bytes(std::uint64_t vocab_size,
                                          std::uint64_t sub_count,
                                          std::uint32_t dim,
                                          std::uint32_t float_bytes);

}  // namespace emap
