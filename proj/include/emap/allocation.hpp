#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "emap/corpus.hpp"
#include "emap/embedding.hpp"

namespace emap {

struct ClusterAssignment {
  std::uint32_t k = 0;
  std::vector<std::vector<float>> centroids;  // unit norm
  std::vector<std::uint32_t> cluster_of_doc;  // doc_id -> cluster
  double objective = 0.0;                     // mean cosine to assigned centroid
  std::vector<double> objective_trace;        // one entry per iteration

  void save(const std::filesystem::path& path) const;
  static ClusterAssignment load(const std::filesystem::path& path);
};

struct KmeansOptions {
  std::uint32_t max_iters = 50;
  double tol = 1e-6;  // relative objective improvement
  std::uint64_t seed = 1;
};

// Spherical k-means over unit-norm document vectors: assign to the
// max-cosine centroid, recompute centroids as normalized means, k-means++
// style seeding with cosine distance. An emptied cluster is reseeded with
// the currently worst-assigned document.
ClusterAssignment spherical_kmeans(const EmbeddingModel& model, std::uint32_t k,
                                   const KmeansOptions& options);

// Rewrites the corpus under out_dir with subcollections packed cluster by
// cluster (descending cluster size, original doc order inside a cluster,
// budget splits within large clusters). Document ids and contents are
// unchanged; only the grouping moves.
CorpusManifest reallocate(const CorpusReader& corpus,
                          const ClusterAssignment& assignment,
                          std::uint64_t partition_budget,
                          const std::filesystem::path& out_dir);

}  // namespace emap
