#include "emap/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emap/io.hpp"
#include "emap/rng.hpp"

namespace emap {

namespace {

constexpr char kAssignMagic[4] = {'E', 'M', 'C', 'A'};
constexpr std::uint32_t kAssignVersion = 1;

double dot_fd(std::span<const float> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

}  // namespace

void ClusterAssignment::save(const std::filesystem::path& path) const {
  BinaryWriter w(path);
  w.magic(kAssignMagic, kAssignVersion);
  w.u32(k);
  const std::uint32_t dim =
      centroids.empty() ? 0 : static_cast<std::uint32_t>(centroids[0].size());
  w.u32(dim);
  w.u64(cluster_of_doc.size());
  w.f64(objective);
  for (const auto& c : centroids) w.f32_block(c);
  w.u32_block(cluster_of_doc);
}

ClusterAssignment ClusterAssignment::load(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kAssignMagic, kAssignVersion);
  ClusterAssignment a;
  a.k = r.u32();
  const std::uint32_t dim = r.u32();
  const std::uint64_t m = r.u64();
  a.objective = r.f64();
  a.centroids.assign(a.k, std::vector<float>(dim));
  for (auto& c : a.centroids) r.f32_block(c);
  a.cluster_of_doc.resize(m);
  r.u32_block(a.cluster_of_doc);
  return a;
}

ClusterAssignment spherical_kmeans(const EmbeddingModel& model, std::uint32_t k,
                                   const KmeansOptions& options) {
  const std::size_t m = model.doc_count();
  const std::uint32_t dim = model.dim();
  if (k < 1) throw data_error("k must be >= 1");
  if (k > m)
    throw data_error("k = " + std::to_string(k) + " exceeds document count " +
                     std::to_string(m));

  Rng rng(options.seed);

  // k-means++ seeding with cosine distance (1 - cos, floored at 0)
  std::vector<std::vector<double>> centroids;
  centroids.reserve(k);
  {
    const DocId first = static_cast<DocId>(rng.uniform_index(m));
    const auto fv = model.doc_vector(first);
    centroids.emplace_back(fv.begin(), fv.end());
    std::vector<double> dist(m);
    for (std::uint32_t c = 1; c < k; ++c) {
      double total = 0.0;
      for (DocId d = 0; d < m; ++d) {
        double best = std::numeric_limits<double>::lowest();
        for (const auto& cen : centroids)
          best = std::max(best, dot_fd(model.doc_vector(d), cen));
        dist[d] = std::max(0.0, 1.0 - best);
        total += dist[d];
      }
      DocId pick = 0;
      if (total > 0.0) {
        double target = rng.uniform() * total;
        for (DocId d = 0; d < m; ++d) {
          target -= dist[d];
          if (target <= 0.0) {
            pick = d;
            break;
          }
        }
      } else {
        pick = static_cast<DocId>(rng.uniform_index(m));
      }
      const auto pv = model.doc_vector(pick);
      centroids.emplace_back(pv.begin(), pv.end());
    }
  }

  std::vector<std::uint32_t> assign(m, 0);
  std::vector<double> cos_to_centroid(m, 0.0);

  auto assign_all = [&]() {
    double total = 0.0;
    for (DocId d = 0; d < m; ++d) {
      const auto dv = model.doc_vector(d);
      double best = std::numeric_limits<double>::lowest();
      std::uint32_t best_c = 0;
      for (std::uint32_t c = 0; c < centroids.size(); ++c) {
        const double cs = dot_fd(dv, centroids[c]);
        if (cs > best) {
          best = cs;
          best_c = c;
        }
      }
      assign[d] = best_c;
      cos_to_centroid[d] = best;
      total += best;
    }
    return total / static_cast<double>(m);
  };

  ClusterAssignment result;
  result.k = k;
  result.cluster_of_doc.resize(m);

  double obj = assign_all();
  result.objective_trace.push_back(obj);

  for (std::uint32_t iter = 0; iter < options.max_iters; ++iter) {
    // centroid update: normalized mean of members
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::uint64_t> sizes(k, 0);
    for (DocId d = 0; d < m; ++d) {
      const auto dv = model.doc_vector(d);
      auto& s = sums[assign[d]];
      for (std::uint32_t i = 0; i < dim; ++i) s[i] += dv[i];
      ++sizes[assign[d]];
    }
    // reseed empty clusters with the worst-assigned document
    for (std::uint32_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      DocId worst = 0;
      double worst_cos = std::numeric_limits<double>::max();
      for (DocId d = 0; d < m; ++d) {
        if (sizes[assign[d]] <= 1) continue;  // do not empty another cluster
        if (cos_to_centroid[d] < worst_cos) {
          worst_cos = cos_to_centroid[d];
          worst = d;
        }
      }
      const std::uint32_t from = assign[worst];
      const auto wv = model.doc_vector(worst);
      for (std::uint32_t i = 0; i < dim; ++i) {
        sums[from][i] -= wv[i];
        sums[c][i] = wv[i];
      }
      --sizes[from];
      sizes[c] = 1;
      assign[worst] = c;
      cos_to_centroid[worst] = 1.0;
    }
    for (std::uint32_t c = 0; c < k; ++c) {
      double sq = 0.0;
      for (double x : sums[c]) sq += x * x;
      const double norm = std::sqrt(sq);
      if (norm > 0.0) {
        for (std::uint32_t i = 0; i < dim; ++i) centroids[c][i] = sums[c][i] / norm;
      }
      // zero-sum cluster keeps its previous centroid
    }

    const double new_obj = assign_all();
    result.objective_trace.push_back(new_obj);
    const double improvement = new_obj - obj;
    obj = new_obj;
    if (improvement < options.tol * std::max(std::fabs(obj), 1e-12)) break;
  }

  result.objective = obj;
  result.cluster_of_doc = assign;
  result.centroids.assign(k, std::vector<float>(dim));
  for (std::uint32_t c = 0; c < k; ++c) {
    // store unit-norm float centroids
    std::vector<double> cd = centroids[c];
    double sq = 0.0;
    for (double x : cd) sq += x * x;
    const double norm = std::sqrt(sq);
    require(norm > 0.0, "zero centroid after clustering");
    for (std::uint32_t i = 0; i < dim; ++i)
      result.centroids[c][i] = static_cast<float>(cd[i] / norm);
  }
  return result;
}

CorpusManifest reallocate(const CorpusReader& corpus,
                          const ClusterAssignment& assignment,
                          std::uint64_t partition_budget,
                          const std::filesystem::path& out_dir) {
  const CorpusManifest& src = corpus.manifest();
  if (assignment.cluster_of_doc.size() != src.num_documents)
    throw data_error("assignment covers " +
                     std::to_string(assignment.cluster_of_doc.size()) +
                     " documents, corpus has " +
                     std::to_string(src.num_documents));

  std::vector<Document> docs = corpus.read_all_documents();
  for (const Document& d : docs) {
    if (document_record_bytes(d) > partition_budget)
      throw data_error("partition budget smaller than document " +
                       std::to_string(d.doc_id));
  }

  // clusters by descending size, ties by cluster id; docs in id order within
  std::vector<std::vector<DocId>> members(assignment.k);
  for (DocId d = 0; d < docs.size(); ++d)
    members[assignment.cluster_of_doc[d]].push_back(d);
  std::vector<std::uint32_t> order(assignment.k);
  for (std::uint32_t c = 0; c < assignment.k; ++c) order[c] = c;
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (members[a].size() != members[b].size())
      return members[a].size() > members[b].size();
    return a < b;
  });

  std::vector<const Document*> in_order;
  in_order.reserve(docs.size());
  for (std::uint32_t c : order)
    for (DocId d : members[c]) in_order.push_back(&docs[d]);

  const auto groups = pack_by_budget(in_order, partition_budget);

  CorpusPaths paths{out_dir};
  std::filesystem::create_directories(paths.sub_dir());

  CorpusManifest manifest;
  manifest.format = src.format;
  manifest.tokenizer = src.tokenizer;
  manifest.partition_budget = partition_budget;
  manifest.num_documents = src.num_documents;
  manifest.num_subcollections = groups.size();
  manifest.vocab_size = src.vocab_size;
  manifest.total_tokens = src.total_tokens;
  manifest.content_fingerprint = src.content_fingerprint;

  for (SubId sid = 0; sid < groups.size(); ++sid) {
    Subcollection s;
    s.sub_id = sid;
    s.member_doc_ids = groups[sid];
    std::vector<Document> sub_docs;
    sub_docs.reserve(s.member_doc_ids.size());
    for (DocId did : s.member_doc_ids) {
      sub_docs.push_back(docs[did]);
      s.byte_size += document_record_bytes(docs[did]);
    }
    write_subcollection_file(paths.sub(sid), sid, sub_docs);
    manifest.subcollections.push_back(std::move(s));
  }

  std::filesystem::copy_file(corpus.paths().vocab(), paths.vocab(),
                             std::filesystem::copy_options::overwrite_existing);
  if (std::filesystem::exists(corpus.paths().ratings()))
    std::filesystem::copy_file(corpus.paths().ratings(), paths.ratings(),
                               std::filesystem::copy_options::overwrite_existing);
  if (std::filesystem::exists(corpus.paths().ratings_test()))
    std::filesystem::copy_file(corpus.paths().ratings_test(), paths.ratings_test(),
                               std::filesystem::copy_options::overwrite_existing);
  manifest.save(paths.manifest());
  return manifest;
}

}  // namespace emap
