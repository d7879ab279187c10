#include "emap/index.hpp"

#include "emap/io.hpp"

namespace emap {

namespace {

constexpr char kIndexMagic[4] = {'E', 'M', 'A', 'P'};
constexpr std::uint32_t kIndexVersion = 1;

// Signatures are packed back to back into one contiguous bit stream, so the
// payload is exactly ceil(count*bits/8) bytes with no per-entry padding.
std::vector<std::uint8_t> pack_signatures(const std::vector<Signature>& sigs,
                                          std::uint32_t bits) {
  const std::uint64_t total_bits = static_cast<std::uint64_t>(sigs.size()) * bits;
  std::vector<std::uint8_t> bytes((total_bits + 7) / 8, 0);
  std::uint64_t pos = 0;
  for (const Signature& s : sigs) {
    require(s.length() == bits, "signature length mismatch while packing");
    for (std::uint32_t i = 0; i < bits; ++i, ++pos) {
      if (s.get(i)) bytes[pos >> 3] |= static_cast<std::uint8_t>(1u << (pos & 7));
    }
  }
  return bytes;
}

std::vector<Signature> unpack_signatures(const std::vector<std::uint8_t>& bytes,
                                         std::uint64_t count,
                                         std::uint32_t bits) {
  std::vector<Signature> sigs(count, Signature(bits));
  std::uint64_t pos = 0;
  for (auto& s : sigs) {
    for (std::uint32_t i = 0; i < bits; ++i, ++pos) {
      if ((bytes[pos >> 3] >> (pos & 7)) & 1u) s.set(i, true);
    }
  }
  return sigs;
}

}  // namespace

std::uint64_t index_signature_bytes(std::uint64_t vocab_size,
                                    std::uint64_t sub_count,
                                    std::uint32_t bits) {
  return ((vocab_size + sub_count) * bits + 7) / 8;
}

std::uint64_t index_vector_baseline_bytes(std::uint64_t vocab_size,
                                          std::uint64_t sub_count,
                                          std::uint32_t dim,
                                          std::uint32_t float_bytes) {
  return (vocab_size + sub_count) * dim * float_bytes;
}

ApproxIndex build_index(const EmbeddingModel& model,
                        const CorpusManifest& manifest, const LshConfig& config,
                        bool keep_exact) {
  if (model.corpus_fingerprint() != manifest.content_fingerprint)
    throw data_error("model/corpus fingerprint mismatch: model was trained on "
                     "different content");
  if (model.doc_count() != manifest.num_documents ||
      model.vocab_size() != manifest.vocab_size)
    throw data_error("model dimensions do not match the manifest");

  ApproxIndex idx;
  idx.dim = model.dim();
  idx.bits = config.bits;
  idx.hyperplane_seed = config.seed;
  idx.model_seed = model.config().seed;
  idx.corpus_fingerprint = manifest.content_fingerprint;
  idx.partition_map = manifest.subcollections;
  idx.planes = generate_hyperplanes(model.dim(), config.bits, config.seed);

  idx.word_signatures.reserve(model.vocab_size());
  for (WordId w = 0; w < model.vocab_size(); ++w)
    idx.word_signatures.push_back(sign_hash(model.word_vector(w), idx.planes));

  idx.sub_signatures.reserve(manifest.subcollections.size());
  for (const Subcollection& s : manifest.subcollections) {
    if (s.member_doc_ids.empty())
      throw data_error("empty subcollection " + std::to_string(s.sub_id));
    const auto vec = subcollection_vector(s.member_doc_ids, model);
    idx.sub_signatures.push_back(sign_hash(std::span<const double>(vec), idx.planes));
    if (keep_exact) idx.exact_sub_vectors.push_back(vec);
  }

  if (keep_exact) {
    idx.exact_word_vectors.reserve(model.vocab_size());
    for (WordId w = 0; w < model.vocab_size(); ++w) {
      const auto wv = model.word_vector(w);
      idx.exact_word_vectors.emplace_back(wv.begin(), wv.end());
    }
  }
  return idx;
}

void save_index(const ApproxIndex& index, const std::filesystem::path& path) {
  BinaryWriter w(path);
  w.magic(kIndexMagic, kIndexVersion);
  w.u32(index.dim);
  w.u32(index.bits);
  w.u64(index.word_signatures.size());
  w.u64(index.sub_signatures.size());
  w.u64(index.hyperplane_seed);
  w.u64(index.model_seed);
  w.u64(index.corpus_fingerprint);
  w.u8(index.has_exact() ? 1 : 0);

  const auto word_block = pack_signatures(index.word_signatures, index.bits);
  const auto sub_block = pack_signatures(index.sub_signatures, index.bits);
  w.u64(static_cast<std::uint64_t>(index.word_signatures.size()) * index.bits);
  w.raw(word_block.data(), word_block.size());
  w.u64(static_cast<std::uint64_t>(index.sub_signatures.size()) * index.bits);
  w.raw(sub_block.data(), sub_block.size());

  if (index.has_exact()) {
    for (const auto& v : index.exact_word_vectors) w.f32_block(v);
    for (const auto& v : index.exact_sub_vectors)
      for (double x : v) w.f64(x);
  }
}

ApproxIndex load_index(const std::filesystem::path& path,
                       const CorpusManifest& manifest) {
  BinaryReader r(path);
  r.expect_magic(kIndexMagic, kIndexVersion);
  ApproxIndex idx;
  idx.dim = r.u32();
  idx.bits = r.u32();
  const std::uint64_t v = r.u64();
  const std::uint64_t n = r.u64();
  idx.hyperplane_seed = r.u64();
  idx.model_seed = r.u64();
  idx.corpus_fingerprint = r.u64();
  const bool has_exact = r.u8() != 0;

  if (idx.corpus_fingerprint != manifest.content_fingerprint)
    throw data_error("index fingerprint does not match the corpus manifest");
  if (n != manifest.num_subcollections || v != manifest.vocab_size)
    throw data_error("index counts do not match the corpus manifest");

  auto read_block = [&](std::uint64_t count) {
    const std::uint64_t bit_len = r.u64();
    if (bit_len != count * idx.bits)
      throw data_error("signature block length mismatch in " + path.string());
    std::vector<std::uint8_t> bytes((bit_len + 7) / 8);
    r.raw(bytes.data(), bytes.size());
    return unpack_signatures(bytes, count, idx.bits);
  };
  idx.word_signatures = read_block(v);
  idx.sub_signatures = read_block(n);

  if (has_exact) {
    idx.exact_word_vectors.assign(v, std::vector<float>(idx.dim));
    for (auto& vec : idx.exact_word_vectors) r.f32_block(vec);
    idx.exact_sub_vectors.assign(n, std::vector<double>(idx.dim));
    for (auto& vec : idx.exact_sub_vectors)
      for (double& x : vec) x = r.f64();
  }

  idx.partition_map = manifest.subcollections;
  idx.planes = generate_hyperplanes(idx.dim, idx.bits, idx.hyperplane_seed);
  return idx;
}

}  // namespace emap
