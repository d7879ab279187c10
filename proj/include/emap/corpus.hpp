#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "emap/common.hpp"

namespace emap {

struct Document {
  DocId doc_id = 0;
  std::vector<WordId> tokens;  // non-empty after min_count filtering
  std::string source_key;      // line number, record id, or user id
};

class Vocabulary {
public:
  Vocabulary() = default;

  // word ids are dense 0..V-1, assigned by descending frequency,
  // ties broken lexicographically.
  static Vocabulary from_counts(std::unordered_map<std::string, std::uint64_t> counts,
                                std::uint32_t min_count);

  std::size_t size() const { return words_.size(); }
  std::uint64_t total_tokens() const { return total_tokens_; }

  const std::string& word(WordId id) const;
  std::uint64_t frequency(WordId id) const;
  std::optional<WordId> id_of(const std::string& word) const;

  // Throws data_error naming the word when absent.
  WordId require_id(const std::string& word) const;

  const std::vector<std::uint64_t>& frequencies() const { return freqs_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> freqs_;
  std::unordered_map<std::string, WordId> index_;
  std::uint64_t total_tokens_ = 0;
};

// Tokens are maximal runs of ASCII alphanumerics or non-ASCII bytes; ASCII
// letters are lowercased, everything else passes through. No stemming.
std::vector<std::string> tokenize(const std::string& text);

// Counts a flat token stream and drops words below min_count. total_tokens
// reflects only surviving occurrences.
Vocabulary build_vocabulary(const std::vector<std::string>& tokens,
                            std::uint32_t min_count);

// log((#(w,d)/|d|) * (|D|/#(w,D))). Throws data_error when w does not occur
// in d (the value is undefined there).
double empirical_pmi(WordId w, const Document& d, const Vocabulary& vocab);

struct Subcollection {
  SubId sub_id = 0;
  std::vector<DocId> member_doc_ids;
  std::uint64_t byte_size = 0;  // serialized member payload, excludes file header
};

enum class CorpusFormat : std::uint8_t {
  plain_lines = 0,
  json_records = 1,
  review_records = 2,
};

const char* format_name(CorpusFormat f);
CorpusFormat parse_format(const std::string& name);

struct TokenizerConfig {
  std::uint32_t min_count = 5;
};

struct CorpusManifest {
  CorpusFormat format = CorpusFormat::plain_lines;
  TokenizerConfig tokenizer;
  std::uint64_t partition_budget = 0;
  std::uint64_t num_documents = 0;     // M
  std::uint64_t num_subcollections = 0;  // N
  std::uint64_t vocab_size = 0;        // V
  std::uint64_t total_tokens = 0;      // |D|
  // Layout-independent hash of document contents; survives reallocation.
  std::uint64_t content_fingerprint = 0;
  std::vector<Subcollection> subcollections;

  void save(const std::filesystem::path& path) const;
  static CorpusManifest load(const std::filesystem::path& path);

  std::uint64_t total_payload_bytes() const;
};

struct IngestOptions {
  CorpusFormat format = CorpusFormat::plain_lines;
  TokenizerConfig tokenizer;
  std::uint64_t partition_budget = 32 * 1024;
  // review-records only: hold out this fraction of each of the first
  // holdout_users users' ratings (and their review texts) as test data.
  double holdout_fraction = 0.0;
  std::uint32_t holdout_users = 0;
  std::uint64_t holdout_seed = 0;
};

struct IngestStats {
  std::uint64_t records_read = 0;
  std::uint64_t records_skipped = 0;   // malformed, counted not fatal
  std::uint64_t documents_dropped = 0; // empty after filtering
  std::uint64_t ratings_held_out = 0;
};

// Tokenizes input, builds the vocabulary, filters, and lays documents out
// into byte-budgeted subcollections in input order. Writes manifest.bin,
// vocab.bin, subs/sub_NNNNNN.bin (and ratings.bin / ratings_test.bin for
// review-records) under out_dir.
CorpusManifest ingest(const std::filesystem::path& input_path,
                      const std::filesystem::path& out_dir,
                      const IngestOptions& options,
                      IngestStats* stats = nullptr);

struct CorpusPaths {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "manifest.bin"; }
  std::filesystem::path vocab() const { return root / "vocab.bin"; }
  std::filesystem::path ratings() const { return root / "ratings.bin"; }
  std::filesystem::path ratings_test() const { return root / "ratings_test.bin"; }
  std::filesystem::path sub(SubId id) const;
  std::filesystem::path sub_dir() const { return root / "subs"; }
};

struct LoadedSubcollection {
  SubId sub_id = 0;
  std::vector<Document> documents;
};

// Read access to an emitted corpus. Tracks bytes read from subcollection
// files so query executors can report I/O against the sampling rate.
class CorpusReader {
public:
  explicit CorpusReader(const std::filesystem::path& root);

  const CorpusManifest& manifest() const { return manifest_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const CorpusPaths& paths() const { return paths_; }

  LoadedSubcollection read_subcollection(SubId id) const;
  std::vector<Document> read_all_documents() const;

  std::uint64_t bytes_read() const { return bytes_read_; }
  void reset_bytes_read() const { bytes_read_ = 0; }

private:
  CorpusPaths paths_;
  CorpusManifest manifest_;
  Vocabulary vocab_;
  mutable std::uint64_t bytes_read_ = 0;
};

// Serialized size of one document record inside a subcollection file.
std::uint64_t document_record_bytes(const Document& doc);

// Writes one subcollection file. Used by ingest and by reallocation.
void write_subcollection_file(const std::filesystem::path& path, SubId sub_id,
                              const std::vector<Document>& docs);

// Groups documents into subcollections in the order given, cutting when the
// byte budget would be exceeded. Every document lands in exactly one group.
std::vector<std::vector<DocId>> pack_by_budget(
    const std::vector<const Document*>& docs_in_order,
    std::uint64_t partition_budget);

std::uint64_t content_fingerprint(const std::vector<Document>& docs_by_id,
                                  std::uint64_t vocab_size);

}  // namespace emap
