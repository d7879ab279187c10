#include "emap/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "emap/io.hpp"
#include "emap/rng.hpp"

namespace emap {

namespace {

constexpr char kManifestMagic[4] = {'E', 'M', 'C', 'M'};
constexpr char kVocabMagic[4] = {'E', 'M', 'V', 'C'};
constexpr char kSubMagic[4] = {'E', 'M', 'S', 'C'};
constexpr char kRatingsMagic[4] = {'E', 'M', 'R', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

bool is_token_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (is_token_char(c)) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                         : static_cast<char>(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

Vocabulary Vocabulary::from_counts(
    std::unordered_map<std::string, std::uint64_t> counts,
    std::uint32_t min_count) {
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  kept.reserve(counts.size());
  for (auto& [word, n] : counts) {
    if (n >= min_count) kept.emplace_back(word, n);
  }
  if (kept.empty()) throw data_error("vocabulary empty after min_count filtering");

  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.words_.reserve(kept.size());
  v.freqs_.reserve(kept.size());
  for (auto& [word, n] : kept) {
    v.index_.emplace(word, static_cast<WordId>(v.words_.size()));
    v.words_.push_back(std::move(word));
    v.freqs_.push_back(n);
    v.total_tokens_ += n;
  }
  return v;
}

const std::string& Vocabulary::word(WordId id) const {
  require(id < words_.size(), "Vocabulary::word: id out of range");
  return words_[id];
}

std::uint64_t Vocabulary::frequency(WordId id) const {
  require(id < freqs_.size(), "Vocabulary::frequency: id out of range");
  return freqs_[id];
}

std::optional<WordId> Vocabulary::id_of(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

WordId Vocabulary::require_id(const std::string& word) const {
  auto id = id_of(word);
  if (!id) throw data_error("word not in vocabulary: '" + word + "'");
  return *id;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  BinaryWriter w(path);
  w.magic(kVocabMagic, kFormatVersion);
  w.u64(words_.size());
  w.u64(total_tokens_);
  for (std::size_t i = 0; i < words_.size(); ++i) {
    w.u64(freqs_[i]);
    w.str(words_[i]);
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kVocabMagic, kFormatVersion);
  const std::uint64_t n = r.u64();
  Vocabulary v;
  v.total_tokens_ = r.u64();
  v.words_.reserve(n);
  v.freqs_.reserve(n);
  std::uint64_t sum = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    v.freqs_.push_back(r.u64());
    v.words_.push_back(r.str());
    v.index_.emplace(v.words_.back(), static_cast<WordId>(i));
    sum += v.freqs_.back();
  }
  if (sum != v.total_tokens_)
    throw data_error("vocabulary frequencies inconsistent with total in " +
                     path.string());
  return v;
}

Vocabulary build_vocabulary(const std::vector<std::string>& tokens,
                            std::uint32_t min_count) {
  if (min_count < 1) throw data_error("min_count must be >= 1");
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& t : tokens) ++counts[t];
  return Vocabulary::from_counts(std::move(counts), min_count);
}

double empirical_pmi(WordId w, const Document& d, const Vocabulary& vocab) {
  std::uint64_t in_doc = 0;
  for (WordId t : d.tokens)
    if (t == w) ++in_doc;
  if (in_doc == 0)
    throw data_error("empirical_pmi: word " + std::to_string(w) +
                     " does not occur in document " + std::to_string(d.doc_id));
  const double p_w_d = static_cast<double>(in_doc) / static_cast<double>(d.tokens.size());
  const double corpus_rate = static_cast<double>(vocab.frequency(w)) /
                             static_cast<double>(vocab.total_tokens());
  return std::log(p_w_d / corpus_rate);
}

const char* format_name(CorpusFormat f) {
  switch (f) {
    case CorpusFormat::plain_lines: return "plain-lines";
    case CorpusFormat::json_records: return "json-records";
    case CorpusFormat::review_records: return "review-records";
  }
  throw internal_error("unknown corpus format");
}

CorpusFormat parse_format(const std::string& name) {
  if (name == "plain-lines") return CorpusFormat::plain_lines;
  if (name == "json-records") return CorpusFormat::json_records;
  if (name == "review-records") return CorpusFormat::review_records;
  throw data_error("unknown corpus format: '" + name + "'");
}

std::filesystem::path CorpusPaths::sub(SubId id) const {
  char name[32];
  std::snprintf(name, sizeof(name), "sub_%06u.bin", id);
  return sub_dir() / name;
}

std::uint64_t document_record_bytes(const Document& doc) {
  // doc_id u32, token count u32, key length u16, key bytes, tokens u32 each
  return 4 + 4 + 2 + doc.source_key.size() + 4 * doc.tokens.size();
}

void write_subcollection_file(const std::filesystem::path& path, SubId sub_id,
                              const std::vector<Document>& docs) {
  BinaryWriter w(path);
  w.magic(kSubMagic, kFormatVersion);
  w.u32(sub_id);
  w.u32(static_cast<std::uint32_t>(docs.size()));
  for (const Document& d : docs) {
    w.u32(d.doc_id);
    w.u32(static_cast<std::uint32_t>(d.tokens.size()));
    w.str(d.source_key);
    w.u32_block(d.tokens);
  }
}

std::vector<std::vector<DocId>> pack_by_budget(
    const std::vector<const Document*>& docs_in_order,
    std::uint64_t partition_budget) {
  if (partition_budget == 0) throw data_error("partition budget must be > 0");
  std::vector<std::vector<DocId>> groups;
  std::uint64_t used = 0;
  for (const Document* d : docs_in_order) {
    const std::uint64_t sz = document_record_bytes(*d);
    if (groups.empty() || (used > 0 && used + sz > partition_budget)) {
      groups.emplace_back();
      used = 0;
    }
    groups.back().push_back(d->doc_id);
    used += sz;
  }
  return groups;
}

std::uint64_t content_fingerprint(const std::vector<Document>& docs_by_id,
                                  std::uint64_t vocab_size) {
  Fnv1a h;
  h.update_u64(docs_by_id.size());
  h.update_u64(vocab_size);
  for (const Document& d : docs_by_id) {
    h.update_u32(d.doc_id);
    h.update_u64(d.tokens.size());
    h.update(d.tokens.data(), d.tokens.size() * 4);
    h.update(d.source_key.data(), d.source_key.size());
  }
  return h.digest();
}

std::uint64_t CorpusManifest::total_payload_bytes() const {
  std::uint64_t total = 0;
  for (const auto& s : subcollections) total += s.byte_size;
  return total;
}

void CorpusManifest::save(const std::filesystem::path& path) const {
  BinaryWriter w(path);
  w.magic(kManifestMagic, kFormatVersion);
  w.u8(static_cast<std::uint8_t>(format));
  w.u32(tokenizer.min_count);
  w.u64(partition_budget);
  w.u64(num_documents);
  w.u64(num_subcollections);
  w.u64(vocab_size);
  w.u64(total_tokens);
  w.u64(content_fingerprint);
  for (const auto& s : subcollections) {
    w.u32(s.sub_id);
    w.u64(s.byte_size);
    w.u32(static_cast<std::uint32_t>(s.member_doc_ids.size()));
    w.u32_block(s.member_doc_ids);
  }
}

CorpusManifest CorpusManifest::load(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kManifestMagic, kFormatVersion);
  CorpusManifest m;
  const std::uint8_t fmt = r.u8();
  if (fmt > 2) throw data_error("bad format tag in " + path.string());
  m.format = static_cast<CorpusFormat>(fmt);
  m.tokenizer.min_count = r.u32();
  m.partition_budget = r.u64();
  m.num_documents = r.u64();
  m.num_subcollections = r.u64();
  m.vocab_size = r.u64();
  m.total_tokens = r.u64();
  m.content_fingerprint = r.u64();
  m.subcollections.reserve(m.num_subcollections);
  std::uint64_t doc_total = 0;
  for (std::uint64_t i = 0; i < m.num_subcollections; ++i) {
    Subcollection s;
    s.sub_id = r.u32();
    s.byte_size = r.u64();
    const std::uint32_t n = r.u32();
    if (n == 0) throw data_error("empty subcollection in manifest " + path.string());
    s.member_doc_ids.resize(n);
    r.u32_block(s.member_doc_ids);
    doc_total += n;
    m.subcollections.push_back(std::move(s));
  }
  if (doc_total != m.num_documents)
    throw data_error("manifest document count inconsistent in " + path.string());
  return m;
}

namespace {

struct RawRating {
  DocId user_doc = 0;
  std::string item_id;
  float rating = 0.0f;
};

void write_ratings_file(const std::filesystem::path& path,
                        const std::vector<RawRating>& ratings) {
  BinaryWriter w(path);
  w.magic(kRatingsMagic, kFormatVersion);
  w.u64(ratings.size());
  for (const auto& r : ratings) {
    w.u32(r.user_doc);
    w.str(r.item_id);
    w.f32(r.rating);
  }
}

struct RawDoc {
  std::vector<std::string> tokens;
  std::string source_key;
};

struct ParsedInput {
  std::vector<RawDoc> docs;                 // input order
  std::vector<RawRating> train_ratings;     // review-records only
  std::vector<RawRating> heldout_ratings;   // review-records only
};

// One review before grouping by user.
struct ReviewRecord {
  std::string user_id;
  std::string item_id;
  float rating = 0.0f;
  std::string text;
};

ParsedInput parse_input(const std::filesystem::path& input_path,
                        const IngestOptions& opt, IngestStats& stats) {
  std::ifstream in(input_path);
  if (!in) throw data_error("cannot open input: " + input_path.string());

  ParsedInput out;
  std::string line;

  if (opt.format == CorpusFormat::plain_lines) {
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      ++stats.records_read;
      RawDoc d;
      d.tokens = tokenize(line);
      d.source_key = std::to_string(line_no - 1);
      if (d.tokens.empty()) {
        ++stats.records_skipped;
        continue;
      }
      out.docs.push_back(std::move(d));
    }
    return out;
  }

  if (opt.format == CorpusFormat::json_records) {
    std::uint64_t rec_no = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ++stats.records_read;
      nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
      if (rec.is_discarded() || !rec.contains("text") || !rec["text"].is_string()) {
        ++stats.records_skipped;
        ++rec_no;
        continue;
      }
      RawDoc d;
      d.tokens = tokenize(rec["text"].get<std::string>());
      d.source_key = rec.contains("id") && rec["id"].is_string()
                         ? rec["id"].get<std::string>()
                         : std::to_string(rec_no);
      ++rec_no;
      if (d.tokens.empty()) {
        ++stats.records_skipped;
        continue;
      }
      out.docs.push_back(std::move(d));
    }
    return out;
  }

  // review-records: group all of a user's reviews into one document.
  std::vector<ReviewRecord> reviews;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++stats.records_read;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    const bool ok = !rec.is_discarded() && rec.contains("user_id") &&
                    rec["user_id"].is_string() && rec.contains("item_id") &&
                    rec["item_id"].is_string() && rec.contains("rating") &&
                    rec["rating"].is_number() && rec.contains("text") &&
                    rec["text"].is_string();
    if (!ok) {
      ++stats.records_skipped;
      continue;
    }
    ReviewRecord rv;
    rv.user_id = rec["user_id"].get<std::string>();
    rv.item_id = rec["item_id"].get<std::string>();
    rv.rating = rec["rating"].get<float>();
    rv.text = rec["text"].get<std::string>();
    if (rv.rating < 1.0f || rv.rating > 5.0f) {
      ++stats.records_skipped;
      continue;
    }
    reviews.push_back(std::move(rv));
  }

  // user order = first appearance in the file
  std::unordered_map<std::string, std::uint32_t> user_slot;
  std::vector<std::vector<std::uint32_t>> reviews_of_user;
  for (std::uint32_t i = 0; i < reviews.size(); ++i) {
    auto [it, inserted] =
        user_slot.emplace(reviews[i].user_id,
                          static_cast<std::uint32_t>(reviews_of_user.size()));
    if (inserted) reviews_of_user.emplace_back();
    reviews_of_user[it->second].push_back(i);
  }

  // Hold out a fraction of the first holdout_users users' reviews: their
  // ratings go to the test file and their texts are excluded from the
  // user's document.
  std::vector<bool> held(reviews.size(), false);
  if (opt.holdout_fraction > 0.0 && opt.holdout_users > 0) {
    Rng rng(opt.holdout_seed);
    const std::uint32_t n_users =
        std::min<std::uint32_t>(opt.holdout_users,
                                static_cast<std::uint32_t>(reviews_of_user.size()));
    for (std::uint32_t u = 0; u < n_users; ++u) {
      const auto& idxs = reviews_of_user[u];
      const auto n_hold = static_cast<std::size_t>(
          std::llround(opt.holdout_fraction * static_cast<double>(idxs.size())));
      // sample without replacement
      std::vector<std::uint32_t> pool(idxs);
      for (std::size_t j = 0; j < n_hold && !pool.empty(); ++j) {
        const std::size_t pick = rng.uniform_index(pool.size());
        held[pool[pick]] = true;
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
      }
    }
  }

  for (std::uint32_t u = 0; u < reviews_of_user.size(); ++u) {
    RawDoc d;
    std::vector<RawRating> train, heldout;
    for (std::uint32_t ri : reviews_of_user[u]) {
      const ReviewRecord& rv = reviews[ri];
      RawRating rating{0 /* user_doc assigned later via doc order */,
                       rv.item_id, rv.rating};
      if (held[ri]) {
        heldout.push_back(rating);
        ++stats.ratings_held_out;
      } else {
        train.push_back(rating);
        auto toks = tokenize(rv.text);
        d.tokens.insert(d.tokens.end(), toks.begin(), toks.end());
      }
    }
    d.source_key = reviews[reviews_of_user[u][0]].user_id;
    // Keep user slot alignment: record ratings against the raw doc index;
    // remapping to surviving doc ids happens after filtering.
    const std::uint32_t raw_idx = static_cast<std::uint32_t>(out.docs.size());
    for (auto& r : train) {
      r.user_doc = raw_idx;
      out.train_ratings.push_back(std::move(r));
    }
    for (auto& r : heldout) {
      r.user_doc = raw_idx;
      out.heldout_ratings.push_back(std::move(r));
    }
    out.docs.push_back(std::move(d));
  }
  return out;
}

}  // namespace

CorpusManifest ingest(const std::filesystem::path& input_path,
                      const std::filesystem::path& out_dir,
                      const IngestOptions& options, IngestStats* stats_out) {
  IngestStats stats;
  ParsedInput parsed = parse_input(input_path, options, stats);
  if (parsed.docs.empty()) {
    if (stats.records_read > 0 && stats.records_skipped == stats.records_read)
      throw data_error("all " + std::to_string(stats.records_read) +
                       " input records were malformed or empty");
    throw data_error("no documents survived ingestion from " + input_path.string());
  }

  // vocabulary over all raw tokens
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const RawDoc& d : parsed.docs)
    for (const auto& t : d.tokens) ++counts[t];
  Vocabulary vocab =
      Vocabulary::from_counts(std::move(counts), options.tokenizer.min_count);

  // map tokens to ids, drop documents emptied by filtering, assign dense ids
  std::vector<Document> docs;
  docs.reserve(parsed.docs.size());
  std::vector<std::optional<DocId>> surviving_id(parsed.docs.size());
  for (std::size_t i = 0; i < parsed.docs.size(); ++i) {
    Document d;
    d.tokens.reserve(parsed.docs[i].tokens.size());
    for (const auto& t : parsed.docs[i].tokens) {
      if (auto id = vocab.id_of(t)) d.tokens.push_back(*id);
    }
    if (d.tokens.empty()) {
      ++stats.documents_dropped;
      continue;
    }
    d.doc_id = static_cast<DocId>(docs.size());
    d.source_key = std::move(parsed.docs[i].source_key);
    surviving_id[i] = d.doc_id;
    docs.push_back(std::move(d));
  }
  if (docs.empty())
    throw data_error("no documents survived min_count filtering");

  // partition sequentially by byte budget
  std::vector<const Document*> in_order;
  in_order.reserve(docs.size());
  for (const Document& d : docs) in_order.push_back(&d);
  const auto groups = pack_by_budget(in_order, options.partition_budget);

  CorpusPaths paths{out_dir};
  std::filesystem::create_directories(paths.sub_dir());

  CorpusManifest manifest;
  manifest.format = options.format;
  manifest.tokenizer = options.tokenizer;
  manifest.partition_budget = options.partition_budget;
  manifest.num_documents = docs.size();
  manifest.num_subcollections = groups.size();
  manifest.vocab_size = vocab.size();
  manifest.total_tokens = vocab.total_tokens();
  manifest.content_fingerprint = content_fingerprint(docs, vocab.size());

  for (SubId sid = 0; sid < groups.size(); ++sid) {
    Subcollection s;
    s.sub_id = sid;
    s.member_doc_ids = groups[sid];
    std::vector<Document> members;
    members.reserve(s.member_doc_ids.size());
    for (DocId did : s.member_doc_ids) {
      members.push_back(docs[did]);
      s.byte_size += document_record_bytes(docs[did]);
    }
    write_subcollection_file(paths.sub(sid), sid, members);
    manifest.subcollections.push_back(std::move(s));
  }

  vocab.save(paths.vocab());
  manifest.save(paths.manifest());

  if (options.format == CorpusFormat::review_records) {
    // drop ratings whose user document vanished in filtering, remap the rest
    auto remap = [&](std::vector<RawRating>& rs) {
      std::vector<RawRating> kept;
      kept.reserve(rs.size());
      for (auto& r : rs) {
        if (surviving_id[r.user_doc]) {
          r.user_doc = *surviving_id[r.user_doc];
          kept.push_back(std::move(r));
        }
      }
      rs = std::move(kept);
    };
    remap(parsed.train_ratings);
    remap(parsed.heldout_ratings);
    write_ratings_file(paths.ratings(), parsed.train_ratings);
    if (options.holdout_fraction > 0.0 && options.holdout_users > 0)
      write_ratings_file(paths.ratings_test(), parsed.heldout_ratings);
  }

  if (stats_out) *stats_out = stats;
  return manifest;
}

CorpusReader::CorpusReader(const std::filesystem::path& root)
    : paths_{root},
      manifest_(CorpusManifest::load(paths_.manifest())),
      vocab_(Vocabulary::load(paths_.vocab())) {
  if (manifest_.vocab_size != vocab_.size())
    throw data_error("manifest/vocabulary size mismatch under " + root.string());
}

LoadedSubcollection CorpusReader::read_subcollection(SubId id) const {
  require(id < manifest_.num_subcollections,
          "read_subcollection: sub id out of range");
  const auto path = paths_.sub(id);
  BinaryReader r(path);
  r.expect_magic(kSubMagic, kFormatVersion);
  LoadedSubcollection out;
  out.sub_id = r.u32();
  if (out.sub_id != id)
    throw data_error("subcollection id mismatch in " + path.string());
  const std::uint32_t n_docs = r.u32();
  out.documents.reserve(n_docs);
  for (std::uint32_t i = 0; i < n_docs; ++i) {
    Document d;
    d.doc_id = r.u32();
    const std::uint32_t n_tokens = r.u32();
    d.source_key = r.str();
    d.tokens.resize(n_tokens);
    r.u32_block(d.tokens);
    if (d.tokens.empty())
      throw data_error("empty document in " + path.string());
    out.documents.push_back(std::move(d));
  }
  bytes_read_ += std::filesystem::file_size(path);
  return out;
}

std::vector<Document> CorpusReader::read_all_documents() const {
  std::vector<Document> docs(manifest_.num_documents);
  std::vector<bool> seen(manifest_.num_documents, false);
  for (SubId sid = 0; sid < manifest_.num_subcollections; ++sid) {
    auto sub = read_subcollection(sid);
    for (auto& d : sub.documents) {
      require(d.doc_id < docs.size(), "doc id out of range in subcollection file");
      require(!seen[d.doc_id], "duplicate doc id across subcollections");
      seen[d.doc_id] = true;
      docs[d.doc_id] = std::move(d);
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    require(seen[i], "missing doc id " + std::to_string(i) + " in corpus");
  return docs;
}

}  // namespace emap
