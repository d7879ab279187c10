#include "support/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "emap/rng.hpp"

namespace emap::synth {

ZipfSampler::ZipfSampler(std::uint32_t n, double exponent) {
  require(n > 0, "ZipfSampler: empty support");
  cdf_.resize(n);
  double total = 0.0;
  for (std::uint32_t r = 0; r < n; ++r) {
    total += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
    cdf_[r] = total;
  }
  for (double& c : cdf_) c /= total;
}

std::uint32_t ZipfSampler::sample(double uniform01) const {
  const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), uniform01);
  return static_cast<std::uint32_t>(
      std::min<std::ptrdiff_t>(it - cdf_.begin(),
                               static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
}

std::string topic_word(int topic, std::uint32_t rank) {
  return "t" + std::to_string(topic) + "w" + std::to_string(rank);
}

std::string filler_word(std::uint32_t rank) {
  return "fw" + std::to_string(rank);
}

std::vector<int> write_two_topic_corpus(const std::filesystem::path& path,
                                        const TwoTopicSpec& spec) {
  Rng rng(spec.seed);
  const ZipfSampler topic_zipf(spec.topic_vocab, spec.zipf_exponent);
  const ZipfSampler filler_zipf(spec.filler_vocab, spec.zipf_exponent);

  std::ofstream out(path);
  require(static_cast<bool>(out), "cannot write " + path.string());

  std::vector<int> topics(spec.docs);
  for (std::uint32_t d = 0; d < spec.docs; ++d) {
    topics[d] = spec.sorted_by_topic ? (d < spec.docs / 2 ? 0 : 1)
                                     : static_cast<int>(d % 2);
  }

  std::ostringstream line;
  for (std::uint32_t d = 0; d < spec.docs; ++d) {
    const int topic = topics[d];
    const auto len = spec.min_tokens +
                     rng.uniform_index(spec.max_tokens - spec.min_tokens + 1);
    line.str("");
    for (std::uint64_t i = 0; i < len; ++i) {
      if (i > 0) line << ' ';
      if (rng.uniform() < spec.filler_rate) {
        line << filler_word(filler_zipf.sample(rng.uniform()));
      } else {
        const int t = rng.uniform() < spec.leak ? 1 - topic : topic;
        line << topic_word(t, topic_zipf.sample(rng.uniform()));
      }
    }
    out << line.str() << '\n';
  }
  return topics;
}

PlantedRatioCorpus write_planted_ratio_corpus(const std::filesystem::path& path,
                                              const PlantedRatioSpec& spec) {
  Rng rng(spec.seed);
  PlantedRatioCorpus result;
  for (std::uint32_t w = 0; w < spec.planted_words; ++w)
    result.planted.push_back("pw" + std::to_string(w));

  // per word: counts are min_count + step*j, assigned to documents through a
  // word-specific permutation so the planted gradients do not align
  result.counts.assign(spec.planted_words,
                       std::vector<std::uint32_t>(spec.docs, 0));
  for (std::uint32_t w = 0; w < spec.planted_words; ++w) {
    std::vector<std::uint32_t> perm(spec.docs);
    for (std::uint32_t d = 0; d < spec.docs; ++d) perm[d] = d;
    for (std::uint32_t d = spec.docs; d > 1; --d)
      std::swap(perm[d - 1], perm[rng.uniform_index(d)]);
    for (std::uint32_t j = 0; j < spec.docs; ++j)
      result.counts[w][perm[j]] = spec.min_count + spec.step * j;
  }

  const ZipfSampler filler_zipf(40, 1.0);
  std::ofstream out(path);
  require(static_cast<bool>(out), "cannot write " + path.string());
  for (std::uint32_t d = 0; d < spec.docs; ++d) {
    std::vector<std::string> tokens;
    for (std::uint32_t w = 0; w < spec.planted_words; ++w)
      for (std::uint32_t c = 0; c < result.counts[w][d]; ++c)
        tokens.push_back(result.planted[w]);
    while (tokens.size() < spec.doc_tokens)
      tokens.push_back(filler_word(filler_zipf.sample(rng.uniform())));
    // shuffle so planted words are spread through the document
    for (std::size_t i = tokens.size(); i > 1; --i)
      std::swap(tokens[i - 1], tokens[rng.uniform_index(i)]);
    for (std::size_t i = 0; i < tokens.size(); ++i)
      out << (i ? " " : "") << tokens[i];
    out << '\n';
  }
  return result;
}

void write_review_corpus(const std::filesystem::path& path,
                         const ReviewSpec& spec) {
  Rng rng(spec.seed);
  const ZipfSampler text_zipf(120, 1.0);

  std::ofstream out(path);
  require(static_cast<bool>(out), "cannot write " + path.string());

  for (std::uint32_t g = 0; g < spec.groups; ++g) {
    for (std::uint32_t u = 0; u < spec.users_per_group; ++u) {
      const std::string user = "user_g" + std::to_string(g) + "_" + std::to_string(u);
      const auto n_reviews =
          spec.reviews_per_user_min +
          rng.uniform_index(spec.reviews_per_user_max - spec.reviews_per_user_min + 1);
      // one review per distinct item
      std::vector<bool> reviewed(spec.groups * spec.items_per_group, false);
      for (std::uint64_t r = 0; r < n_reviews; ++r) {
        const bool cross = rng.uniform() < spec.cross_rate;
        const std::uint32_t item_group =
            cross ? (g + 1 + static_cast<std::uint32_t>(
                                 rng.uniform_index(spec.groups - 1))) %
                        spec.groups
                  : g;
        const std::uint32_t item_idx =
            static_cast<std::uint32_t>(rng.uniform_index(spec.items_per_group));
        const std::uint32_t item_slot = item_group * spec.items_per_group + item_idx;
        if (reviewed[item_slot]) continue;
        reviewed[item_slot] = true;

        const double base = item_group == g ? 4.5 : 1.5;
        const int rating = std::clamp(
            static_cast<int>(std::llround(base + (rng.uniform() - 0.5))), 1, 5);

        std::ostringstream text;
        const auto n_tokens =
            spec.review_tokens_min +
            rng.uniform_index(spec.review_tokens_max - spec.review_tokens_min + 1);
        for (std::uint64_t t = 0; t < n_tokens; ++t) {
          if (t > 0) text << ' ';
          // review language reflects the taste group of the item
          text << "g" << item_group << "v" << text_zipf.sample(rng.uniform());
        }

        out << "{\"user_id\":\"" << user << "\",\"item_id\":\"item_g"
            << item_group << "_" << item_idx << "\",\"rating\":" << rating
            << ",\"text\":\"" << text.str() << "\"}\n";
      }
    }
  }
}

void write_lines(const std::filesystem::path& path,
                 const std::vector<std::string>& lines) {
  std::ofstream out(path);
  require(static_cast<bool>(out), "cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

CorpusManifest ingest_with_exact_subcollections(
    const std::filesystem::path& input, const std::filesystem::path& out_dir,
    IngestOptions options, std::uint64_t target_subcollections) {
  // N is non-increasing in the budget; bisect
  std::uint64_t lo = 64;          // many subcollections
  std::uint64_t hi = 1ull << 32;  // one subcollection
  for (int iter = 0; iter < 64; ++iter) {
    options.partition_budget = lo + (hi - lo) / 2;
    const auto manifest = ingest(input, out_dir, options);
    if (manifest.num_subcollections == target_subcollections) return manifest;
    if (manifest.num_subcollections > target_subcollections)
      lo = options.partition_budget + 1;
    else
      hi = options.partition_budget - 1;
    if (lo > hi) break;
  }
  throw data_error("no budget yields exactly " +
                   std::to_string(target_subcollections) + " subcollections");
}

}  // namespace emap::synth
