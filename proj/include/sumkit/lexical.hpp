#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sumkit/corpus.hpp"
#include "sumkit/error.hpp"

namespace sumkit {

// ---------------------------------------------------------------------------
// ROUGE-n

struct RougeScore {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

namespace detail {

/// n-gram multiset as a count map keyed by the joined token string.  '\x1f'
/// cannot appear in normalized tokens, so the join is collision-free.
inline std::unordered_map<std::string, int> ngram_counts(
    std::span<const std::string> tokens, int n) {
  std::unordered_map<std::string, int> counts;
  if (n <= 0 || tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key.push_back('\x1f');
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace detail

/// Clipped n-gram overlap: each candidate n-gram matches at most as many
/// times as it occurs in the reference.  Empty candidate or reference n-gram
/// multisets yield an all-zero score.
inline RougeScore rouge_n(std::span<const std::string> candidate,
                          std::span<const std::string> reference, int n) {
  if (n <= 0) throw error("rouge_n: order must be positive");
  const auto cand = detail::ngram_counts(candidate, n);
  const auto ref = detail::ngram_counts(reference, n);
  RougeScore score;
  if (cand.empty() || ref.empty()) return score;
  std::int64_t overlap = 0, cand_total = 0, ref_total = 0;
  for (const auto& [key, count] : cand) {
    cand_total += count;
    auto it = ref.find(key);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  for (const auto& [key, count] : ref) ref_total += count;
  score.recall = static_cast<double>(overlap) / static_cast<double>(ref_total);
  score.precision =
      static_cast<double>(overlap) / static_cast<double>(cand_total);
  if (score.recall + score.precision > 0.0) {
    score.f1 = 2.0 * score.recall * score.precision /
               (score.recall + score.precision);
  }
  return score;
}

/// Mean of the ROUGE-1 and ROUGE-2 F1 scores.
inline double r12(std::span<const std::string> candidate,
                  std::span<const std::string> reference) {
  return 0.5 * (rouge_n(candidate, reference, 1).f1 +
                rouge_n(candidate, reference, 2).f1);
}

// ---------------------------------------------------------------------------
// Interned-token fast path

/// Maps token strings to dense integer ids, shared across the sentences of
/// one admission so oracle loops avoid string hashing.
class TokenInterner {
 public:
  int id(const std::string& token) {
    auto [it, inserted] =
        index_.try_emplace(token, static_cast<int>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  std::vector<int> ids(std::span<const std::string> tokens) {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const std::string& t : tokens) out.push_back(id(t));
    return out;
  }

  std::size_t size() const { return tokens_.size(); }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> tokens_;
};

/// Incrementally scores a growing candidate token sequence against a fixed
/// reference.  Appending a sentence updates unigram and bigram overlap in
/// O(sentence length); `peek_r12` evaluates a hypothetical append without
/// committing it.  Bigrams span the boundary between consecutive appends,
/// matching scores over the concatenated token sequence.
class RougeAccumulator {
 public:
  explicit RougeAccumulator(std::span<const int> reference) {
    for (int t : reference) ++ref_uni_[t];
    for (std::size_t i = 0; i + 1 < reference.size(); ++i) {
      ++ref_bi_[bigram_key(reference[i], reference[i + 1])];
    }
    ref_len1_ = static_cast<std::int64_t>(reference.size());
    ref_len2_ = reference.size() >= 2
                    ? static_cast<std::int64_t>(reference.size()) - 1
                    : 0;
  }

  void append(std::span<const int> sent) {
    for (int t : sent) {
      const int have = cand_uni_[t]++;
      if (have < ref_count(ref_uni_, t)) ++overlap1_;
    }
    if (!sent.empty()) {
      if (cand_len1_ > 0) bump_bigram(last_token_, sent.front());
      for (std::size_t i = 0; i + 1 < sent.size(); ++i) {
        bump_bigram(sent[i], sent[i + 1]);
      }
      last_token_ = sent.back();
    }
    cand_len1_ += static_cast<std::int64_t>(sent.size());
    cand_len2_ = cand_len1_ >= 2 ? cand_len1_ - 1 : 0;
  }

  /// R12 of the current candidate.
  double current_r12() const {
    return 0.5 * (f1(overlap1_, cand_len1_, ref_len1_) +
                  f1(overlap2_, cand_len2_, ref_len2_));
  }

  /// R12 the candidate would have after appending `sent`.
  double peek_r12(std::span<const int> sent) const {
    std::int64_t o1 = overlap1_, o2 = overlap2_;
    scratch_uni_.clear();
    scratch_bi_.clear();
    for (int t : sent) {
      auto cit = cand_uni_.find(t);
      const int have = (cit == cand_uni_.end() ? 0 : cit->second) +
                       scratch_uni_[t]++;
      if (have < ref_count(ref_uni_, t)) ++o1;
    }
    auto peek_bigram = [&](int a, int b) {
      const std::uint64_t key = bigram_key(a, b);
      auto cit = cand_bi_.find(key);
      const int have = (cit == cand_bi_.end() ? 0 : cit->second) +
                       scratch_bi_[key]++;
      auto rit = ref_bi_.find(key);
      if (rit != ref_bi_.end() && have < rit->second) ++o2;
    };
    if (!sent.empty() && cand_len1_ > 0) peek_bigram(last_token_, sent.front());
    for (std::size_t i = 0; i + 1 < sent.size(); ++i) {
      peek_bigram(sent[i], sent[i + 1]);
    }
    const std::int64_t len1 = cand_len1_ + static_cast<std::int64_t>(sent.size());
    const std::int64_t len2 = len1 >= 2 ? len1 - 1 : 0;
    return 0.5 * (f1(o1, len1, ref_len1_) + f1(o2, len2, ref_len2_));
  }

 private:
  static std::uint64_t bigram_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  }
  static int ref_count(const std::unordered_map<int, int>& m, int t) {
    auto it = m.find(t);
    return it == m.end() ? 0 : it->second;
  }
  void bump_bigram(int a, int b) {
    const std::uint64_t key = bigram_key(a, b);
    const int have = cand_bi_[key]++;
    auto rit = ref_bi_.find(key);
    if (rit != ref_bi_.end() && have < rit->second) ++overlap2_;
  }
  static double f1(std::int64_t overlap, std::int64_t cand_len,
                   std::int64_t ref_len) {
    if (cand_len <= 0 || ref_len <= 0) return 0.0;
    const double r = static_cast<double>(overlap) / static_cast<double>(ref_len);
    const double p =
        static_cast<double>(overlap) / static_cast<double>(cand_len);
    if (r + p == 0.0) return 0.0;
    return 2.0 * r * p / (r + p);
  }

  std::unordered_map<int, int> ref_uni_, cand_uni_;
  std::unordered_map<std::uint64_t, int> ref_bi_, cand_bi_;
  mutable std::unordered_map<int, int> scratch_uni_;
  mutable std::unordered_map<std::uint64_t, int> scratch_bi_;
  std::int64_t ref_len1_ = 0, ref_len2_ = 0;
  std::int64_t cand_len1_ = 0, cand_len2_ = 0;
  std::int64_t overlap1_ = 0, overlap2_ = 0;
  int last_token_ = -1;
};

// ---------------------------------------------------------------------------
// Extractive fragments

struct Fragment {
  int summary_start = 0;  // token offset in the summary
  int source_start = 0;   // token offset in the concatenated source
  int length = 0;         // tokens
};

/// Greedy left-to-right decomposition of the summary into maximal fragments
/// copied verbatim from the source.  At each summary position the longest
/// source match is taken (ties: earliest source position); unmatched tokens
/// advance by one.  Fragments never overlap on the summary side.
inline std::vector<Fragment> extract_fragments(
    std::span<const std::string> summary, std::span<const std::string> source) {
  std::unordered_map<std::string, std::vector<int>> positions;
  for (std::size_t i = 0; i < source.size(); ++i) {
    positions[source[i]].push_back(static_cast<int>(i));
  }
  std::vector<Fragment> fragments;
  std::size_t i = 0;
  while (i < summary.size()) {
    int best_len = 0;
    int best_src = -1;
    auto it = positions.find(summary[i]);
    if (it != positions.end()) {
      for (int p : it->second) {
        int len = 0;
        while (i + len < summary.size() &&
               static_cast<std::size_t>(p) + len < source.size() &&
               summary[i + len] == source[p + len]) {
          ++len;
        }
        if (len > best_len) {
          best_len = len;
          best_src = p;
        }
      }
    }
    if (best_len > 0) {
      fragments.push_back(
          {static_cast<int>(i), best_src, best_len});
      i += static_cast<std::size_t>(best_len);
    } else {
      ++i;
    }
  }
  return fragments;
}

// ---------------------------------------------------------------------------
// Extractiveness statistics

inline constexpr int kFragmentRankBins = 10;

/// Per-admission fragment statistics.  Coverage is the fraction of summary
/// tokens inside fragments; density weights each fragment by its length, so
/// long verbatim copies dominate.
struct ExtractivenessStats {
  double coverage = 0.0;
  double density = 0.0;
  std::vector<Fragment> fragments;
  std::map<int, std::int64_t> length_histogram;  // fragment length -> count
  // Fragments bucketed by relative rank (position among this summary's
  // fragments, scaled to tenths): total length and count per bucket.
  std::array<std::int64_t, kFragmentRankBins> rank_length_sum{};
  std::array<std::int64_t, kFragmentRankBins> rank_count{};
};

inline ExtractivenessStats extractiveness(const AdmissionView& view) {
  if (view.summary_tokens.empty()) {
    throw error("extractiveness: admission has no summary tokens: " +
                view.admission_id);
  }
  std::vector<std::string> source_tokens;
  for (const SentenceRecord& s : view.source) {
    source_tokens.insert(source_tokens.end(), s.tokens.begin(),
                         s.tokens.end());
  }
  ExtractivenessStats stats;
  stats.fragments = extract_fragments(view.summary_tokens, source_tokens);
  const double len = static_cast<double>(view.summary_tokens.size());
  double total = 0.0, weighted = 0.0;
  const int k = static_cast<int>(stats.fragments.size());
  for (int fi = 0; fi < k; ++fi) {
    const Fragment& f = stats.fragments[fi];
    total += f.length;
    weighted += static_cast<double>(f.length) * f.length;
    ++stats.length_histogram[f.length];
    // 1-based rank r of k maps to decile ceil(r*10/k); stored 0-based.
    const int bucket = ((fi + 1) * kFragmentRankBins + k - 1) / k - 1;
    stats.rank_length_sum[bucket] += f.length;
    ++stats.rank_count[bucket];
  }
  stats.coverage = total / len;
  stats.density = weighted / len;
  return stats;
}

/// Corpus-level aggregation: means of coverage/density over admissions,
/// pooled fragment-length histogram, pooled mean length per rank bucket, and
/// the share of fragments of length exactly 1.
struct ExtractivenessAggregate {
  MeanStd coverage;
  MeanStd density;
  std::map<int, std::int64_t> length_histogram;
  std::array<double, kFragmentRankBins> mean_length_by_rank{};
  std::array<std::int64_t, kFragmentRankBins> count_by_rank{};
  double unigram_fragment_share = 0.0;
  std::int64_t n_fragments = 0;
};

inline ExtractivenessAggregate aggregate_extractiveness(
    std::span<const ExtractivenessStats> per_admission) {
  ExtractivenessAggregate agg;
  std::vector<double> cov, den;
  std::array<std::int64_t, kFragmentRankBins> len_sum{};
  std::int64_t unigrams = 0;
  for (const ExtractivenessStats& s : per_admission) {
    cov.push_back(s.coverage);
    den.push_back(s.density);
    for (const auto& [length, count] : s.length_histogram) {
      agg.length_histogram[length] += count;
      agg.n_fragments += count;
      if (length == 1) unigrams += count;
    }
    for (int b = 0; b < kFragmentRankBins; ++b) {
      len_sum[b] += s.rank_length_sum[b];
      agg.count_by_rank[b] += s.rank_count[b];
    }
  }
  agg.coverage = mean_std(cov);
  agg.density = mean_std(den);
  for (int b = 0; b < kFragmentRankBins; ++b) {
    agg.mean_length_by_rank[b] =
        agg.count_by_rank[b] > 0
            ? static_cast<double>(len_sum[b]) /
                  static_cast<double>(agg.count_by_rank[b])
            : 0.0;
  }
  agg.unigram_fragment_share =
      agg.n_fragments > 0
          ? static_cast<double>(unigrams) / static_cast<double>(agg.n_fragments)
          : 0.0;
  return agg;
}

}  // namespace sumkit
