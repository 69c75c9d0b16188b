#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sumkit/corpus.hpp"
#include "sumkit/error.hpp"
#include "sumkit/lexical.hpp"
#include "sumkit/numeric.hpp"
#include "sumkit/parallel.hpp"
#include "sumkit/random.hpp"

namespace sumkit {

enum class Method {
  Random,
  LexRank,
  TopK,
  Gain,
  SentAlign,
  Retrieval,
  SAPlusRetrieval,
  Learned
};

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Random: return "random";
    case Method::LexRank: return "lexrank";
    case Method::TopK: return "oracle_top_k";
    case Method::Gain: return "oracle_gain";
    case Method::SentAlign: return "oracle_sent_align";
    case Method::Retrieval: return "oracle_retrieval";
    case Method::SAPlusRetrieval: return "oracle_sa_plus_retrieval";
    default: return "learned";
  }
}

/// Reference to one emitted sentence: the note it came from and its flat
/// sentence id, or kRetrievedNoteIndex plus a BM25-internal id for sentences
/// pulled from other admissions' summaries.
struct SentenceRef {
  int note_index = 0;
  int sent_id = 0;
};

struct ExtractSummary {
  Method method = Method::Random;
  std::vector<SentenceRef> sentence_refs;
  std::vector<std::string> tokens;     // concatenation over emitted sentences
  std::vector<double> per_step_r12;    // cumulative R12 after each step
};

// ---------------------------------------------------------------------------
// Deduplicated sentence pool

/// Unique source sentences (exact token-sequence match) in document order.
/// All selection methods draw from this pool, so no method can emit two
/// identical sentences.
struct DedupPool {
  std::vector<int> kept_ids;          // flat sent ids of unique sentences
  std::vector<int> node_of_sentence;  // source sentence -> index in kept_ids
};

inline DedupPool dedup_sentences(const AdmissionView& view) {
  DedupPool pool;
  pool.node_of_sentence.resize(view.source.size());
  std::unordered_map<std::string, int> seen;
  for (std::size_t i = 0; i < view.source.size(); ++i) {
    std::string key;
    for (const std::string& t : view.source[i].tokens) {
      key += t;
      key.push_back('\x1f');
    }
    auto [it, inserted] =
        seen.try_emplace(std::move(key), static_cast<int>(pool.kept_ids.size()));
    if (inserted) pool.kept_ids.push_back(static_cast<int>(i));
    pool.node_of_sentence[i] = it->second;
  }
  return pool;
}

namespace detail {

/// Tokens + per-step R12 for a sequence of chosen source sentences.
inline ExtractSummary finalize_summary(Method method, const AdmissionView& view,
                                       std::span<const int> chosen_ids) {
  ExtractSummary out;
  out.method = method;
  TokenInterner interner;
  RougeAccumulator acc(interner.ids(view.summary_tokens));
  for (int id : chosen_ids) {
    const SentenceRecord& s = view.source[static_cast<std::size_t>(id)];
    out.sentence_refs.push_back({s.note_index, s.sent_id});
    out.tokens.insert(out.tokens.end(), s.tokens.begin(), s.tokens.end());
    acc.append(interner.ids(s.tokens));
    out.per_step_r12.push_back(acc.current_r12());
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Random baseline

/// Uniformly samples unique sentences without replacement until the word
/// budget is met.  Words are whitespace-separated chunks of the raw text.
inline ExtractSummary random_baseline(const AdmissionView& view,
                                      int target_words, std::uint64_t seed) {
  if (target_words <= 0) throw error("random_baseline: target_words must be positive");
  if (view.source.empty()) {
    throw error("random_baseline: no source sentences: " + view.admission_id);
  }
  const DedupPool pool = dedup_sentences(view);
  std::vector<int> remaining = pool.kept_ids;
  rng_t rng(seed);
  std::vector<int> chosen;
  int words = 0;
  while (words < target_words && !remaining.empty()) {
    const int pick =
        uniform_int(rng, 0, static_cast<int>(remaining.size()) - 1);
    const int id = remaining[static_cast<std::size_t>(pick)];
    remaining.erase(remaining.begin() + pick);
    chosen.push_back(id);
    words += word_count(view.source[static_cast<std::size_t>(id)].raw);
  }
  return detail::finalize_summary(Method::Random, view, chosen);
}

// ---------------------------------------------------------------------------
// LexRank

struct LexRankParams {
  double threshold = 0.1;
  double damping = 0.85;
  double tol = 1e-6;  // L1 convergence tolerance
  int max_iter = 100;
};

struct LexRankResult {
  ExtractSummary summary;
  std::vector<double> node_scores;      // per unique sentence, sums to 1
  std::vector<int> node_sent_ids;       // representative flat sent id per node
  std::vector<double> sentence_scores;  // per source sentence (node's score)
};

namespace detail {

/// Sparse L2-normalized TF-IDF vectors with idf = ln((1+N)/(1+df)) + 1.
inline std::vector<std::vector<std::pair<int, double>>> tfidf_vectors(
    const std::vector<std::vector<int>>& docs, std::size_t vocab) {
  std::vector<int> df(vocab, 0);
  std::vector<std::unordered_map<int, int>> tf(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (int t : docs[i]) ++tf[i][t];
    for (const auto& [t, c] : tf[i]) ++df[static_cast<std::size_t>(t)];
  }
  const double n = static_cast<double>(docs.size());
  std::vector<std::vector<std::pair<int, double>>> vecs(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double norm = 0.0;
    auto& vec = vecs[i];
    vec.reserve(tf[i].size());
    for (const auto& [t, c] : tf[i]) {
      const double idf =
          std::log((1.0 + n) / (1.0 + df[static_cast<std::size_t>(t)])) + 1.0;
      const double w = static_cast<double>(c) * idf;
      vec.emplace_back(t, w);
      norm += w * w;
    }
    norm = std::sqrt(norm);
    for (auto& [t, w] : vec) w /= norm;
    std::sort(vec.begin(), vec.end());
  }
  return vecs;
}

inline double sparse_dot(const std::vector<std::pair<int, double>>& a,
                         const std::vector<std::pair<int, double>>& b) {
  double dot = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (a[i].first > b[j].first) {
      ++j;
    } else {
      dot += a[i].second * b[j].second;
      ++i;
      ++j;
    }
  }
  return dot;
}

}  // namespace detail

/// Continuous LexRank over unique source sentences: TF-IDF cosine graph with
/// edges at similarity >= threshold (self-loops excluded), damped
/// degree-normalized power iteration.  Scores form a probability vector
/// (they sum to 1); a fully disconnected graph yields uniform 1/N.  Selection
/// takes sentences by descending score (ties: document order) until the word
/// budget is met.
inline LexRankResult lexrank(const AdmissionView& view, int target_words,
                             const LexRankParams& params = {}) {
  if (view.source.empty()) {
    throw error("lexrank: no source sentences: " + view.admission_id);
  }
  const DedupPool pool = dedup_sentences(view);
  const std::size_t n = pool.kept_ids.size();

  TokenInterner interner;
  std::vector<std::vector<int>> docs;
  docs.reserve(n);
  for (int id : pool.kept_ids) {
    docs.push_back(
        interner.ids(view.source[static_cast<std::size_t>(id)].tokens));
  }
  const auto vecs = detail::tfidf_vectors(docs, interner.size());

  // Weighted adjacency restricted to similarities >= threshold.
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double sim = detail::sparse_dot(vecs[i], vecs[j]);
      if (sim >= params.threshold) {
        adj[i].emplace_back(static_cast<int>(j), sim);
        adj[j].emplace_back(static_cast<int>(i), sim);
        degree[i] += sim;
        degree[j] += sim;
      }
    }
  }

  const double nd = static_cast<double>(n);
  std::vector<double> p(n, 1.0 / nd), next(n);
  for (int iter = 0; iter < params.max_iter; ++iter) {
    double dangling = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (degree[i] == 0.0) dangling += p[i];
    }
    const double base = (1.0 - params.damping) / nd +
                        params.damping * dangling / nd;
    std::fill(next.begin(), next.end(), base);
    for (std::size_t i = 0; i < n; ++i) {
      if (degree[i] == 0.0) continue;
      const double share = params.damping * p[i] / degree[i];
      for (const auto& [j, w] : adj[i]) {
        next[static_cast<std::size_t>(j)] += share * w;
      }
    }
    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) l1 += std::fabs(next[i] - p[i]);
    p.swap(next);
    if (l1 <= params.tol) break;
  }

  LexRankResult result;
  result.node_scores = p;
  result.node_sent_ids = pool.kept_ids;
  result.sentence_scores.resize(view.source.size());
  for (std::size_t i = 0; i < view.source.size(); ++i) {
    result.sentence_scores[i] =
        p[static_cast<std::size_t>(pool.node_of_sentence[i])];
  }

  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (p[static_cast<std::size_t>(a)] != p[static_cast<std::size_t>(b)]) {
      return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)];
    }
    return pool.kept_ids[static_cast<std::size_t>(a)] <
           pool.kept_ids[static_cast<std::size_t>(b)];
  });
  std::vector<int> chosen;
  int words = 0;
  for (int node : order) {
    if (words >= target_words) break;
    const int id = pool.kept_ids[static_cast<std::size_t>(node)];
    chosen.push_back(id);
    words += word_count(view.source[static_cast<std::size_t>(id)].raw);
  }
  result.summary = detail::finalize_summary(Method::LexRank, view, chosen);
  return result;
}

// ---------------------------------------------------------------------------
// Oracle Top-K

/// Sentences sorted by individual R12 against the full reference, taken until
/// the token budget is met.
inline ExtractSummary oracle_top_k(const AdmissionView& view,
                                   int target_tokens) {
  if (target_tokens <= 0) throw error("oracle_top_k: target_tokens must be positive");
  const DedupPool pool = dedup_sentences(view);
  struct Scored {
    int id;
    double score;
  };
  std::vector<Scored> scored;
  scored.reserve(pool.kept_ids.size());
  for (int id : pool.kept_ids) {
    scored.push_back(
        {id, r12(view.source[static_cast<std::size_t>(id)].tokens,
                 view.summary_tokens)});
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Scored& a, const Scored& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.id < b.id;
                   });
  std::vector<int> chosen;
  std::size_t tokens = 0;
  for (const Scored& s : scored) {
    if (tokens >= static_cast<std::size_t>(target_tokens)) break;
    chosen.push_back(s.id);
    tokens += view.source[static_cast<std::size_t>(s.id)].tokens.size();
  }
  return detail::finalize_summary(Method::TopK, view, chosen);
}

// ---------------------------------------------------------------------------
// Oracle Gain

struct GainStep {
  int step = 0;  // 1-based
  double best_gain = 0.0;
  double mean_gain = 0.0;
  double min_gain = 0.0;
  double cumulative_r12 = 0.0;
};

struct GainResult {
  ExtractSummary summary;
  std::vector<GainStep> steps;
};

/// Greedy selection of the sentence with the largest marginal R12 gain
/// conditioned on the summary so far; stops when the best gain drops to zero
/// or below.  Per-step best/mean/min candidate gains are recorded.
inline GainResult oracle_gain(const AdmissionView& view) {
  const DedupPool pool = dedup_sentences(view);
  TokenInterner interner;
  const std::vector<int> ref = interner.ids(view.summary_tokens);
  std::vector<std::vector<int>> cands;
  cands.reserve(pool.kept_ids.size());
  for (int id : pool.kept_ids) {
    cands.push_back(
        interner.ids(view.source[static_cast<std::size_t>(id)].tokens));
  }

  RougeAccumulator acc(ref);
  std::vector<bool> used(cands.size(), false);
  GainResult result;
  std::vector<int> chosen;
  double current = 0.0;
  for (;;) {
    double best = -1.0, sum = 0.0, worst = 0.0;
    int best_i = -1;
    int considered = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (used[i]) continue;
      const double gain = acc.peek_r12(cands[i]) - current;
      if (considered == 0 || gain < worst) worst = gain;
      sum += gain;
      ++considered;
      if (gain > best) {
        best = gain;
        best_i = static_cast<int>(i);
      }
    }
    if (best_i < 0 || best <= 0.0) break;
    used[static_cast<std::size_t>(best_i)] = true;
    acc.append(cands[static_cast<std::size_t>(best_i)]);
    current = acc.current_r12();
    chosen.push_back(pool.kept_ids[static_cast<std::size_t>(best_i)]);
    result.steps.push_back({static_cast<int>(result.steps.size()) + 1, best,
                            sum / considered, worst, current});
  }
  result.summary = detail::finalize_summary(Method::Gain, view, chosen);
  return result;
}

/// Corpus-level Figure-2-style curve: per step index, means over the
/// admissions that reached that step.
struct GainCurvePoint {
  int step = 0;
  double best = 0.0;
  double mean = 0.0;
  double min = 0.0;
  double cumulative = 0.0;
  std::int64_t n = 0;
};

inline std::vector<GainCurvePoint> aggregate_gain_curves(
    std::span<const GainResult> results) {
  std::vector<GainCurvePoint> curve;
  for (const GainResult& r : results) {
    for (const GainStep& s : r.steps) {
      if (curve.size() < static_cast<std::size_t>(s.step)) {
        curve.resize(static_cast<std::size_t>(s.step));
      }
      GainCurvePoint& pt = curve[static_cast<std::size_t>(s.step) - 1];
      pt.step = s.step;
      pt.best += s.best_gain;
      pt.mean += s.mean_gain;
      pt.min += s.min_gain;
      pt.cumulative += s.cumulative_r12;
      ++pt.n;
    }
  }
  for (GainCurvePoint& pt : curve) {
    if (pt.n > 0) {
      const double n = static_cast<double>(pt.n);
      pt.best /= n;
      pt.mean /= n;
      pt.min /= n;
      pt.cumulative /= n;
    }
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Oracle Sent-Align

struct AlignChoice {
  int ref_sent_id = 0;
  int source_sent_id = -1;
  double r12 = 0.0;
};

struct AlignResult {
  ExtractSummary summary;
  std::vector<AlignChoice> choices;  // one per reference sentence
};

/// Per reference sentence, the source sentence with the highest R12 against
/// it (ties: earlier document order).  Output preserves reference order;
/// sentences aligned to several reference sentences are emitted once.
inline AlignResult oracle_sent_align(const AdmissionView& view) {
  if (view.source.empty()) {
    throw error("oracle_sent_align: no source sentences: " + view.admission_id);
  }
  AlignResult result;
  std::vector<int> emitted;
  std::vector<bool> already(view.source.size(), false);
  const DedupPool pool = dedup_sentences(view);
  for (const SentenceRecord& ref_sent : view.summary) {
    double best = -1.0;
    int best_id = -1;
    for (const SentenceRecord& src : view.source) {
      const double score = r12(src.tokens, ref_sent.tokens);
      if (score > best) {
        best = score;
        best_id = src.sent_id;
      }
    }
    result.choices.push_back({ref_sent.sent_id, best_id, best});
    const int node = pool.node_of_sentence[static_cast<std::size_t>(best_id)];
    const int rep = pool.kept_ids[static_cast<std::size_t>(node)];
    if (!already[static_cast<std::size_t>(rep)]) {
      already[static_cast<std::size_t>(rep)] = true;
      emitted.push_back(rep);
    }
  }
  result.summary =
      detail::finalize_summary(Method::SentAlign, view, emitted);
  return result;
}

// ---------------------------------------------------------------------------
// BM25 retrieval over training-split summary sentences

class Bm25Index {
 public:
  struct Params {
    double k1 = 1.2;
    double b = 0.75;
  };

  struct Entry {
    std::string admission_id;
    int sent_id = 0;  // position within its summary
    std::vector<std::string> tokens;
    std::string raw;
  };

  struct Hit {
    int internal_id = -1;
    double score = 0.0;
  };

  /// Indexes every summary sentence of every train-split admission.
  static Bm25Index build(std::span<const Admission> admissions) {
    return build(admissions, Params{});
  }

  static Bm25Index build(std::span<const Admission> admissions,
                         Params params) {
    Bm25Index index;
    index.params_ = params;
    double total_len = 0.0;
    for (const Admission& adm : admissions) {
      if (adm.split != Split::Train) continue;
      for (const SentenceRecord& s : segment(adm.summary)) {
        if (s.tokens.empty()) continue;
        const int id = static_cast<int>(index.entries_.size());
        std::unordered_map<std::string, int> tf;
        for (const std::string& t : s.tokens) ++tf[t];
        for (const auto& [term, count] : tf) {
          index.postings_[term].emplace_back(id, count);
        }
        total_len += static_cast<double>(s.tokens.size());
        index.entries_.push_back(
            {adm.admission_id, s.sent_id, s.tokens, s.raw});
      }
    }
    index.avgdl_ = index.entries_.empty()
                       ? 0.0
                       : total_len / static_cast<double>(index.entries_.size());
    return index;
  }

  std::size_t size() const { return entries_.size(); }
  double avgdl() const { return avgdl_; }
  const Entry& entry(int id) const {
    return entries_.at(static_cast<std::size_t>(id));
  }

  /// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)); nonnegative by
  /// construction.
  double idf(const std::string& term) const {
    const double n = static_cast<double>(entries_.size());
    auto it = postings_.find(term);
    const double df =
        it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  }

  /// Best-scoring indexed sentence for the query, never returning sentences
  /// of `exclude_admission`.  Ties break toward the lowest internal id.
  /// Returns nothing when no candidate shares a term with the query.
  std::optional<Hit> retrieve(std::span<const std::string> query,
                              std::string_view exclude_admission) const {
    if (entries_.empty()) throw error("bm25: empty index");
    std::unordered_map<std::string, int> qtf;
    for (const std::string& t : query) ++qtf[t];
    std::unordered_map<int, double> scores;
    for (const auto& [term, count] : qtf) {
      auto it = postings_.find(term);
      if (it == postings_.end()) continue;
      const double idf_t = idf(term);
      for (const auto& [doc, tf] : it->second) {
        const Entry& e = entries_[static_cast<std::size_t>(doc)];
        if (e.admission_id == exclude_admission) continue;
        const double dl = static_cast<double>(e.tokens.size());
        const double denom =
            tf + params_.k1 * (1.0 - params_.b + params_.b * dl / avgdl_);
        scores[doc] += static_cast<double>(count) * idf_t *
                       (tf * (params_.k1 + 1.0)) / denom;
      }
    }
    std::optional<Hit> best;
    for (const auto& [doc, score] : scores) {
      if (score <= 0.0) continue;
      if (!best || score > best->score ||
          (score == best->score && doc < best->internal_id)) {
        best = Hit{doc, score};
      }
    }
    return best;
  }

  const Params& params() const { return params_; }

 private:
  std::unordered_map<std::string, std::vector<std::pair<int, int>>> postings_;
  std::vector<Entry> entries_;
  double avgdl_ = 0.0;
  Params params_;
};

// ---------------------------------------------------------------------------
// Oracle Retrieval

struct RetrievalChoice {
  int ref_sent_id = 0;
  int internal_id = -1;  // -1: no sentence shared a term with the query
  double bm25_score = 0.0;
  double r12 = 0.0;
};

struct RetrievalResult {
  ExtractSummary summary;
  std::vector<RetrievalChoice> choices;
};

/// Per reference sentence, the train-split summary sentence with the best
/// BM25 score (own admission excluded).  Reference sentences with no match
/// contribute nothing to the emitted summary.
inline RetrievalResult oracle_retrieval(const AdmissionView& view,
                                        const Bm25Index& index) {
  RetrievalResult result;
  ExtractSummary& summary = result.summary;
  summary.method = Method::Retrieval;
  TokenInterner interner;
  RougeAccumulator acc(interner.ids(view.summary_tokens));
  std::unordered_map<std::string, bool> emitted;
  for (const SentenceRecord& ref_sent : view.summary) {
    RetrievalChoice choice;
    choice.ref_sent_id = ref_sent.sent_id;
    const auto hit = index.retrieve(ref_sent.tokens, view.admission_id);
    if (hit) {
      const Bm25Index::Entry& e = index.entry(hit->internal_id);
      choice.internal_id = hit->internal_id;
      choice.bm25_score = hit->score;
      choice.r12 = r12(e.tokens, ref_sent.tokens);
      std::string key;
      for (const std::string& t : e.tokens) {
        key += t;
        key.push_back('\x1f');
      }
      if (!emitted[key]) {
        emitted[key] = true;
        summary.sentence_refs.push_back(
            {kRetrievedNoteIndex, hit->internal_id});
        summary.tokens.insert(summary.tokens.end(), e.tokens.begin(),
                              e.tokens.end());
        acc.append(interner.ids(e.tokens));
        summary.per_step_r12.push_back(acc.current_r12());
      }
    }
    result.choices.push_back(choice);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Oracle Sent-Align + Retrieval ensemble

struct EnsembleChoice {
  int ref_sent_id = 0;
  bool from_retrieval = false;
  int source_sent_id = -1;  // set when from_retrieval == false
  int internal_id = -1;     // set when from_retrieval == true
  double r12 = 0.0;         // score of the winning candidate
  double source_r12 = 0.0;
  double retrieval_r12 = 0.0;  // -1 when no retrieval candidate
};

struct EnsembleResult {
  ExtractSummary summary;
  std::vector<EnsembleChoice> choices;
  double retrieval_share = 0.0;
};

/// Per reference sentence, the better of the Sent-Align candidate and the
/// BM25 retrieval candidate by R12 against that sentence (ties: source
/// side).  retrieval_share is the fraction of reference sentences whose
/// winner came from retrieval.
inline EnsembleResult oracle_sa_plus_retrieval(const AdmissionView& view,
                                               const Bm25Index& index) {
  if (view.source.empty()) {
    throw error("oracle_sa_plus_retrieval: no source sentences: " +
                view.admission_id);
  }
  EnsembleResult result;
  ExtractSummary& summary = result.summary;
  summary.method = Method::SAPlusRetrieval;
  TokenInterner interner;
  RougeAccumulator acc(interner.ids(view.summary_tokens));
  std::unordered_map<std::string, bool> emitted;

  auto emit = [&](std::span<const std::string> tokens, SentenceRef ref) {
    std::string key;
    for (const std::string& t : tokens) {
      key += t;
      key.push_back('\x1f');
    }
    if (emitted[key]) return;
    emitted[key] = true;
    summary.sentence_refs.push_back(ref);
    summary.tokens.insert(summary.tokens.end(), tokens.begin(), tokens.end());
    acc.append(interner.ids(tokens));
    summary.per_step_r12.push_back(acc.current_r12());
  };

  int retrieved = 0;
  for (const SentenceRecord& ref_sent : view.summary) {
    EnsembleChoice choice;
    choice.ref_sent_id = ref_sent.sent_id;
    double best_src = -1.0;
    int best_id = -1;
    for (const SentenceRecord& src : view.source) {
      const double score = r12(src.tokens, ref_sent.tokens);
      if (score > best_src) {
        best_src = score;
        best_id = src.sent_id;
      }
    }
    choice.source_sent_id = best_id;
    choice.source_r12 = best_src;
    choice.retrieval_r12 = -1.0;
    const auto hit = index.retrieve(ref_sent.tokens, view.admission_id);
    if (hit) {
      choice.internal_id = hit->internal_id;
      choice.retrieval_r12 =
          r12(index.entry(hit->internal_id).tokens, ref_sent.tokens);
    }
    if (hit && choice.retrieval_r12 > choice.source_r12) {
      choice.from_retrieval = true;
      choice.r12 = choice.retrieval_r12;
      ++retrieved;
      emit(index.entry(hit->internal_id).tokens,
           {kRetrievedNoteIndex, hit->internal_id});
    } else {
      choice.from_retrieval = false;
      choice.r12 = choice.source_r12;
      const SentenceRecord& src =
          view.source[static_cast<std::size_t>(best_id)];
      emit(src.tokens, {src.note_index, src.sent_id});
    }
    result.choices.push_back(choice);
  }
  result.retrieval_share =
      view.summary.empty()
          ? 0.0
          : static_cast<double>(retrieved) /
                static_cast<double>(view.summary.size());
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation harness

struct MethodScores {
  Method method = Method::Random;
  RougeScore r1;  // macro-averaged recall/precision/f1
  RougeScore r2;
  double mean_r12 = 0.0;
  std::int64_t n = 0;
};

struct EvalConfig {
  std::vector<Method> methods = {Method::Random,   Method::LexRank,
                                 Method::TopK,     Method::Gain,
                                 Method::SentAlign, Method::Retrieval,
                                 Method::SAPlusRetrieval};
  int target_words = 0;   // <= 0: use the corpus mean summary word count
  int target_tokens = 0;  // <= 0: use the corpus mean summary token count
  std::uint64_t seed = 0;
  int jobs = 1;
};

namespace detail {

inline int mean_summary_words(std::span<const AdmissionView> views) {
  double total = 0.0;
  for (const AdmissionView& v : views) {
    for (const SentenceRecord& s : v.summary) total += word_count(s.raw);
  }
  return std::max(1, static_cast<int>(std::lround(
                         total / std::max<std::size_t>(1, views.size()))));
}

inline int mean_summary_tokens(std::span<const AdmissionView> views) {
  double total = 0.0;
  for (const AdmissionView& v : views) {
    total += static_cast<double>(v.summary_tokens.size());
  }
  return std::max(1, static_cast<int>(std::lround(
                         total / std::max<std::size_t>(1, views.size()))));
}

}  // namespace detail

/// Runs the selected methods over all admissions (parallel per admission,
/// merged in admission order) and macro-averages ROUGE-1/2 plus R12.
inline std::vector<MethodScores> evaluate_methods(
    std::span<const AdmissionView> views, const Bm25Index* index,
    const EvalConfig& cfg) {
  if (views.empty()) throw error("evaluate_methods: no admissions");
  for (Method m : cfg.methods) {
    if ((m == Method::Retrieval || m == Method::SAPlusRetrieval) && !index) {
      throw error("evaluate_methods: method " + to_string(m) +
                  " requires a BM25 index");
    }
    if (m == Method::Learned) {
      throw error("evaluate_methods: learned scorer is evaluated separately");
    }
  }
  const int target_words = cfg.target_words > 0
                               ? cfg.target_words
                               : detail::mean_summary_words(views);
  const int target_tokens = cfg.target_tokens > 0
                                ? cfg.target_tokens
                                : detail::mean_summary_tokens(views);

  struct Cell {
    RougeScore r1, r2;
    double r12 = 0.0;
  };
  std::vector<std::vector<Cell>> table(cfg.methods.size(),
                                       std::vector<Cell>(views.size()));
  parallel_for(views.size(), cfg.jobs, [&](std::size_t vi) {
    const AdmissionView& view = views[vi];
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      ExtractSummary summary;
      switch (cfg.methods[mi]) {
        case Method::Random:
          summary = random_baseline(
              view, target_words,
              derive_seed(cfg.seed, static_cast<std::uint64_t>(vi)));
          break;
        case Method::LexRank:
          summary = lexrank(view, target_words).summary;
          break;
        case Method::TopK:
          summary = oracle_top_k(view, target_tokens);
          break;
        case Method::Gain:
          summary = oracle_gain(view).summary;
          break;
        case Method::SentAlign:
          summary = oracle_sent_align(view).summary;
          break;
        case Method::Retrieval:
          summary = oracle_retrieval(view, *index).summary;
          break;
        case Method::SAPlusRetrieval:
          summary = oracle_sa_plus_retrieval(view, *index).summary;
          break;
        case Method::Learned:
          break;
      }
      Cell& cell = table[mi][vi];
      cell.r1 = rouge_n(summary.tokens, view.summary_tokens, 1);
      cell.r2 = rouge_n(summary.tokens, view.summary_tokens, 2);
      cell.r12 = 0.5 * (cell.r1.f1 + cell.r2.f1);
    }
  });

  std::vector<MethodScores> rows;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    MethodScores row;
    row.method = cfg.methods[mi];
    row.n = static_cast<std::int64_t>(views.size());
    for (const Cell& cell : table[mi]) {
      row.r1.recall += cell.r1.recall;
      row.r1.precision += cell.r1.precision;
      row.r1.f1 += cell.r1.f1;
      row.r2.recall += cell.r2.recall;
      row.r2.precision += cell.r2.precision;
      row.r2.f1 += cell.r2.f1;
      row.mean_r12 += cell.r12;
    }
    const double n = static_cast<double>(views.size());
    row.r1.recall /= n;
    row.r1.precision /= n;
    row.r1.f1 /= n;
    row.r2.recall /= n;
    row.r2.precision /= n;
    row.r2.f1 /= n;
    row.mean_r12 /= n;
    rows.push_back(row);
  }
  return rows;
}

/// Pearson correlation between LexRank centrality and per-sentence R12
/// salience, pooled over every retained source sentence of every admission.
inline PearsonResult centrality_salience_corr(
    std::span<const AdmissionView> views, int jobs = 1) {
  std::vector<std::vector<std::pair<double, double>>> points(views.size());
  parallel_for(views.size(), jobs, [&](std::size_t vi) {
    const AdmissionView& view = views[vi];
    if (view.source.empty()) return;
    const LexRankResult lr = lexrank(view, 1);
    auto& out = points[vi];
    out.reserve(view.source.size());
    for (std::size_t si = 0; si < view.source.size(); ++si) {
      out.emplace_back(lr.sentence_scores[si],
                       r12(view.source[si].tokens, view.summary_tokens));
    }
  });
  std::vector<double> xs, ys;
  for (const auto& adm_points : points) {
    for (const auto& [x, y] : adm_points) {
      xs.push_back(x);
      ys.push_back(y);
    }
  }
  return pearson(xs, ys);
}

}  // namespace sumkit
