#pragma once

// Dictionary-based entity linking plus the entity-level corpus analyses:
// density/compression, inclusion-vs-frequency curves, note-ordering coverage,
// within-note position histograms, semantic-group transitions and positional
// distributions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sumkit/corpus.hpp"
#include "sumkit/csv.hpp"
#include "sumkit/error.hpp"
#include "sumkit/parallel.hpp"

namespace sumkit {

enum class SemanticGroup : int {
  Disorders = 0,
  ChemicalsDrugs = 1,
  Procedures = 2,
  LabResults = 3,
};

inline constexpr int kNumGroups = 4;

inline const char* to_string(SemanticGroup g) {
  switch (g) {
    case SemanticGroup::Disorders: return "Disorders";
    case SemanticGroup::ChemicalsDrugs: return "ChemicalsDrugs";
    case SemanticGroup::Procedures: return "Procedures";
    case SemanticGroup::LabResults: return "LabResults";
  }
  return "?";
}

inline SemanticGroup semantic_group_from_string(const std::string& s) {
  if (s == "Disorders") return SemanticGroup::Disorders;
  if (s == "ChemicalsDrugs") return SemanticGroup::ChemicalsDrugs;
  if (s == "Procedures") return SemanticGroup::Procedures;
  if (s == "LabResults") return SemanticGroup::LabResults;
  throw error("unknown semantic group: " + s);
}

/// Immutable surface-form dictionary. Surfaces are stored as normalized token
/// sequences; lookups run on the same tokenization the corpus uses.
class Gazetteer {
 public:
  struct Concept {
    std::string concept_id;
    SemanticGroup group = SemanticGroup::Disorders;
  };

  void add(const std::string& surface, const std::string& concept_id,
           SemanticGroup group) {
    const auto tokens = tokenize(surface);
    if (tokens.empty()) throw error("gazetteer surface has no tokens: " + surface);
    const std::string key = join_key(tokens);
    if (!entries_.emplace(key, Concept{concept_id, group}).second) {
      throw error("duplicate gazetteer surface: " + surface);
    }
    max_tokens_ = std::max(max_tokens_, static_cast<int>(tokens.size()));
  }

  /// Reads `surface,concept_id,group` rows; the first line must be exactly
  /// that header.
  static Gazetteer load(std::istream& in) {
    Gazetteer gaz;
    std::string line;
    if (!std::getline(in, line) || csv_split(line) !=
        std::vector<std::string>{"surface", "concept_id", "group"}) {
      throw error("gazetteer: missing surface,concept_id,group header");
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto cols = csv_split(line);
      if (cols.size() != 3) {
        throw error("gazetteer: expected 3 columns @line " +
                    std::to_string(lineno));
      }
      gaz.add(cols[0], cols[1], semantic_group_from_string(cols[2]));
    }
    return gaz;
  }

  static Gazetteer load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open gazetteer file: " + path);
    return load(in);
  }

  const Concept* find(std::span<const std::string> tokens) const {
    const auto it = entries_.find(join_key(tokens));
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  int max_tokens() const { return max_tokens_; }

  static std::string join_key(std::span<const std::string> tokens) {
    std::string key;
    for (const auto& t : tokens) {
      if (!key.empty()) key.push_back('\x1f');
      key += t;
    }
    return key;
  }

 private:
  std::unordered_map<std::string, Concept> entries_;
  int max_tokens_ = 0;
};

struct EntityMention {
  std::string concept_id;
  SemanticGroup group = SemanticGroup::Disorders;
  int sent_id = 0;
  int token_start = 0;  // within the sentence
  int token_len = 1;
  int note_index = 0;  // kSummaryNoteIndex for summary mentions
  double rel_pos = 0.0;  // mention start / scope token count, in [0, 1)
};

/// Left-to-right longest-match dictionary scan over a sentence's tokens.
/// After a match the scan resumes past it, so mentions never overlap.
inline std::vector<EntityMention> link(const SentenceRecord& sent,
                                       const Gazetteer& gaz) {
  std::vector<EntityMention> mentions;
  if (gaz.empty()) return mentions;
  const auto& toks = sent.tokens;
  const std::size_t n = toks.size();
  std::size_t i = 0;
  while (i < n) {
    const std::size_t cap =
        std::min<std::size_t>(static_cast<std::size_t>(gaz.max_tokens()), n - i);
    bool matched = false;
    for (std::size_t len = cap; len >= 1; --len) {
      const auto* hit =
          gaz.find(std::span<const std::string>(toks).subspan(i, len));
      if (hit == nullptr) continue;
      EntityMention m;
      m.concept_id = hit->concept_id;
      m.group = hit->group;
      m.sent_id = sent.sent_id;
      m.token_start = static_cast<int>(i);
      m.token_len = static_cast<int>(len);
      m.note_index = sent.note_index;
      m.rel_pos = sent.note_token_count > 0
                      ? static_cast<double>(sent.note_token_offset +
                                            static_cast<int>(i)) /
                            sent.note_token_count
                      : 0.0;
      mentions.push_back(std::move(m));
      i += len;
      matched = true;
      break;
    }
    if (!matched) ++i;
  }
  return mentions;
}

struct AdmissionMentions {
  std::vector<EntityMention> source;   // reading order across all notes
  std::vector<EntityMention> summary;  // reading order across the summary
};

inline AdmissionMentions link_view(const AdmissionView& view,
                                   const Gazetteer& gaz) {
  AdmissionMentions out;
  for (const auto& sent : view.source) {
    for (auto& m : link(sent, gaz)) out.source.push_back(std::move(m));
  }
  for (const auto& sent : view.summary) {
    for (auto& m : link(sent, gaz)) out.summary.push_back(std::move(m));
  }
  return out;
}

inline std::vector<AdmissionMentions> link_corpus(
    std::span<const AdmissionView> views, const Gazetteer& gaz, int jobs = 1) {
  std::vector<AdmissionMentions> out(views.size());
  parallel_for(views.size(), jobs,
               [&](std::size_t i) { out[i] = link_view(views[i], gaz); });
  return out;
}

// ---------------------------------------------------------------------------
// Density and compression

struct DensityStats {
  double summary_entity_token_frac = 0.0;
  double source_entity_token_frac = 0.0;
  double mean_unique_summary = 0.0;
  double mean_unique_source = 0.0;
  // mean over admissions with >= 1 summary concept of
  // unique-source-concepts / unique-summary-concepts
  double entity_compression = 0.0;
  std::int64_t n_admissions = 0;
  std::int64_t n_with_summary_concepts = 0;
};

namespace detail {

inline std::unordered_set<std::string> concept_set(
    std::span<const EntityMention> mentions) {
  std::unordered_set<std::string> ids;
  for (const auto& m : mentions) ids.insert(m.concept_id);
  return ids;
}

}  // namespace detail

inline DensityStats density_stats(std::span<const AdmissionView> views,
                                  std::span<const AdmissionMentions> mentions) {
  if (views.size() != mentions.size()) {
    throw error("density_stats: views/mentions size mismatch");
  }
  DensityStats stats;
  stats.n_admissions = static_cast<std::int64_t>(views.size());
  std::int64_t sum_tokens = 0, sum_entity_tokens = 0;
  std::int64_t src_tokens = 0, src_entity_tokens = 0;
  double uniq_sum = 0.0, uniq_src = 0.0, compression = 0.0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    sum_tokens += static_cast<std::int64_t>(views[i].summary_tokens.size());
    for (const auto& s : views[i].source) {
      src_tokens += static_cast<std::int64_t>(s.tokens.size());
    }
    for (const auto& m : mentions[i].summary) sum_entity_tokens += m.token_len;
    for (const auto& m : mentions[i].source) src_entity_tokens += m.token_len;
    const auto sum_ids = detail::concept_set(mentions[i].summary);
    const auto src_ids = detail::concept_set(mentions[i].source);
    uniq_sum += static_cast<double>(sum_ids.size());
    uniq_src += static_cast<double>(src_ids.size());
    if (!sum_ids.empty()) {
      ++stats.n_with_summary_concepts;
      compression += static_cast<double>(src_ids.size()) /
                     static_cast<double>(sum_ids.size());
    }
  }
  const double n = static_cast<double>(views.size());
  if (n > 0) {
    stats.mean_unique_summary = uniq_sum / n;
    stats.mean_unique_source = uniq_src / n;
  }
  if (sum_tokens > 0) {
    stats.summary_entity_token_frac =
        static_cast<double>(sum_entity_tokens) / static_cast<double>(sum_tokens);
  }
  if (src_tokens > 0) {
    stats.source_entity_token_frac =
        static_cast<double>(src_entity_tokens) / static_cast<double>(src_tokens);
  }
  if (stats.n_with_summary_concepts > 0) {
    stats.entity_compression =
        compression / static_cast<double>(stats.n_with_summary_concepts);
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Inclusion probability vs. source mention frequency

struct InclusionBin {
  int mention_count = 0;  // per-admission source mentions; last bin = ">= bins"
  std::int64_t n_concepts = 0;
  double p_in_summary = 0.0;
};

/// Pools (admission, concept) events with at least one source mention; the
/// final bin absorbs counts >= bins.
inline std::vector<InclusionBin> inclusion_curve(
    std::span<const AdmissionMentions> mentions, int bins = 10) {
  if (bins < 1) throw error("inclusion_curve: bins must be positive");
  std::vector<std::int64_t> total(static_cast<std::size_t>(bins), 0);
  std::vector<std::int64_t> included(static_cast<std::size_t>(bins), 0);
  for (const auto& adm : mentions) {
    std::unordered_map<std::string, int> source_counts;
    for (const auto& m : adm.source) ++source_counts[m.concept_id];
    const auto in_summary = detail::concept_set(adm.summary);
    for (const auto& [cid, count] : source_counts) {
      const int bin = std::min(count, bins) - 1;
      ++total[static_cast<std::size_t>(bin)];
      if (in_summary.count(cid) > 0) {
        ++included[static_cast<std::size_t>(bin)];
      }
    }
  }
  std::vector<InclusionBin> out;
  for (int b = 0; b < bins; ++b) {
    InclusionBin row;
    row.mention_count = b + 1;
    row.n_concepts = total[static_cast<std::size_t>(b)];
    row.p_in_summary =
        row.n_concepts > 0
            ? static_cast<double>(included[static_cast<std::size_t>(b)]) /
                  static_cast<double>(row.n_concepts)
            : 0.0;
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Note-ordering coverage of summary concepts

enum class NoteOrder { Forward, Backward, GreedyOracle };

inline const char* to_string(NoteOrder order) {
  switch (order) {
    case NoteOrder::Forward: return "forward";
    case NoteOrder::Backward: return "backward";
    case NoteOrder::GreedyOracle: return "greedy_oracle";
  }
  return "?";
}

inline constexpr int kOrderingDeciles = 10;

struct MacroOrdering {
  bool skipped = false;  // no summary concepts attainable from the source
  std::array<double, kOrderingDeciles> cumulative{};  // coverage after decile d
  int notes_to_read = 0;
  double percent_to_read = 0.0;
};

/// Coverage of summary concepts as notes are read in the given order. The
/// decile-d value is the covered fraction after floor(d*n/10) notes, so note
/// ranks map to deciles by ceil(rank*10/n).
inline MacroOrdering macro_ordering(const AdmissionView& view,
                                    const AdmissionMentions& mentions,
                                    NoteOrder order) {
  MacroOrdering result;
  const int n_notes = static_cast<int>(view.note_types.size());
  if (n_notes == 0) {
    result.skipped = true;
    return result;
  }
  std::vector<std::set<std::string>> note_concepts(
      static_cast<std::size_t>(n_notes));
  const auto targets = detail::concept_set(mentions.summary);
  for (const auto& m : mentions.source) {
    if (targets.count(m.concept_id) > 0) {
      note_concepts[static_cast<std::size_t>(m.note_index)].insert(
          m.concept_id);
    }
  }
  std::set<std::string> attainable;
  for (const auto& s : note_concepts) attainable.insert(s.begin(), s.end());
  if (attainable.empty()) {
    result.skipped = true;
    return result;
  }

  std::vector<int> ordering;
  switch (order) {
    case NoteOrder::Forward:
      for (int i = 0; i < n_notes; ++i) ordering.push_back(i);
      break;
    case NoteOrder::Backward:
      for (int i = n_notes - 1; i >= 0; --i) ordering.push_back(i);
      break;
    case NoteOrder::GreedyOracle: {
      std::vector<bool> used(static_cast<std::size_t>(n_notes), false);
      std::set<std::string> covered;
      for (;;) {
        int best = -1;
        std::size_t best_gain = 0;
        for (int i = 0; i < n_notes; ++i) {
          if (used[static_cast<std::size_t>(i)]) continue;
          std::size_t gain = 0;
          for (const auto& c : note_concepts[static_cast<std::size_t>(i)]) {
            if (covered.count(c) == 0) ++gain;
          }
          if (gain > best_gain) {  // strict: ties keep the earlier note
            best_gain = gain;
            best = i;
          }
        }
        if (best < 0) break;
        used[static_cast<std::size_t>(best)] = true;
        ordering.push_back(best);
        const auto& add = note_concepts[static_cast<std::size_t>(best)];
        covered.insert(add.begin(), add.end());
      }
      for (int i = 0; i < n_notes; ++i) {
        if (!used[static_cast<std::size_t>(i)]) ordering.push_back(i);
      }
      break;
    }
  }

  // covered(k) = concepts reached by the first k notes of the ordering
  std::vector<std::size_t> covered_at(static_cast<std::size_t>(n_notes) + 1, 0);
  std::set<std::string> covered;
  result.notes_to_read = n_notes;
  for (int k = 1; k <= n_notes; ++k) {
    const auto& add = note_concepts[static_cast<std::size_t>(
        ordering[static_cast<std::size_t>(k - 1)])];
    covered.insert(add.begin(), add.end());
    covered_at[static_cast<std::size_t>(k)] = covered.size();
    if (covered.size() == attainable.size() && result.notes_to_read == n_notes &&
        covered_at[static_cast<std::size_t>(k - 1)] != attainable.size()) {
      result.notes_to_read = k;
    }
  }
  result.percent_to_read =
      static_cast<double>(result.notes_to_read) / static_cast<double>(n_notes);
  for (int d = 1; d <= kOrderingDeciles; ++d) {
    const int k = d * n_notes / kOrderingDeciles;
    result.cumulative[static_cast<std::size_t>(d - 1)] =
        static_cast<double>(covered_at[static_cast<std::size_t>(k)]) /
        static_cast<double>(attainable.size());
  }
  return result;
}

struct MacroAggregate {
  std::array<double, kOrderingDeciles> mean_cumulative{};
  double mean_notes_to_read = 0.0;
  double mean_percent_to_read = 0.0;
  std::int64_t n_used = 0;
  std::int64_t n_skipped = 0;
};

inline MacroAggregate aggregate_macro_ordering(
    std::span<const AdmissionView> views,
    std::span<const AdmissionMentions> mentions, NoteOrder order) {
  if (views.size() != mentions.size()) {
    throw error("aggregate_macro_ordering: views/mentions size mismatch");
  }
  MacroAggregate agg;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto res = macro_ordering(views[i], mentions[i], order);
    if (res.skipped) {
      ++agg.n_skipped;
      continue;
    }
    ++agg.n_used;
    for (int d = 0; d < kOrderingDeciles; ++d) {
      agg.mean_cumulative[static_cast<std::size_t>(d)] +=
          res.cumulative[static_cast<std::size_t>(d)];
    }
    agg.mean_notes_to_read += static_cast<double>(res.notes_to_read);
    agg.mean_percent_to_read += res.percent_to_read;
  }
  if (agg.n_used > 0) {
    const double n = static_cast<double>(agg.n_used);
    for (auto& v : agg.mean_cumulative) v /= n;
    agg.mean_notes_to_read /= n;
    agg.mean_percent_to_read /= n;
  }
  return agg;
}

// ---------------------------------------------------------------------------
// Within-note position of summary-relevant source mentions

/// Histogram over the within-note relative position of source mentions whose
/// concept appears in the same admission's summary. Normalized to sum 1
/// (all-zero when no mention qualifies).
inline std::vector<double> micro_histogram(
    std::span<const AdmissionMentions> mentions, int bins = 10) {
  if (bins < 1) throw error("micro_histogram: bins must be positive");
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  std::int64_t total = 0;
  for (const auto& adm : mentions) {
    const auto targets = detail::concept_set(adm.summary);
    for (const auto& m : adm.source) {
      if (targets.count(m.concept_id) == 0) continue;
      const int bin = std::min(static_cast<int>(m.rel_pos * bins), bins - 1);
      hist[static_cast<std::size_t>(std::max(bin, 0))] += 1.0;
      ++total;
    }
  }
  if (total > 0) {
    for (auto& v : hist) v /= static_cast<double>(total);
  }
  return hist;
}

// ---------------------------------------------------------------------------
// Semantic-group transition matrices

struct TransitionMatrix {
  std::vector<std::string> groups;  // row/column labels
  std::vector<std::vector<std::int64_t>> counts;
  std::vector<std::vector<double>> probs;  // row-normalized
  std::vector<bool> uniform_row;           // true where a zero row was filled
  bool empty = true;                       // no transition observed at all

  std::int64_t total() const {
    std::int64_t t = 0;
    for (const auto& row : counts) {
      for (const auto c : row) t += c;
    }
    return t;
  }

  /// Fraction of observed transitions that stay within one group.
  double diagonal_share() const {
    const std::int64_t t = total();
    if (t == 0) return 0.0;
    std::int64_t diag = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) diag += counts[i][i];
    return static_cast<double>(diag) / static_cast<double>(t);
  }
};

namespace detail {

inline std::vector<SemanticGroup> transition_groups(bool include_lab_results) {
  std::vector<SemanticGroup> groups = {SemanticGroup::Disorders,
                                       SemanticGroup::ChemicalsDrugs,
                                       SemanticGroup::Procedures};
  if (include_lab_results) groups.push_back(SemanticGroup::LabResults);
  return groups;
}

/// Adds consecutive-pair counts for one document scope (a note or a summary).
/// Mentions must already be in reading order; out-of-scope groups are dropped
/// from the sequence before pairing.
inline void count_transitions(std::span<const EntityMention> ordered,
                              bool include_lab_results,
                              std::vector<std::vector<std::int64_t>>& counts) {
  const int n_groups = include_lab_results ? 4 : 3;
  int prev = -1;
  for (const auto& m : ordered) {
    const int g = static_cast<int>(m.group);
    if (g >= n_groups) continue;
    if (prev >= 0) {
      ++counts[static_cast<std::size_t>(prev)][static_cast<std::size_t>(g)];
    }
    prev = g;
  }
}

inline TransitionMatrix finalize_transitions(
    std::vector<std::vector<std::int64_t>> counts, bool include_lab_results) {
  TransitionMatrix m;
  for (const auto g : transition_groups(include_lab_results)) {
    m.groups.push_back(to_string(g));
  }
  m.counts = std::move(counts);
  m.empty = true;
  const std::size_t n = m.counts.size();
  m.probs.assign(n, std::vector<double>(n, 0.0));
  m.uniform_row.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t row_total = 0;
    for (const auto c : m.counts[i]) row_total += c;
    if (row_total == 0) {
      m.uniform_row[i] = true;
      for (auto& p : m.probs[i]) p = 1.0 / static_cast<double>(n);
      continue;
    }
    m.empty = false;
    for (std::size_t j = 0; j < n; ++j) {
      m.probs[i][j] = static_cast<double>(m.counts[i][j]) /
                      static_cast<double>(row_total);
    }
  }
  return m;
}

}  // namespace detail

/// Transition matrix for one ordered mention sequence.
inline TransitionMatrix transitions(std::span<const EntityMention> ordered,
                                    bool include_lab_results = false) {
  const std::size_t n = include_lab_results ? 4 : 3;
  std::vector<std::vector<std::int64_t>> counts(n,
                                                std::vector<std::int64_t>(n, 0));
  detail::count_transitions(ordered, include_lab_results, counts);
  return detail::finalize_transitions(std::move(counts), include_lab_results);
}

/// Corpus-level matrices: source transitions count pairs within each note,
/// summary transitions within each summary.
inline std::pair<TransitionMatrix, TransitionMatrix> corpus_transitions(
    std::span<const AdmissionView> views,
    std::span<const AdmissionMentions> mentions,
    bool include_lab_results = false) {
  if (views.size() != mentions.size()) {
    throw error("corpus_transitions: views/mentions size mismatch");
  }
  const std::size_t n = include_lab_results ? 4 : 3;
  std::vector<std::vector<std::int64_t>> src(n, std::vector<std::int64_t>(n, 0));
  std::vector<std::vector<std::int64_t>> sum(n, std::vector<std::int64_t>(n, 0));
  for (std::size_t i = 0; i < views.size(); ++i) {
    const std::size_t n_notes = views[i].note_types.size();
    std::vector<std::vector<EntityMention>> per_note(n_notes);
    for (const auto& m : mentions[i].source) {
      per_note[static_cast<std::size_t>(m.note_index)].push_back(m);
    }
    for (const auto& note : per_note) {
      detail::count_transitions(note, include_lab_results, src);
    }
    detail::count_transitions(mentions[i].summary, include_lab_results, sum);
  }
  return {detail::finalize_transitions(std::move(src), include_lab_results),
          detail::finalize_transitions(std::move(sum), include_lab_results)};
}

// ---------------------------------------------------------------------------
// Positional distribution of summary mentions by group

struct PositionalGroups {
  int bins = 10;
  // [group][bin] — each group's distribution sums to 1 unless it has no
  // mentions (then the row is all zeros and n_mentions[group] == 0)
  std::array<std::vector<double>, kNumGroups> distribution;
  std::array<std::int64_t, kNumGroups> n_mentions{};
};

inline PositionalGroups positional_groups(
    std::span<const AdmissionMentions> mentions, int bins = 10) {
  if (bins < 1) throw error("positional_groups: bins must be positive");
  PositionalGroups out;
  out.bins = bins;
  for (auto& d : out.distribution) d.assign(static_cast<std::size_t>(bins), 0.0);
  for (const auto& adm : mentions) {
    for (const auto& m : adm.summary) {
      const int g = static_cast<int>(m.group);
      const int bin = std::min(static_cast<int>(m.rel_pos * bins), bins - 1);
      out.distribution[static_cast<std::size_t>(g)]
                      [static_cast<std::size_t>(std::max(bin, 0))] += 1.0;
      ++out.n_mentions[static_cast<std::size_t>(g)];
    }
  }
  for (int g = 0; g < kNumGroups; ++g) {
    const auto n = out.n_mentions[static_cast<std::size_t>(g)];
    if (n == 0) continue;
    for (auto& v : out.distribution[static_cast<std::size_t>(g)]) {
      v /= static_cast<double>(n);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Global group shares

struct GroupShares {
  std::array<std::int64_t, kNumGroups> source_counts{};
  std::array<std::int64_t, kNumGroups> summary_counts{};
  std::array<double, kNumGroups> source_share{};
  std::array<double, kNumGroups> summary_share{};
};

inline GroupShares global_proportions(
    std::span<const AdmissionMentions> mentions) {
  GroupShares out;
  std::int64_t src_total = 0, sum_total = 0;
  for (const auto& adm : mentions) {
    for (const auto& m : adm.source) {
      ++out.source_counts[static_cast<std::size_t>(m.group)];
      ++src_total;
    }
    for (const auto& m : adm.summary) {
      ++out.summary_counts[static_cast<std::size_t>(m.group)];
      ++sum_total;
    }
  }
  for (int g = 0; g < kNumGroups; ++g) {
    if (src_total > 0) {
      out.source_share[static_cast<std::size_t>(g)] =
          static_cast<double>(out.source_counts[static_cast<std::size_t>(g)]) /
          static_cast<double>(src_total);
    }
    if (sum_total > 0) {
      out.summary_share[static_cast<std::size_t>(g)] =
          static_cast<double>(out.summary_counts[static_cast<std::size_t>(g)]) /
          static_cast<double>(sum_total);
    }
  }
  return out;
}

}  // namespace sumkit
