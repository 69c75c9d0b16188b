#pragma once

// Entity grids, sentence-permutation ranking pairs, and a small convolutional
// scorer trained to rank a text's grid above row-shuffled versions of itself.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "sumkit/corpus.hpp"
#include "sumkit/entities.hpp"
#include "sumkit/error.hpp"
#include "sumkit/parallel.hpp"
#include "sumkit/random.hpp"

namespace sumkit {

inline constexpr const char* kEmptyCell = "EMPTY";

/// Sentence × entity presence matrix. Columns are ordered by first mention.
struct EntityGrid {
  int n_sentences = 0;
  std::vector<std::string> entities;
  std::vector<std::vector<std::uint8_t>> present;  // [sentence][entity], 0/1

  std::string cell(int s, int e) const {
    return present[static_cast<std::size_t>(s)][static_cast<std::size_t>(e)]
               ? entities[static_cast<std::size_t>(e)]
               : kEmptyCell;
  }

  bool operator==(const EntityGrid& other) const {
    return n_sentences == other.n_sentences && entities == other.entities &&
           present == other.present;
  }
};

/// Presence is binary: repeated mentions of a concept within one sentence
/// collapse into a single cell.
inline EntityGrid build_grid(std::span<const SentenceRecord> sentences,
                             std::span<const EntityMention> mentions) {
  if (mentions.empty()) throw error("entity grid has no entities");
  EntityGrid grid;
  grid.n_sentences = static_cast<int>(sentences.size());
  std::unordered_map<int, int> row_of;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    row_of[sentences[i].sent_id] = static_cast<int>(i);
  }
  std::unordered_map<std::string, int> col_of;
  std::vector<std::pair<int, int>> cells;  // (row, col)
  for (const auto& m : mentions) {
    const auto row_it = row_of.find(m.sent_id);
    if (row_it == row_of.end()) {
      throw error("entity grid mention references unknown sentence id " +
                  std::to_string(m.sent_id));
    }
    auto [col_it, inserted] =
        col_of.emplace(m.concept_id, static_cast<int>(grid.entities.size()));
    if (inserted) grid.entities.push_back(m.concept_id);
    cells.emplace_back(row_it->second, col_it->second);
  }
  grid.present.assign(
      static_cast<std::size_t>(grid.n_sentences),
      std::vector<std::uint8_t>(grid.entities.size(), 0));
  for (const auto& [row, col] : cells) {
    grid.present[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] =
        1;
  }
  return grid;
}

inline EntityGrid permute_rows(const EntityGrid& grid,
                               std::span<const int> permutation) {
  if (permutation.size() != static_cast<std::size_t>(grid.n_sentences)) {
    throw error("row permutation length mismatch");
  }
  EntityGrid out;
  out.n_sentences = grid.n_sentences;
  out.entities = grid.entities;
  out.present.reserve(permutation.size());
  for (const int row : permutation) {
    out.present.push_back(grid.present.at(static_cast<std::size_t>(row)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model

struct CoherenceConfig {
  int embed_dim = 8;
  int filters = 16;
  int width = 3;
  double margin = 1.0;
  double lr = 0.01;
};

/// Scoring: embed each cell token, run per-column 1-D convolutions along the
/// sentence axis (no convolution bias; zero rows pad grids shorter than the
/// filter width), global max-pool each filter over positions and columns, and
/// map the pooled vector linearly to a scalar.
struct CoherenceModel {
  CoherenceConfig cfg;
  std::vector<std::string> vocab;              // concept ids; EMPTY is row 0
  std::unordered_map<std::string, int> index;  // concept -> embedding row
  std::vector<double> emb;                     // (vocab+1) x d
  std::vector<double> conv;                    // F x w x d
  std::vector<double> out_w;                   // F
  double bias = 0.0;

  // scoring is const and parallel; the counter is bookkeeping only
  mutable std::atomic<std::int64_t> unknown_tokens{0};

  CoherenceModel() = default;
  CoherenceModel(const CoherenceModel& o)
      : cfg(o.cfg),
        vocab(o.vocab),
        index(o.index),
        emb(o.emb),
        conv(o.conv),
        out_w(o.out_w),
        bias(o.bias),
        unknown_tokens(o.unknown_tokens.load()) {}
  CoherenceModel& operator=(const CoherenceModel& o) {
    if (this != &o) {
      cfg = o.cfg;
      vocab = o.vocab;
      index = o.index;
      emb = o.emb;
      conv = o.conv;
      out_w = o.out_w;
      bias = o.bias;
      unknown_tokens.store(o.unknown_tokens.load());
    }
    return *this;
  }

  int token_row(const std::string& concept_id) const {
    const auto it = index.find(concept_id);
    if (it == index.end()) {
      unknown_tokens.fetch_add(1, std::memory_order_relaxed);
      return 0;
    }
    return it->second;
  }

  struct ScoreTrace {
    std::vector<double> pooled;  // per filter
    std::vector<int> best_col;
    std::vector<int> best_pos;
  };

  double score(const EntityGrid& grid) const {
    ScoreTrace trace;
    return score_traced(grid, trace);
  }

  double score_traced(const EntityGrid& grid, ScoreTrace& trace) const {
    if (grid.entities.empty()) throw error("cannot score a grid with no entities");
    const int d = cfg.embed_dim;
    const int w = cfg.width;
    const int n_filters = cfg.filters;
    const int s_count = grid.n_sentences;
    const int padded = std::max(s_count, w);
    const int positions = padded - w + 1;
    const int n_cols = static_cast<int>(grid.entities.size());

    trace.pooled.assign(static_cast<std::size_t>(n_filters),
                        -std::numeric_limits<double>::infinity());
    trace.best_col.assign(static_cast<std::size_t>(n_filters), -1);
    trace.best_pos.assign(static_cast<std::size_t>(n_filters), -1);

    std::vector<int> col_rows(static_cast<std::size_t>(s_count));
    for (int e = 0; e < n_cols; ++e) {
      const int concept_row = token_row(grid.entities[static_cast<std::size_t>(e)]);
      for (int s = 0; s < s_count; ++s) {
        col_rows[static_cast<std::size_t>(s)] =
            grid.present[static_cast<std::size_t>(s)]
                        [static_cast<std::size_t>(e)]
                ? concept_row
                : 0;
      }
      for (int p = 0; p < positions; ++p) {
        for (int f = 0; f < n_filters; ++f) {
          double val = 0.0;
          for (int i = 0; i < w; ++i) {
            const int s = p + i;
            if (s >= s_count) continue;  // zero padding row
            const double* e_row =
                emb.data() + static_cast<std::size_t>(
                                 col_rows[static_cast<std::size_t>(s)]) *
                                 static_cast<std::size_t>(d);
            const double* w_row =
                conv.data() +
                (static_cast<std::size_t>(f) * static_cast<std::size_t>(w) +
                 static_cast<std::size_t>(i)) *
                    static_cast<std::size_t>(d);
            for (int j = 0; j < d; ++j) val += w_row[j] * e_row[j];
          }
          if (val > trace.pooled[static_cast<std::size_t>(f)]) {
            trace.pooled[static_cast<std::size_t>(f)] = val;
            trace.best_col[static_cast<std::size_t>(f)] = e;
            trace.best_pos[static_cast<std::size_t>(f)] = p;
          }
        }
      }
    }
    double result = bias;
    for (int f = 0; f < n_filters; ++f) {
      result += out_w[static_cast<std::size_t>(f)] *
                trace.pooled[static_cast<std::size_t>(f)];
    }
    return result;
  }
};

inline CoherenceModel init_coherence_model(std::vector<std::string> vocab,
                                           const CoherenceConfig& cfg,
                                           std::uint64_t seed) {
  CoherenceModel model;
  model.cfg = cfg;
  model.vocab = std::move(vocab);
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    if (!model.index.emplace(model.vocab[i], static_cast<int>(i) + 1).second) {
      throw error("duplicate concept in model vocabulary: " + model.vocab[i]);
    }
  }
  rng_t rng(seed);
  const auto d = static_cast<std::size_t>(cfg.embed_dim);
  model.emb.resize((model.vocab.size() + 1) * d);
  model.conv.resize(static_cast<std::size_t>(cfg.filters) *
                    static_cast<std::size_t>(cfg.width) * d);
  model.out_w.resize(static_cast<std::size_t>(cfg.filters));
  auto fill = [&](std::vector<double>& v) {
    for (auto& x : v) x = (uniform01(rng) - 0.5) * 0.2;
  };
  fill(model.emb);
  fill(model.conv);
  fill(model.out_w);
  model.bias = 0.0;
  return model;
}

// ---------------------------------------------------------------------------
// Ranking pairs

struct RankingPair {
  EntityGrid original;
  EntityGrid permuted;
  std::vector<int> permutation;
  std::uint64_t seed = 0;
};

namespace detail {

inline void fisher_yates(std::vector<int>& v, rng_t& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<int>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

/// Samples a non-identity row permutation whose permuted grid differs from the
/// original. Returns false when impossible (all rows identical).
inline bool sample_breaking_permutation(const EntityGrid& grid, rng_t& rng,
                                        std::vector<int>& perm) {
  const int s = grid.n_sentences;
  if (s < 2) return false;
  perm.resize(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (int attempt = 0; attempt < 8; ++attempt) {
    fisher_yates(perm, rng);
    bool identity = true;
    bool changed = false;
    for (int i = 0; i < s; ++i) {
      if (perm[static_cast<std::size_t>(i)] != i) identity = false;
      if (grid.present[static_cast<std::size_t>(
              perm[static_cast<std::size_t>(i)])] !=
          grid.present[static_cast<std::size_t>(i)]) {
        changed = true;
      }
    }
    if (!identity && changed) return true;
  }
  // deterministic fallback: swap the first two rows that differ
  for (int i = 0; i < s; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (int a = 0; a < s; ++a) {
    for (int b = a + 1; b < s; ++b) {
      if (grid.present[static_cast<std::size_t>(a)] !=
          grid.present[static_cast<std::size_t>(b)]) {
        std::swap(perm[static_cast<std::size_t>(a)],
                  perm[static_cast<std::size_t>(b)]);
        return true;
      }
    }
  }
  return false;  // every row equal: no permutation can change the grid
}

}  // namespace detail

struct RankingPairSet {
  std::vector<RankingPair> pairs;
  std::int64_t n_docs_skipped = 0;  // too short or permutation-invariant
};

inline RankingPairSet make_ranking_pairs(std::span<const EntityGrid> grids,
                                         int pairs_per_doc,
                                         std::uint64_t seed) {
  if (pairs_per_doc < 1) throw error("pairs_per_doc must be positive");
  RankingPairSet out;
  for (std::size_t gi = 0; gi < grids.size(); ++gi) {
    const auto& grid = grids[gi];
    const std::uint64_t doc_seed = derive_seed(seed, gi);
    rng_t rng(doc_seed);
    if (grid.n_sentences < 2) {
      ++out.n_docs_skipped;
      continue;
    }
    bool any = false;
    for (int k = 0; k < pairs_per_doc; ++k) {
      std::vector<int> perm;
      if (!detail::sample_breaking_permutation(grid, rng, perm)) break;
      RankingPair pair;
      pair.original = grid;
      pair.permuted = permute_rows(grid, perm);
      pair.permutation = std::move(perm);
      pair.seed = doc_seed;
      out.pairs.push_back(std::move(pair));
      any = true;
    }
    if (!any) ++out.n_docs_skipped;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace detail {

struct CoherenceGrads {
  std::vector<double> emb, conv, out_w;
  double bias = 0.0;

  void reset(const CoherenceModel& m) {
    emb.assign(m.emb.size(), 0.0);
    conv.assign(m.conv.size(), 0.0);
    out_w.assign(m.out_w.size(), 0.0);
    bias = 0.0;
  }
};

/// Adds coeff * d(score)/d(theta) for one scored grid into grads.
inline void accumulate_score_grad(const CoherenceModel& model,
                                  const EntityGrid& grid,
                                  const CoherenceModel::ScoreTrace& trace,
                                  double coeff, CoherenceGrads& grads) {
  const int d = model.cfg.embed_dim;
  const int w = model.cfg.width;
  for (int f = 0; f < model.cfg.filters; ++f) {
    const auto fi = static_cast<std::size_t>(f);
    grads.out_w[fi] += coeff * trace.pooled[fi];
    const double w_out = model.out_w[fi];
    const int e = trace.best_col[fi];
    const int p = trace.best_pos[fi];
    const int concept_row =
        model.token_row(grid.entities[static_cast<std::size_t>(e)]);
    for (int i = 0; i < w; ++i) {
      const int s = p + i;
      if (s >= grid.n_sentences) continue;  // zero padding: no gradient
      const int tok = grid.present[static_cast<std::size_t>(s)]
                                  [static_cast<std::size_t>(e)]
                          ? concept_row
                          : 0;
      for (int j = 0; j < d; ++j) {
        const auto wi =
            (fi * static_cast<std::size_t>(w) + static_cast<std::size_t>(i)) *
                static_cast<std::size_t>(d) +
            static_cast<std::size_t>(j);
        const auto ei = static_cast<std::size_t>(tok) *
                            static_cast<std::size_t>(d) +
                        static_cast<std::size_t>(j);
        grads.conv[wi] += coeff * w_out * model.emb[ei];
        grads.emb[ei] += coeff * w_out * model.conv[wi];
      }
    }
  }
  grads.bias += coeff;
}

}  // namespace detail

/// Computes max(0, margin - score(original) + score(permuted)) and, when the
/// hinge is active, dL/dtheta into grads. Returns the loss.
inline double coherence_pair_loss(const CoherenceModel& model,
                                  const RankingPair& pair,
                                  detail::CoherenceGrads* grads) {
  CoherenceModel::ScoreTrace to, tp;
  const double s_orig = model.score_traced(pair.original, to);
  const double s_perm = model.score_traced(pair.permuted, tp);
  const double loss = model.cfg.margin - s_orig + s_perm;
  if (loss <= 0.0) return 0.0;
  if (grads != nullptr) {
    detail::accumulate_score_grad(model, pair.original, to, -1.0, *grads);
    detail::accumulate_score_grad(model, pair.permuted, tp, 1.0, *grads);
  }
  return loss;
}

/// Per-pair SGD on the hinge ranking loss; returns the mean loss per epoch.
inline std::vector<double> train_coherence(CoherenceModel& model,
                                           std::span<const RankingPair> pairs,
                                           int epochs, std::uint64_t seed) {
  if (pairs.empty()) throw error("coherence training needs at least one pair");
  if (epochs < 1) throw error("epochs must be positive");
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng_t rng(seed);
  detail::CoherenceGrads grads;
  std::vector<double> trace;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          uniform_int(rng, 0, static_cast<int>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    double total = 0.0;
    for (const std::size_t idx : order) {
      grads.reset(model);
      const double loss = coherence_pair_loss(model, pairs[idx], &grads);
      if (!std::isfinite(loss)) {
        throw error("non-finite coherence loss at epoch " +
                    std::to_string(epoch));
      }
      if (loss <= 0.0) continue;
      total += loss;
      const double lr = model.cfg.lr;
      for (std::size_t k = 0; k < model.emb.size(); ++k) {
        model.emb[k] -= lr * grads.emb[k];
      }
      for (std::size_t k = 0; k < model.conv.size(); ++k) {
        model.conv[k] -= lr * grads.conv[k];
      }
      for (std::size_t k = 0; k < model.out_w.size(); ++k) {
        model.out_w[k] -= lr * grads.out_w[k];
      }
      model.bias -= lr * grads.bias;
    }
    trace.push_back(total / static_cast<double>(pairs.size()));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Evaluation

struct PairwiseAccuracy {
  double accuracy = 0.0;  // strict wins; ties count as failures
  std::int64_t wins = 0;
  std::int64_t comparisons = 0;
};

inline PairwiseAccuracy pairwise_accuracy(const CoherenceModel& model,
                                          std::span<const EntityGrid> grids,
                                          int perms_per_doc, std::uint64_t seed,
                                          int jobs = 1) {
  if (perms_per_doc < 1) throw error("perms_per_doc must be positive");
  for (const auto& g : grids) {
    if (g.n_sentences < 2) {
      throw error("pairwise accuracy needs grids with at least 2 sentences");
    }
  }
  std::vector<std::int64_t> wins(grids.size(), 0);
  std::vector<std::int64_t> comparisons(grids.size(), 0);
  parallel_for(grids.size(), jobs, [&](std::size_t i) {
    const auto& grid = grids[i];
    rng_t rng(derive_seed(seed, i));
    const double s_orig = model.score(grid);
    std::vector<int> perm(static_cast<std::size_t>(grid.n_sentences));
    for (int k = 0; k < perms_per_doc; ++k) {
      for (int j = 0; j < grid.n_sentences; ++j) {
        perm[static_cast<std::size_t>(j)] = j;
      }
      do {
        detail::fisher_yates(perm, rng);
      } while (std::is_sorted(perm.begin(), perm.end()));
      const double s_perm = model.score(permute_rows(grid, perm));
      ++comparisons[i];
      if (s_orig > s_perm) ++wins[i];
    }
  });
  PairwiseAccuracy out;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    out.wins += wins[i];
    out.comparisons += comparisons[i];
  }
  if (out.comparisons > 0) {
    out.accuracy = static_cast<double>(out.wins) /
                   static_cast<double>(out.comparisons);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Entity repetition structure of summaries

struct ChainStats {
  double singleton_fraction = 0.0;
  double adjacent_fraction = 0.0;  // among multi-mention concepts
  std::int64_t n_concepts = 0;     // (admission, concept) events
  std::int64_t n_multi = 0;
  bool adjacent_defined = false;
};

inline ChainStats chain_stats(std::span<const AdmissionMentions> mentions) {
  ChainStats out;
  std::int64_t singletons = 0, adjacent = 0;
  for (const auto& adm : mentions) {
    std::unordered_map<std::string, std::vector<int>> sent_ids;
    for (const auto& m : adm.summary) {
      sent_ids[m.concept_id].push_back(m.sent_id);
    }
    for (auto& [cid, ids] : sent_ids) {
      ++out.n_concepts;
      if (ids.size() == 1) {
        ++singletons;
        continue;
      }
      ++out.n_multi;
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
        if (ids[i + 1] - ids[i] == 1) {
          ++adjacent;
          break;
        }
      }
    }
  }
  if (out.n_concepts > 0) {
    out.singleton_fraction =
        static_cast<double>(singletons) / static_cast<double>(out.n_concepts);
  }
  if (out.n_multi > 0) {
    out.adjacent_defined = true;
    out.adjacent_fraction =
        static_cast<double>(adjacent) / static_cast<double>(out.n_multi);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpointing

inline nlohmann::json model_to_json(const CoherenceModel& model) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["config"] = {{"embed_dim", model.cfg.embed_dim},
                 {"filters", model.cfg.filters},
                 {"width", model.cfg.width},
                 {"margin", model.cfg.margin},
                 {"lr", model.cfg.lr}};
  j["vocab"] = model.vocab;
  j["embedding"] = model.emb;
  j["conv"] = model.conv;
  j["output_weights"] = model.out_w;
  j["bias"] = model.bias;
  return j;
}

inline CoherenceModel model_from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1) {
    throw error("unsupported coherence model format");
  }
  CoherenceModel model;
  const auto& cfg = j.at("config");
  model.cfg.embed_dim = cfg.at("embed_dim").get<int>();
  model.cfg.filters = cfg.at("filters").get<int>();
  model.cfg.width = cfg.at("width").get<int>();
  model.cfg.margin = cfg.at("margin").get<double>();
  model.cfg.lr = cfg.at("lr").get<double>();
  model.vocab = j.at("vocab").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    model.index.emplace(model.vocab[i], static_cast<int>(i) + 1);
  }
  model.emb = j.at("embedding").get<std::vector<double>>();
  model.conv = j.at("conv").get<std::vector<double>>();
  model.out_w = j.at("output_weights").get<std::vector<double>>();
  model.bias = j.at("bias").get<double>();
  const auto d = static_cast<std::size_t>(model.cfg.embed_dim);
  if (model.emb.size() != (model.vocab.size() + 1) * d ||
      model.conv.size() != static_cast<std::size_t>(model.cfg.filters) *
                               static_cast<std::size_t>(model.cfg.width) * d ||
      model.out_w.size() != static_cast<std::size_t>(model.cfg.filters)) {
    throw error("coherence model tensor shapes are inconsistent");
  }
  return model;
}

}  // namespace sumkit
