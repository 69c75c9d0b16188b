#pragma once

// Oracle extraction labels with soft targets, a feature-based trainable
// sentence scorer with a KL objective, greedy inference, and rank-deviation
// evaluation against the oracle gain ordering.

#include <algorithm>
#include <array>
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
#include "sumkit/lexical.hpp"
#include "sumkit/numeric.hpp"
#include "sumkit/oracles.hpp"
#include "sumkit/random.hpp"

namespace sumkit {

// ---------------------------------------------------------------------------
// Label derivation

struct LabelConfig {
  double min_best_gain = 0.01;     // stop when the best step gain drops below
  double min_differential = 0.02;  // discard steps where best-min gain is below
  int min_tokens = 3;
  double temperature = 5.0;
  bool divide_temperature = false;  // default: multiply normalized gains
  // zero-reference-overlap sentences are dropped with probability
  // clamp((source_sentences - ramp_start) / ramp_len, 0, cap)
  double drop_ramp_start = 200.0;
  double drop_ramp_len = 2000.0;
  double drop_cap = 0.8;
};

inline double zero_overlap_drop_prob(std::size_t n_source_sentences,
                                     const LabelConfig& cfg) {
  const double p =
      (static_cast<double>(n_source_sentences) - cfg.drop_ramp_start) /
      cfg.drop_ramp_len;
  return std::clamp(p, 0.0, cfg.drop_cap);
}

struct ExtractionStep {
  int step_index = 0;              // position in the greedy trajectory
  std::vector<int> candidate_ids;  // source sentence ids, pool order
  std::vector<double> gains;       // aligned with candidate_ids
  int chosen_id = -1;              // argmax gain, ties to the earlier sentence
  std::vector<double> soft_targets;
  std::vector<int> prefix_ids;  // sentences selected before this step
  double best_gain = 0.0;
  double min_gain = 0.0;
  double cumulative_r12 = 0.0;
};

struct LabelResult {
  std::vector<ExtractionStep> steps;
  bool empty_pool = false;
  std::vector<int> pool_ids;  // candidates surviving the filters
};

namespace detail {

/// softmax of min-max-normalized gains scaled by the temperature. A flat gain
/// vector normalizes to all-zeros and therefore softmaxes to uniform.
inline std::vector<double> gain_soft_targets(std::span<const double> gains,
                                             const LabelConfig& cfg) {
  const auto [lo_it, hi_it] = std::minmax_element(gains.begin(), gains.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> scaled(gains.size(), 0.0);
  if (hi > lo) {
    for (std::size_t i = 0; i < gains.size(); ++i) {
      const double norm = (gains[i] - lo) / (hi - lo);
      scaled[i] = cfg.divide_temperature ? norm / cfg.temperature
                                         : norm * cfg.temperature;
    }
  }
  return softmax(scaled);
}

inline bool has_alpha(const std::vector<std::string>& tokens) {
  for (const auto& t : tokens) {
    for (const char c : t) {
      if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return true;
    }
  }
  return false;
}

}  // namespace detail

/// Greedy gain labeling over the filtered candidate pool. The 1% best-gain
/// threshold stops the trajectory; the 2% best-vs-min differential filter
/// discards a step's label afterwards without altering the trajectory.
inline LabelResult derive_labels(const AdmissionView& view,
                                 const LabelConfig& cfg, std::uint64_t seed) {
  LabelResult result;
  rng_t rng(seed);
  const double drop_p = zero_overlap_drop_prob(view.source.size(), cfg);
  std::unordered_set<std::string> ref_tokens(view.summary_tokens.begin(),
                                             view.summary_tokens.end());
  std::unordered_set<std::string> seen_keys;
  for (const auto& sent : view.source) {
    if (static_cast<int>(sent.tokens.size()) < cfg.min_tokens) continue;
    if (!detail::has_alpha(sent.tokens)) continue;
    if (!seen_keys.insert(Gazetteer::join_key(sent.tokens)).second) continue;
    bool overlaps = false;
    for (const auto& t : sent.tokens) {
      if (ref_tokens.count(t) > 0) {
        overlaps = true;
        break;
      }
    }
    if (!overlaps && uniform01(rng) < drop_p) continue;
    result.pool_ids.push_back(sent.sent_id);
  }
  if (result.pool_ids.empty()) {
    result.empty_pool = true;
    return result;
  }

  TokenInterner interner;
  RougeAccumulator acc(interner.ids(view.summary_tokens));
  std::vector<std::vector<int>> pool_tokens;
  pool_tokens.reserve(result.pool_ids.size());
  std::unordered_map<int, std::size_t> token_slot;
  for (std::size_t i = 0; i < result.pool_ids.size(); ++i) {
    const auto& sent =
        view.source[static_cast<std::size_t>(result.pool_ids[i])];
    pool_tokens.push_back(interner.ids(sent.tokens));
    token_slot[result.pool_ids[i]] = i;
  }
  std::vector<int> remaining = result.pool_ids;
  std::vector<int> prefix;
  double current = 0.0;
  for (int step = 0;; ++step) {
    std::vector<double> gains(remaining.size());
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      gains[i] = acc.peek_r12(pool_tokens[token_slot[remaining[i]]]) - current;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < gains.size(); ++i) {
      if (gains[i] > gains[best]) best = i;
    }
    if (gains[best] < cfg.min_best_gain) break;

    ExtractionStep rec;
    rec.step_index = step;
    rec.candidate_ids = remaining;
    rec.gains = gains;
    rec.chosen_id = remaining[best];
    rec.prefix_ids = prefix;
    rec.best_gain = gains[best];
    rec.min_gain = *std::min_element(gains.begin(), gains.end());
    rec.soft_targets = detail::gain_soft_targets(gains, cfg);

    acc.append(pool_tokens[token_slot[remaining[best]]]);
    current += gains[best];
    rec.cumulative_r12 = current;
    prefix.push_back(remaining[best]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));

    if (rec.best_gain - rec.min_gain >= cfg.min_differential) {
      result.steps.push_back(std::move(rec));
    }
    if (remaining.empty()) break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Features

inline constexpr int kNumFeatures = 15;
inline constexpr int kNumNoteTypes = 4;

struct FeatureScaler {
  double len_scale = 1.0;  // mean source sentence length, at least 1
  double ent_scale = 1.0;  // mean mentions per source sentence, at least 1
};

inline FeatureScaler fit_feature_scaler(
    std::span<const AdmissionView> views,
    std::span<const AdmissionMentions> mentions) {
  if (views.size() != mentions.size()) {
    throw error("fit_feature_scaler: views/mentions size mismatch");
  }
  FeatureScaler scaler;
  std::int64_t sentences = 0, tokens = 0, n_mentions = 0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    sentences += static_cast<std::int64_t>(views[i].source.size());
    for (const auto& s : views[i].source) {
      tokens += static_cast<std::int64_t>(s.tokens.size());
    }
    n_mentions += static_cast<std::int64_t>(mentions[i].source.size());
  }
  if (sentences > 0) {
    scaler.len_scale = std::max(
        1.0, static_cast<double>(tokens) / static_cast<double>(sentences));
    scaler.ent_scale = std::max(
        1.0, static_cast<double>(n_mentions) / static_cast<double>(sentences));
  }
  return scaler;
}

/// Frozen per-admission inputs for featurization: TF-IDF geometry, entity
/// counts, and note-position metadata for every source sentence.
struct AdmissionFeatures {
  FeatureScaler scaler;
  std::vector<std::vector<std::pair<int, double>>> tfidf;  // per sentence
  std::vector<double> centroid_cosine;  // cosine(sentence, source centroid)
  std::vector<std::array<double, kNumGroups>> group_counts;
  std::vector<double> note_decile;  // ceil((note_idx+1)*10/n_notes)/10
  std::vector<NoteType> note_type;  // per sentence
};

inline AdmissionFeatures build_admission_features(
    const AdmissionView& view, const AdmissionMentions& mentions,
    const FeatureScaler& scaler) {
  AdmissionFeatures out;
  out.scaler = scaler;
  const std::size_t n = view.source.size();

  TokenInterner interner;
  std::vector<std::vector<int>> docs(n);
  for (std::size_t i = 0; i < n; ++i) {
    docs[i] = interner.ids(view.source[i].tokens);
  }
  out.tfidf = detail::tfidf_vectors(docs, interner.size());

  std::vector<double> centroid(interner.size(), 0.0);
  for (const auto& vec : out.tfidf) {
    for (const auto& [t, v] : vec) centroid[static_cast<std::size_t>(t)] += v;
  }
  double centroid_norm = 0.0;
  if (n > 0) {
    for (auto& v : centroid) {
      v /= static_cast<double>(n);
      centroid_norm += v * v;
    }
    centroid_norm = std::sqrt(centroid_norm);
  }
  out.centroid_cosine.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (centroid_norm <= 0.0) break;
    double dot = 0.0;
    for (const auto& [t, v] : out.tfidf[i]) {
      dot += v * centroid[static_cast<std::size_t>(t)];
    }
    out.centroid_cosine[i] = dot / centroid_norm;  // sentence vecs are unit
  }

  out.group_counts.assign(n, {});
  for (const auto& m : mentions.source) {
    // mention sent ids are flat indices into view.source
    out.group_counts[static_cast<std::size_t>(m.sent_id)]
                    [static_cast<std::size_t>(m.group)] += 1.0;
  }

  const double n_notes = static_cast<double>(view.note_types.size());
  out.note_decile.assign(n, 0.0);
  out.note_type.assign(n, NoteType::Other);
  for (std::size_t i = 0; i < n; ++i) {
    const int note = view.source[i].note_index;
    out.note_decile[i] =
        n_notes > 0
            ? std::ceil((note + 1) * 10.0 / n_notes) / 10.0
            : 0.0;
    out.note_type[i] = view.note_types[static_cast<std::size_t>(note)];
  }
  return out;
}

/// Summary-aware feature vector for one candidate sentence given the sentences
/// already selected. Fixed order:
///   0 length  1 note decile  2 within-note position  3 centroid cosine
///   4-7 entity-group counts  8 unigram / 9 bigram overlap with the partial
///   summary  10 max R12 to a selected sentence  11-14 note-type one-hot
inline std::array<double, kNumFeatures> featurize(
    const AdmissionView& view, const AdmissionFeatures& feats, int sent_id,
    std::span<const int> selected_ids) {
  std::array<double, kNumFeatures> f{};
  const auto& sent = view.source.at(static_cast<std::size_t>(sent_id));
  const auto si = static_cast<std::size_t>(sent_id);
  f[0] = static_cast<double>(sent.tokens.size()) / feats.scaler.len_scale;
  f[1] = feats.note_decile[si];
  f[2] = sent.rel_pos();
  f[3] = feats.centroid_cosine[si];
  for (int g = 0; g < kNumGroups; ++g) {
    f[static_cast<std::size_t>(4 + g)] =
        feats.group_counts[si][static_cast<std::size_t>(g)] /
        feats.scaler.ent_scale;
  }
  if (!selected_ids.empty() && !sent.tokens.empty()) {
    std::unordered_set<std::string> uni;
    std::unordered_set<std::string> bi;
    for (const int id : selected_ids) {
      const auto& sel = view.source.at(static_cast<std::size_t>(id));
      for (const auto& t : sel.tokens) uni.insert(t);
      for (std::size_t k = 0; k + 1 < sel.tokens.size(); ++k) {
        bi.insert(sel.tokens[k] + '\x1f' + sel.tokens[k + 1]);
      }
    }
    int uni_hits = 0;
    for (const auto& t : sent.tokens) {
      if (uni.count(t) > 0) ++uni_hits;
    }
    f[8] = static_cast<double>(uni_hits) /
           static_cast<double>(sent.tokens.size());
    if (sent.tokens.size() >= 2) {
      int bi_hits = 0;
      for (std::size_t k = 0; k + 1 < sent.tokens.size(); ++k) {
        if (bi.count(sent.tokens[k] + '\x1f' + sent.tokens[k + 1]) > 0) {
          ++bi_hits;
        }
      }
      f[9] = static_cast<double>(bi_hits) /
             static_cast<double>(sent.tokens.size() - 1);
    }
    double redundancy = 0.0;
    for (const int id : selected_ids) {
      const auto& sel = view.source.at(static_cast<std::size_t>(id));
      redundancy = std::max(redundancy, r12(sent.tokens, sel.tokens));
    }
    f[10] = redundancy;
  }
  const int type = static_cast<int>(feats.note_type[si]);
  f[static_cast<std::size_t>(11 + type)] = 1.0;
  return f;
}

// ---------------------------------------------------------------------------
// Scorer model: kNumFeatures -> 32 -> 16 -> 1, Tanh hidden layers

struct ScorerConfig {
  int hidden1 = 32;
  int hidden2 = 16;
  double lr = 0.005;
};

struct ScorerModel {
  ScorerConfig cfg;
  std::vector<double> w1, b1;  // hidden1 x in, hidden1
  std::vector<double> w2, b2;  // hidden2 x hidden1, hidden2
  std::vector<double> w3;      // hidden2
  double b3 = 0.0;

  struct Trace {
    std::vector<double> h1, h2;  // post-Tanh activations
  };

  double forward(std::span<const double, kNumFeatures> x, Trace& t) const {
    const int h1n = cfg.hidden1, h2n = cfg.hidden2;
    t.h1.assign(static_cast<std::size_t>(h1n), 0.0);
    for (int i = 0; i < h1n; ++i) {
      double z = b1[static_cast<std::size_t>(i)];
      const double* row =
          w1.data() + static_cast<std::size_t>(i) * kNumFeatures;
      for (int j = 0; j < kNumFeatures; ++j) z += row[j] * x[static_cast<std::size_t>(j)];
      t.h1[static_cast<std::size_t>(i)] = std::tanh(z);
    }
    t.h2.assign(static_cast<std::size_t>(h2n), 0.0);
    for (int i = 0; i < h2n; ++i) {
      double z = b2[static_cast<std::size_t>(i)];
      const double* row =
          w2.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(h1n);
      for (int j = 0; j < h1n; ++j) {
        z += row[static_cast<std::size_t>(j)] * t.h1[static_cast<std::size_t>(j)];
      }
      t.h2[static_cast<std::size_t>(i)] = std::tanh(z);
    }
    double out = b3;
    for (int i = 0; i < h2n; ++i) {
      out += w3[static_cast<std::size_t>(i)] * t.h2[static_cast<std::size_t>(i)];
    }
    return out;
  }

  double score(std::span<const double, kNumFeatures> x) const {
    Trace t;
    return forward(x, t);
  }
};

inline ScorerModel init_scorer(const ScorerConfig& cfg, std::uint64_t seed) {
  ScorerModel model;
  model.cfg = cfg;
  rng_t rng(seed);
  auto fill = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (auto& x : v) x = (uniform01(rng) - 0.5) * 0.2;
  };
  fill(model.w1, static_cast<std::size_t>(cfg.hidden1) * kNumFeatures);
  fill(model.b1, static_cast<std::size_t>(cfg.hidden1));
  fill(model.w2,
       static_cast<std::size_t>(cfg.hidden2) * static_cast<std::size_t>(cfg.hidden1));
  fill(model.b2, static_cast<std::size_t>(cfg.hidden2));
  fill(model.w3, static_cast<std::size_t>(cfg.hidden2));
  model.b3 = 0.0;
  return model;
}

// ---------------------------------------------------------------------------
// Training

/// One labeled extraction step with frozen features per candidate.
struct PreparedStep {
  int step_index = 0;
  std::vector<std::array<double, kNumFeatures>> features;
  std::vector<double> targets;
  std::vector<double> gains;
};

struct PreparedAdmission {
  std::string admission_id;
  std::vector<PreparedStep> steps;
};

inline PreparedAdmission prepare_admission(const AdmissionView& view,
                                           const AdmissionMentions& mentions,
                                           const FeatureScaler& scaler,
                                           const LabelResult& labels) {
  PreparedAdmission out;
  out.admission_id = view.admission_id;
  const auto feats = build_admission_features(view, mentions, scaler);
  for (const auto& step : labels.steps) {
    PreparedStep prepared;
    prepared.step_index = step.step_index;
    prepared.targets = step.soft_targets;
    prepared.gains = step.gains;
    prepared.features.reserve(step.candidate_ids.size());
    for (const int id : step.candidate_ids) {
      prepared.features.push_back(
          featurize(view, feats, id, step.prefix_ids));
    }
    out.steps.push_back(std::move(prepared));
  }
  return out;
}

namespace detail {

struct ScorerGrads {
  std::vector<double> w1, b1, w2, b2, w3;
  double b3 = 0.0;

  void reset(const ScorerModel& m) {
    w1.assign(m.w1.size(), 0.0);
    b1.assign(m.b1.size(), 0.0);
    w2.assign(m.w2.size(), 0.0);
    b2.assign(m.b2.size(), 0.0);
    w3.assign(m.w3.size(), 0.0);
    b3 = 0.0;
  }
};

/// Backpropagates dL/d(score_i) = coeff through the MLP for one candidate.
inline void accumulate_scorer_grad(const ScorerModel& model,
                                   std::span<const double, kNumFeatures> x,
                                   const ScorerModel::Trace& t, double coeff,
                                   ScorerGrads& g) {
  const int h1n = model.cfg.hidden1, h2n = model.cfg.hidden2;
  std::vector<double> d2(static_cast<std::size_t>(h2n));
  for (int i = 0; i < h2n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    g.w3[ii] += coeff * t.h2[ii];
    d2[ii] = coeff * model.w3[ii] * (1.0 - t.h2[ii] * t.h2[ii]);
    g.b2[ii] += d2[ii];
  }
  g.b3 += coeff;
  std::vector<double> d1(static_cast<std::size_t>(h1n), 0.0);
  for (int i = 0; i < h2n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const auto row = static_cast<std::size_t>(i) * static_cast<std::size_t>(h1n);
    for (int j = 0; j < h1n; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      g.w2[row + jj] += d2[ii] * t.h1[jj];
      d1[jj] += d2[ii] * model.w2[row + jj];
    }
  }
  for (int j = 0; j < h1n; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    d1[jj] *= 1.0 - t.h1[jj] * t.h1[jj];
    g.b1[jj] += d1[jj];
    const auto row = jj * kNumFeatures;
    for (int k = 0; k < kNumFeatures; ++k) {
      g.w1[row + static_cast<std::size_t>(k)] +=
          d1[jj] * x[static_cast<std::size_t>(k)];
    }
  }
}

}  // namespace detail

/// KL(targets || softmax(scores)) for one step; gradients accumulate when
/// grads is non-null. dL/d(score_i) = p_i - t_i.
inline double scorer_step_loss(const ScorerModel& model,
                               const PreparedStep& step,
                               detail::ScorerGrads* grads) {
  const std::size_t n = step.features.size();
  std::vector<double> scores(n);
  std::vector<ScorerModel::Trace> traces(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = model.forward(step.features[i], traces[i]);
  }
  const auto p = softmax(scores);
  const double loss = kl_divergence(step.targets, p);
  if (grads != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      detail::accumulate_scorer_grad(model, step.features[i], traces[i],
                                     p[i] - step.targets[i], *grads);
    }
  }
  return loss;
}

/// One uniformly sampled step per admission per epoch, SGD updates, mean
/// sampled loss per epoch returned.
inline std::vector<double> train_scorer(ScorerModel& model,
                                        std::span<const PreparedAdmission> adms,
                                        int epochs, std::uint64_t seed) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < adms.size(); ++i) {
    if (!adms[i].steps.empty()) usable.push_back(i);
  }
  if (usable.empty()) throw error("scorer training needs at least one step");
  if (epochs < 1) throw error("epochs must be positive");
  rng_t rng(seed);
  detail::ScorerGrads grads;
  std::vector<double> trace;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = usable.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          uniform_int(rng, 0, static_cast<int>(i) - 1));
      std::swap(usable[i - 1], usable[j]);
    }
    double total = 0.0;
    for (const std::size_t ai : usable) {
      const auto& steps = adms[ai].steps;
      const auto& step = steps[static_cast<std::size_t>(uniform_int(
          rng, 0, static_cast<int>(steps.size()) - 1))];
      grads.reset(model);
      const double loss = scorer_step_loss(model, step, &grads);
      if (!std::isfinite(loss)) {
        throw error("non-finite scorer loss at epoch " + std::to_string(epoch));
      }
      total += loss;
      const double lr = model.cfg.lr;
      for (std::size_t k = 0; k < model.w1.size(); ++k) model.w1[k] -= lr * grads.w1[k];
      for (std::size_t k = 0; k < model.b1.size(); ++k) model.b1[k] -= lr * grads.b1[k];
      for (std::size_t k = 0; k < model.w2.size(); ++k) model.w2[k] -= lr * grads.w2[k];
      for (std::size_t k = 0; k < model.b2.size(); ++k) model.b2[k] -= lr * grads.b2[k];
      for (std::size_t k = 0; k < model.w3.size(); ++k) model.w3[k] -= lr * grads.w3[k];
      model.b3 -= lr * grads.b3;
    }
    trace.push_back(total / static_cast<double>(usable.size()));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Inference

inline constexpr int kDefaultMaxSents = 13;

struct InferenceResult {
  ExtractSummary summary;
  bool empty_pool = false;
};

/// Greedy argmax extraction: candidate features are recomputed against the
/// growing partial summary each step; ties go to the earlier pool sentence.
inline InferenceResult infer(const ScorerModel& model, const AdmissionView& view,
                             const AdmissionMentions& mentions,
                             const FeatureScaler& scaler,
                             const LabelConfig& cfg,
                             int max_sents = kDefaultMaxSents) {
  InferenceResult result;
  result.summary.method = Method::Learned;
  const auto feats = build_admission_features(view, mentions, scaler);
  std::vector<int> pool;
  std::unordered_set<std::string> seen_keys;
  for (const auto& sent : view.source) {
    if (static_cast<int>(sent.tokens.size()) < cfg.min_tokens) continue;
    if (!detail::has_alpha(sent.tokens)) continue;
    if (!seen_keys.insert(Gazetteer::join_key(sent.tokens)).second) continue;
    pool.push_back(sent.sent_id);
  }
  if (pool.empty()) {
    result.empty_pool = true;
    return result;
  }
  std::vector<int> selected;
  while (static_cast<int>(selected.size()) < max_sents && !pool.empty()) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto x = featurize(view, feats, pool[i], selected);
      const double s = model.score(x);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    selected.push_back(pool[best]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
  }
  result.summary = detail::finalize_summary(Method::Learned, view, selected);
  return result;
}

// ---------------------------------------------------------------------------
// Rank deviation against the oracle ordering

namespace detail {

/// 1-based rank of the chosen candidate in the (gain desc, position asc)
/// ordering.
inline int oracle_rank(std::span<const double> gains, std::size_t chosen) {
  int rank = 1;
  for (std::size_t j = 0; j < gains.size(); ++j) {
    if (j == chosen) continue;
    if (gains[j] > gains[chosen] || (gains[j] == gains[chosen] && j < chosen)) {
      ++rank;
    }
  }
  return rank;
}

}  // namespace detail

inline constexpr int kRankBuckets = 6;  // steps 1..5 and >5

struct RankBucket {
  std::string label;
  double mean_rank = 0.0;
  double median_rank = 0.0;
  std::int64_t n = 0;
};

/// Ranks the scorer's argmax pick within each labeled step's oracle gain
/// ordering, aggregated per step index (1..5, then >5).
inline std::vector<RankBucket> rank_deviation(
    const ScorerModel& model, std::span<const PreparedAdmission> adms) {
  std::array<std::vector<double>, kRankBuckets> ranks;
  for (const auto& adm : adms) {
    for (const auto& step : adm.steps) {
      std::size_t best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < step.features.size(); ++i) {
        const double s = model.score(step.features[i]);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      const int rank = detail::oracle_rank(step.gains, best);
      const int bucket = std::min(step.step_index, kRankBuckets - 1);
      ranks[static_cast<std::size_t>(bucket)].push_back(
          static_cast<double>(rank));
    }
  }
  std::vector<RankBucket> out;
  for (int b = 0; b < kRankBuckets; ++b) {
    RankBucket bucket;
    bucket.label = b < kRankBuckets - 1 ? std::to_string(b + 1) : ">5";
    auto& rs = ranks[static_cast<std::size_t>(b)];
    bucket.n = static_cast<std::int64_t>(rs.size());
    if (!rs.empty()) {
      bucket.mean_rank = mean_std(rs).mean;
      bucket.median_rank = median(rs);
    }
    out.push_back(std::move(bucket));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpointing

inline nlohmann::json scorer_to_json(const ScorerModel& model) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["config"] = {{"hidden1", model.cfg.hidden1},
                 {"hidden2", model.cfg.hidden2},
                 {"lr", model.cfg.lr}};
  j["n_features"] = kNumFeatures;
  j["w1"] = model.w1;
  j["b1"] = model.b1;
  j["w2"] = model.w2;
  j["b2"] = model.b2;
  j["w3"] = model.w3;
  j["b3"] = model.b3;
  return j;
}

inline ScorerModel scorer_from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1) {
    throw error("unsupported scorer model format");
  }
  if (j.at("n_features").get<int>() != kNumFeatures) {
    throw error("scorer feature count mismatch");
  }
  ScorerModel model;
  const auto& cfg = j.at("config");
  model.cfg.hidden1 = cfg.at("hidden1").get<int>();
  model.cfg.hidden2 = cfg.at("hidden2").get<int>();
  model.cfg.lr = cfg.at("lr").get<double>();
  model.w1 = j.at("w1").get<std::vector<double>>();
  model.b1 = j.at("b1").get<std::vector<double>>();
  model.w2 = j.at("w2").get<std::vector<double>>();
  model.b2 = j.at("b2").get<std::vector<double>>();
  model.w3 = j.at("w3").get<std::vector<double>>();
  model.b3 = j.at("b3").get<double>();
  const auto h1 = static_cast<std::size_t>(model.cfg.hidden1);
  const auto h2 = static_cast<std::size_t>(model.cfg.hidden2);
  if (model.w1.size() != h1 * kNumFeatures || model.b1.size() != h1 ||
      model.w2.size() != h2 * h1 || model.b2.size() != h2 ||
      model.w3.size() != h2) {
    throw error("scorer model tensor shapes are inconsistent");
  }
  return model;
}

}  // namespace sumkit
