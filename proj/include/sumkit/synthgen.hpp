#pragma once

// Seeded synthetic-corpus generator. Every admission is built from disjoint
// token pools (source filler, summary filler, entity surfaces), so linking
// the emitted text against the emitted gazetteer recovers exactly the
// planted mention sets, and extractive fragments in summaries come only from
// deliberate verbatim copies.
//
// Planted structure, all knob-controlled:
//   - the admission note mentions every problem concept once, so a greedy
//     note ordering covers all attainable summary concepts immediately
//   - extra mentions spread over later notes give graded per-concept counts;
//     a concept enters the summary with probability 0.10 + 0.085 * count
//     (clamped to 0.95), making the inclusion curve monotone by construction
//   - background concepts appear exactly once and never in the summary
//   - disorder mentions sit early in each note and drug/lab mentions late
//   - notes copy forward the previous note's filler sentences; summaries
//     copy filler sentences verbatim into tail slots at the same probability
//   - the one-liner (first sentence of the admission note) is the longest
//     copied fragment and is prepended to every note and the summary
//   - summary problem paragraphs come from a template pool shared across
//     admissions, alternating disorder- and drug-bearing sentences

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sumkit/corpus.hpp"
#include "sumkit/csv.hpp"
#include "sumkit/entities.hpp"
#include "sumkit/error.hpp"
#include "sumkit/random.hpp"

namespace sumkit {

struct GenConfig {
  int n_admissions = 500;
  int notes_min = 3;
  int notes_max = 8;
  int sents_min = 4;  // fresh filler sentences per note
  int sents_max = 10;
  double copy_forward_prob = 0.35;
  double edit_prob = 0.15;
  int problems_min = 2;
  int problems_max = 5;
  int gazetteer_per_group = 40;
  int template_pool_size = 12;
  bool oneliner_copy = true;
  double chain_density = 0.4;
  std::uint64_t seed = 0;
};

inline void validate(const GenConfig& cfg) {
  auto range_ok = [](int lo, int hi) { return lo >= 1 && lo <= hi; };
  if (cfg.n_admissions < 1) throw error("gen: n_admissions must be positive");
  if (!range_ok(cfg.notes_min, cfg.notes_max)) {
    throw error("gen: notes range is empty");
  }
  if (!range_ok(cfg.sents_min, cfg.sents_max)) {
    throw error("gen: sents range is empty");
  }
  if (!range_ok(cfg.problems_min, cfg.problems_max)) {
    throw error("gen: problems range is empty");
  }
  for (const double p :
       {cfg.copy_forward_prob, cfg.edit_prob, cfg.chain_density}) {
    if (!(p >= 0.0 && p <= 1.0)) throw error("gen: probability outside [0,1]");
  }
  if (cfg.gazetteer_per_group < cfg.problems_max + 3) {
    throw error("gen: gazetteer too small for the problem range");
  }
  if (cfg.template_pool_size < 1) throw error("gen: empty template pool");
}

/// Probability that a concept mentioned `count` times in the source enters
/// the summary: linear in count, saturating at 0.95 from count 10 up so
/// adjacent count bins below the cap never tie.
inline double inclusion_probability(int count) {
  return std::clamp(0.10 + 0.085 * static_cast<double>(count), 0.0, 0.95);
}

// ---------------------------------------------------------------------------
// Ground truth

struct CopyFragment {
  int summary_token_start = 0;  // offset into the tokenized summary
  int length = 0;               // tokens
  int note_index = 0;           // source location
  int sent_index = 0;           // sentence within that note
};

struct PlantedProblem {
  std::string disorder;   // concept id, always present
  std::string drug;       // empty when the problem has no such concept
  std::string procedure;
  std::string lab;
};

struct AdmissionTruth {
  std::string admission_id;
  std::vector<PlantedProblem> problems;
  std::vector<std::string> background;        // count-1, never in the summary
  std::map<std::string, int> concept_counts;  // source mentions per concept
  std::set<std::string> summary_concepts;
  std::vector<CopyFragment> copies;
};

struct GroundTruth {
  std::vector<AdmissionTruth> admissions;
};

struct GazetteerRow {
  std::string surface;
  std::string concept_id;
  SemanticGroup group = SemanticGroup::Disorders;
};

struct GenResult {
  std::vector<Admission> admissions;
  GroundTruth truth;
  Gazetteer gazetteer;
};

namespace detail {

inline std::string numbered(const char* prefix, int k) {
  std::string s = prefix;
  s += static_cast<char>('0' + k / 10);
  s += static_cast<char>('0' + k % 10);
  return s;
}

inline constexpr int kSourceFillerPool = 60;
inline constexpr int kSummaryFillerPool = 24;

inline std::string source_filler(int k) { return numbered("fw", k); }
inline std::string summary_filler(int k) { return numbered("sw", k); }

inline std::string pick_source_filler(rng_t& rng) {
  return source_filler(uniform_int(rng, 0, kSourceFillerPool - 1));
}

inline std::string pick_summary_filler(rng_t& rng) {
  return summary_filler(uniform_int(rng, 0, kSummaryFillerPool - 1));
}

/// Sentence of `n` source-filler tokens.
inline std::vector<std::string> filler_sentence(rng_t& rng, int n) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(pick_source_filler(rng));
  return out;
}

/// Filler sentence carrying exactly one entity mention at a fixed offset.
inline std::vector<std::string> mention_sentence(rng_t& rng,
                                                 const std::string& surface) {
  const int tail = uniform_int(rng, 1, 3);
  std::vector<std::string> out;
  out.push_back(pick_source_filler(rng));
  out.push_back(pick_source_filler(rng));
  out.push_back(surface);
  for (int i = 0; i < tail; ++i) out.push_back(pick_source_filler(rng));
  return out;
}

/// Renders token sentences as note text: first letter capitalized, period
/// terminated, single-space separated.
inline std::string render(const std::vector<std::vector<std::string>>& sents) {
  std::string out;
  for (const auto& sent : sents) {
    if (sent.empty()) continue;
    std::string s;
    for (const auto& t : sent) {
      if (!s.empty()) s.push_back(' ');
      s += t;
    }
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    if (!out.empty()) out.push_back(' ');
    out += s;
    out.push_back('.');
  }
  return out;
}

/// Summary-paragraph templates: summary-filler words with slots for a primary
/// and an optional secondary concept. Slots holding an empty string are
/// dropped at render time.
struct SentenceTemplate {
  std::vector<std::string> words;  // kPrimarySlot / kSecondarySlot markers
};

inline constexpr const char* kPrimarySlot = "\x01P";
inline constexpr const char* kSecondarySlot = "\x01S";

inline std::vector<SentenceTemplate> make_templates(std::uint64_t seed,
                                                    int pool_size) {
  rng_t rng(seed);
  std::vector<SentenceTemplate> out;
  for (int t = 0; t < pool_size; ++t) {
    SentenceTemplate tpl;
    const int lead = uniform_int(rng, 1, 2);
    const int mid = uniform_int(rng, 1, 2);
    const int tail = uniform_int(rng, 0, 1);
    for (int i = 0; i < lead; ++i) tpl.words.push_back(pick_summary_filler(rng));
    tpl.words.push_back(kPrimarySlot);
    for (int i = 0; i < mid; ++i) tpl.words.push_back(pick_summary_filler(rng));
    tpl.words.push_back(kSecondarySlot);
    for (int i = 0; i < tail; ++i) tpl.words.push_back(pick_summary_filler(rng));
    out.push_back(std::move(tpl));
  }
  return out;
}

inline std::vector<std::string> render_template(const SentenceTemplate& tpl,
                                                const std::string& primary,
                                                const std::string& secondary) {
  std::vector<std::string> out;
  for (const auto& w : tpl.words) {
    if (w == kPrimarySlot) {
      if (!primary.empty()) out.push_back(primary);
    } else if (w == kSecondarySlot) {
      if (!secondary.empty()) out.push_back(secondary);
    } else {
      out.push_back(w);
    }
  }
  return out;
}

inline std::vector<int> sample_distinct(rng_t& rng, int n, int k) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < k; ++i) {
    const int j = uniform_int(rng, i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace detail

inline std::vector<GazetteerRow> synth_gazetteer_rows(const GenConfig& cfg) {
  std::vector<GazetteerRow> rows;
  const struct {
    const char* prefix;
    const char* id_prefix;
    SemanticGroup group;
  } groups[] = {
      {"cond", "COND", SemanticGroup::Disorders},
      {"drug", "DRUG", SemanticGroup::ChemicalsDrugs},
      {"proc", "PROC", SemanticGroup::Procedures},
      {"lab", "LAB", SemanticGroup::LabResults},
  };
  for (const auto& g : groups) {
    for (int k = 0; k < cfg.gazetteer_per_group; ++k) {
      rows.push_back({detail::numbered(g.prefix, k),
                      detail::numbered(g.id_prefix, k), g.group});
    }
  }
  return rows;
}

inline GenResult generate(const GenConfig& cfg) {
  validate(cfg);
  GenResult result;
  const auto rows = synth_gazetteer_rows(cfg);
  for (const auto& row : rows) {
    result.gazetteer.add(row.surface, row.concept_id, row.group);
  }
  // surface lookup by group, index follows the row order above
  auto surface_of = [&](SemanticGroup g, int k) {
    return rows[static_cast<std::size_t>(g) *
                    static_cast<std::size_t>(cfg.gazetteer_per_group) +
                static_cast<std::size_t>(k)]
        .surface;
  };
  auto id_of = [&](SemanticGroup g, int k) {
    return rows[static_cast<std::size_t>(g) *
                    static_cast<std::size_t>(cfg.gazetteer_per_group) +
                static_cast<std::size_t>(k)]
        .concept_id;
  };

  const auto templates = detail::make_templates(
      derive_seed(cfg.seed, 0x7e3aULL), cfg.template_pool_size);

  for (int a = 0; a < cfg.n_admissions; ++a) {
    rng_t rng(derive_seed(cfg.seed, 0x1000ULL + static_cast<std::uint64_t>(a)));
    Admission adm;
    AdmissionTruth truth;
    {
      char buf[16];
      std::snprintf(buf, sizeof buf, "SYN-%06d", a);
      adm.admission_id = buf;
    }
    truth.admission_id = adm.admission_id;
    const int digit = a % 10;
    adm.split = digit <= 6 ? Split::Train
                           : (digit <= 8 ? Split::Valid : Split::Test);

    const int n_notes = uniform_int(rng, cfg.notes_min, cfg.notes_max);
    const int n_problems = uniform_int(rng, cfg.problems_min, cfg.problems_max);

    // sample distinct concepts per group: problems first, then background
    auto disorders = detail::sample_distinct(rng, cfg.gazetteer_per_group,
                                             n_problems + 1);
    auto drugs = detail::sample_distinct(rng, cfg.gazetteer_per_group,
                                         n_problems + 1);
    auto procs = detail::sample_distinct(rng, cfg.gazetteer_per_group,
                                         n_problems + 1);
    auto labs = detail::sample_distinct(rng, cfg.gazetteer_per_group,
                                        n_problems + 1);

    struct Planted {
      std::string surface;
      std::string id;
      SemanticGroup group = SemanticGroup::Disorders;
      int problem = 0;
      std::vector<int> extra_notes;  // notes beyond the admission note
      int count = 0;
    };
    std::vector<Planted> concepts;
    for (int p = 0; p < n_problems; ++p) {
      PlantedProblem prob;
      auto add_concept = [&](SemanticGroup g, int k) {
        concepts.push_back({surface_of(g, k), id_of(g, k), g, p, {}, 0});
        return concepts.back().id;
      };
      prob.disorder =
          add_concept(SemanticGroup::Disorders, disorders[static_cast<std::size_t>(p)]);
      if (uniform01(rng) < 0.8) {
        prob.drug = add_concept(SemanticGroup::ChemicalsDrugs,
                                drugs[static_cast<std::size_t>(p)]);
      }
      if (uniform01(rng) < 0.5) {
        prob.procedure = add_concept(SemanticGroup::Procedures,
                                     procs[static_cast<std::size_t>(p)]);
      }
      if (uniform01(rng) < 0.7) {
        prob.lab = add_concept(SemanticGroup::LabResults,
                               labs[static_cast<std::size_t>(p)]);
      }
      truth.problems.push_back(std::move(prob));
    }
    // extra mentions in distinct later notes give graded concept counts
    for (auto& c : concepts) {
      const int max_extra = n_notes - 1;
      const int extra = max_extra > 0 ? uniform_int(rng, 0, max_extra) : 0;
      if (extra > 0) {
        for (const int slot : detail::sample_distinct(rng, max_extra, extra)) {
          c.extra_notes.push_back(1 + slot);
        }
        std::sort(c.extra_notes.begin(), c.extra_notes.end());
      }
    }
    // one background concept per group beyond the problems, count exactly 1
    struct Background {
      std::string surface;
      std::string id;
      int note = 0;
    };
    std::vector<Background> background;
    const int n_background = uniform_int(rng, 1, 3);
    const SemanticGroup group_cycle[] = {
        SemanticGroup::Disorders, SemanticGroup::ChemicalsDrugs,
        SemanticGroup::Procedures, SemanticGroup::LabResults};
    for (int b = 0; b < n_background; ++b) {
      const SemanticGroup g = group_cycle[b % 4];
      const auto& pool = g == SemanticGroup::Disorders  ? disorders
                         : g == SemanticGroup::ChemicalsDrugs ? drugs
                         : g == SemanticGroup::Procedures     ? procs
                                                              : labs;
      const int k = pool[static_cast<std::size_t>(n_problems)];
      background.push_back({surface_of(g, k), id_of(g, k),
                            uniform_int(rng, 0, n_notes - 1)});
      truth.background.push_back(id_of(g, k));
    }

    const std::vector<std::string> oneliner =
        detail::filler_sentence(rng, uniform_int(rng, 12, 16));

    // note 0 mentions every problem concept once; chains may repeat disorders
    std::vector<std::vector<std::string>> prev_fillers;
    std::vector<std::vector<std::vector<std::string>>> note_fillers(
        static_cast<std::size_t>(n_notes));
    std::vector<std::vector<std::vector<std::string>>> notes_tokens(
        static_cast<std::size_t>(n_notes));

    for (int j = 0; j < n_notes; ++j) {
      auto& sents = notes_tokens[static_cast<std::size_t>(j)];
      if (j == 0 || cfg.oneliner_copy) sents.push_back(oneliner);

      auto mentions_here = [&](SemanticGroup g) {
        std::vector<const Planted*> out;
        for (const auto& c : concepts) {
          if (c.group != g) continue;
          const bool here =
              j == 0 || std::binary_search(c.extra_notes.begin(),
                                           c.extra_notes.end(), j);
          if (here) out.push_back(&c);
        }
        return out;
      };

      for (const Planted* c : mentions_here(SemanticGroup::Disorders)) {
        sents.push_back(detail::mention_sentence(rng, c->surface));
        ++truth.concept_counts[c->id];
        int repeats = 0;
        while (repeats < 2 && uniform01(rng) < cfg.chain_density) {
          sents.push_back(detail::mention_sentence(rng, c->surface));
          ++truth.concept_counts[c->id];
          ++repeats;
        }
      }
      for (const Planted* c : mentions_here(SemanticGroup::Procedures)) {
        sents.push_back(detail::mention_sentence(rng, c->surface));
        ++truth.concept_counts[c->id];
      }
      for (const auto& b : background) {
        if (b.note == j) {
          sents.push_back(detail::mention_sentence(rng, b.surface));
          ++truth.concept_counts[b.id];
        }
      }

      auto& fillers = note_fillers[static_cast<std::size_t>(j)];
      for (const auto& prev : prev_fillers) {
        if (uniform01(rng) >= cfg.copy_forward_prob) continue;
        auto copy = prev;
        if (uniform01(rng) < cfg.edit_prob) {
          const auto pos = static_cast<std::size_t>(
              uniform_int(rng, 0, static_cast<int>(copy.size()) - 1));
          copy[pos] = detail::pick_source_filler(rng);
        }
        fillers.push_back(std::move(copy));
      }
      const int fresh = uniform_int(rng, cfg.sents_min, cfg.sents_max);
      for (int f = 0; f < fresh; ++f) {
        fillers.push_back(
            detail::filler_sentence(rng, uniform_int(rng, 5, 9)));
      }
      for (const auto& s : fillers) sents.push_back(s);

      for (const Planted* c : mentions_here(SemanticGroup::ChemicalsDrugs)) {
        sents.push_back(detail::mention_sentence(rng, c->surface));
        ++truth.concept_counts[c->id];
      }
      for (const Planted* c : mentions_here(SemanticGroup::LabResults)) {
        sents.push_back(detail::mention_sentence(rng, c->surface));
        ++truth.concept_counts[c->id];
      }
      prev_fillers = fillers;
    }

    for (int j = 0; j < n_notes; ++j) {
      Note note;
      note.note_id = adm.admission_id + "-n" + std::to_string(j);
      note.note_type = j == 0 ? NoteType::Admission
                              : (j == 2 && n_notes >= 4 ? NoteType::Consult
                                                        : NoteType::Progress);
      note.timestamp = j;
      note.text = detail::render(notes_tokens[static_cast<std::size_t>(j)]);
      adm.notes.push_back(std::move(note));
    }

    // summary inclusion coins, driven by the final source counts
    std::map<std::string, bool> included;
    for (const auto& c : concepts) {
      const int count = truth.concept_counts[c.id];
      included[c.id] = uniform01(rng) < inclusion_probability(count);
      if (included[c.id]) truth.summary_concepts.insert(c.id);
    }
    auto surface_by_id = [&](const std::string& id) -> std::string {
      for (const auto& c : concepts) {
        if (c.id == id) return c.surface;
      }
      return {};
    };

    std::vector<std::vector<std::string>> summary_sents;
    int summary_tokens = 0;
    auto push_summary = [&](std::vector<std::string> sent) {
      summary_tokens += static_cast<int>(sent.size());
      summary_sents.push_back(std::move(sent));
    };
    if (cfg.oneliner_copy) {
      truth.copies.push_back(
          {summary_tokens, static_cast<int>(oneliner.size()), 0, 0});
      push_summary(oneliner);
    }
    for (std::size_t p = 0; p < truth.problems.size(); ++p) {
      const auto& prob = truth.problems[p];
      auto slot = [&](const std::string& id) {
        return !id.empty() && included[id] ? surface_by_id(id) : std::string{};
      };
      const std::string d = slot(prob.disorder);
      const std::string pr = slot(prob.procedure);
      const std::string r = slot(prob.drug);
      const std::string l = slot(prob.lab);
      if (!d.empty() || !pr.empty()) {
        const auto& tpl = templates[static_cast<std::size_t>(uniform_int(
            rng, 0, static_cast<int>(templates.size()) - 1))];
        push_summary(detail::render_template(tpl, d, pr));
      }
      if (!r.empty() || !l.empty()) {
        const auto& tpl = templates[static_cast<std::size_t>(uniform_int(
            rng, 0, static_cast<int>(templates.size()) - 1))];
        push_summary(detail::render_template(tpl, r, l));
      }
    }
    for (int slot = 0; slot < 2; ++slot) {
      if (uniform01(rng) < cfg.copy_forward_prob) {
        const int j = uniform_int(rng, 0, n_notes - 1);
        const auto& fillers = note_fillers[static_cast<std::size_t>(j)];
        if (fillers.empty()) continue;
        const auto fi = static_cast<std::size_t>(
            uniform_int(rng, 0, static_cast<int>(fillers.size()) - 1));
        int sent_index = 0;
        const auto& sents = notes_tokens[static_cast<std::size_t>(j)];
        for (std::size_t si = 0; si < sents.size(); ++si) {
          if (sents[si] == fillers[fi]) {
            sent_index = static_cast<int>(si);
            break;
          }
        }
        truth.copies.push_back({summary_tokens,
                                static_cast<int>(fillers[fi].size()), j,
                                sent_index});
        push_summary(fillers[fi]);
      } else {
        std::vector<std::string> novel;
        const int n = uniform_int(rng, 4, 7);
        for (int i = 0; i < n; ++i) {
          novel.push_back(detail::pick_summary_filler(rng));
        }
        push_summary(std::move(novel));
      }
    }
    if (summary_sents.empty()) {
      std::vector<std::string> fallback;
      for (int i = 0; i < 5; ++i) {
        fallback.push_back(detail::pick_summary_filler(rng));
      }
      push_summary(std::move(fallback));
    }
    adm.summary = detail::render(summary_sents);

    result.admissions.push_back(std::move(adm));
    result.truth.admissions.push_back(std::move(truth));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Emission

inline void emit_gazetteer_csv(const GenConfig& cfg,
                               const std::filesystem::path& path) {
  CsvWriter csv(path, {"surface", "concept_id", "group"});
  for (const auto& row : synth_gazetteer_rows(cfg)) {
    csv.row(row.surface, row.concept_id, to_string(row.group));
  }
}

inline nlohmann::json to_json(const AdmissionTruth& t) {
  nlohmann::json problems = nlohmann::json::array();
  for (const auto& p : t.problems) {
    problems.push_back({{"disorder", p.disorder},
                        {"drug", p.drug},
                        {"procedure", p.procedure},
                        {"lab", p.lab}});
  }
  nlohmann::json copies = nlohmann::json::array();
  for (const auto& c : t.copies) {
    copies.push_back({{"summary_token_start", c.summary_token_start},
                      {"length", c.length},
                      {"note_index", c.note_index},
                      {"sent_index", c.sent_index}});
  }
  return {{"admission_id", t.admission_id},
          {"problems", problems},
          {"background", t.background},
          {"concept_counts", t.concept_counts},
          {"summary_concepts",
           std::vector<std::string>(t.summary_concepts.begin(),
                                    t.summary_concepts.end())},
          {"copies", copies}};
}

inline void emit_ground_truth_jsonl(const GroundTruth& truth,
                                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error("cannot open for writing: " + path.string());
  for (const auto& adm : truth.admissions) {
    out << to_json(adm).dump() << '\n';
  }
}

}  // namespace sumkit
