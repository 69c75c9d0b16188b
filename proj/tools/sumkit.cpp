// sumkit command-line front end.
//
// Every pipeline in the library is reachable from here: corpus generation,
// corpus statistics, extractiveness/entity/coherence analyses, the extractive
// baselines and oracles, both trainable models, the final result tables, and
// a `report` command that runs everything end to end and writes a hashed
// manifest of the output tree.  All randomness flows from --seed; --jobs only
// changes wall-clock time, never bytes.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sumkit/coherence.hpp"
#include "sumkit/corpus.hpp"
#include "sumkit/csv.hpp"
#include "sumkit/entities.hpp"
#include "sumkit/error.hpp"
#include "sumkit/extractor.hpp"
#include "sumkit/lexical.hpp"
#include "sumkit/numeric.hpp"
#include "sumkit/oracles.hpp"
#include "sumkit/parallel.hpp"
#include "sumkit/random.hpp"
#include "sumkit/synthgen.hpp"
#include "sumkit/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kUsage = R"(usage: sumkit <command> [flags]

commands:
  generate                    write a synthetic corpus, gazetteer and ground truth
  stats                       corpus statistics and filter report
  analyze extractiveness      fragment coverage/density statistics
  analyze entities            entity analyses (fig4-fig8 CSVs, table4.csv)
  analyze coherence-stats     summary entity-chain statistics
  oracles                     baselines + oracles (method_scores, gain_curve)
  train coherence             train and evaluate the coherence ranker
  train extractor             derive labels, train and rank the sentence scorer
  eval table2|table3|table5   format final tables from earlier artifacts
  report                      run everything end to end and write a manifest

flags:
  --input PATH      corpus JSONL; for `eval`, the artifacts directory
  --out DIR         output directory (default: out)
  --gazetteer PATH  gazetteer CSV (entity, coherence and extractor commands)
  --seed N          master seed (default: 0)
  --jobs N          worker threads (default: 1; output bytes independent of it)
  --config PATH     JSON config file (sections: generate, filter, oracles,
                    coherence, extractor)

environment:
  SUMKIT_INPUT, SUMKIT_OUT, SUMKIT_GAZETTEER, SUMKIT_SEED, SUMKIT_JOBS,
  SUMKIT_CONFIG override the config file and are overridden by flags.

exit codes: 0 ok, 1 usage, 2 bad data, 3 internal error
)";

struct usage_error : std::runtime_error {
  explicit usage_error(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Option resolution: defaults < config file < environment < flags.

struct Options {
  std::vector<std::string> command;  // verb plus optional mode
  std::string input;
  std::string out = "out";
  std::string gazetteer;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string config_path;
  json config = json::object();
};

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  std::uint64_t value = 0;
  try {
    value = std::stoull(text, &used);
  } catch (const std::exception&) {
    throw usage_error(what + " is not a number: " + text);
  }
  if (used != text.size()) {
    throw usage_error(what + " is not a number: " + text);
  }
  return value;
}

int parse_jobs(const std::string& text, const std::string& what) {
  const std::uint64_t v = parse_u64(text, what);
  if (v < 1 || v > 512) throw usage_error(what + " out of range: " + text);
  return static_cast<int>(v);
}

std::optional<std::string> env_value(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

Options parse_options(int argc, char** argv) {
  Options opt;
  std::map<std::string, std::string> flags;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg.rfind("--", 0) == 0) {
      static const std::set<std::string> known = {
          "--input", "--out", "--gazetteer", "--seed", "--jobs", "--config"};
      if (known.count(arg) == 0) throw usage_error("unknown flag: " + arg);
      if (i + 1 >= argc) throw usage_error("flag needs a value: " + arg);
      flags[arg.substr(2)] = argv[++i];
    } else {
      opt.command.push_back(arg);
    }
  }
  if (opt.command.empty()) throw usage_error("no command given");

  // Locate the config file first; its values sit below env and flags.
  if (auto it = flags.find("config"); it != flags.end()) {
    opt.config_path = it->second;
  } else if (auto env = env_value("SUMKIT_CONFIG")) {
    opt.config_path = *env;
  }
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path, std::ios::binary);
    if (!in) throw sumkit::error("cannot open config: " + opt.config_path);
    try {
      opt.config = json::parse(in);
    } catch (const json::exception& e) {
      throw sumkit::error("config " + opt.config_path + ": " + e.what());
    }
    if (!opt.config.is_object()) {
      throw sumkit::error("config must be a JSON object: " + opt.config_path);
    }
    static const std::set<std::string> sections = {
        "input",   "out",       "gazetteer", "seed",
        "jobs",    "generate",  "filter",    "oracles",
        "coherence", "extractor"};
    for (const auto& [key, value] : opt.config.items()) {
      if (sections.count(key) == 0) {
        throw sumkit::error("config: unknown key '" + key + "'");
      }
    }
    if (opt.config.contains("input")) opt.input = opt.config["input"];
    if (opt.config.contains("out")) opt.out = opt.config["out"];
    if (opt.config.contains("gazetteer")) {
      opt.gazetteer = opt.config["gazetteer"];
    }
    if (opt.config.contains("seed")) {
      opt.seed = opt.config["seed"].get<std::uint64_t>();
    }
    if (opt.config.contains("jobs")) opt.jobs = opt.config["jobs"].get<int>();
  }

  if (auto v = env_value("SUMKIT_INPUT")) opt.input = *v;
  if (auto v = env_value("SUMKIT_OUT")) opt.out = *v;
  if (auto v = env_value("SUMKIT_GAZETTEER")) opt.gazetteer = *v;
  if (auto v = env_value("SUMKIT_SEED")) opt.seed = parse_u64(*v, "SUMKIT_SEED");
  if (auto v = env_value("SUMKIT_JOBS")) opt.jobs = parse_jobs(*v, "SUMKIT_JOBS");

  if (auto it = flags.find("input"); it != flags.end()) opt.input = it->second;
  if (auto it = flags.find("out"); it != flags.end()) opt.out = it->second;
  if (auto it = flags.find("gazetteer"); it != flags.end()) {
    opt.gazetteer = it->second;
  }
  if (auto it = flags.find("seed"); it != flags.end()) {
    opt.seed = parse_u64(it->second, "--seed");
  }
  if (auto it = flags.find("jobs"); it != flags.end()) {
    opt.jobs = parse_jobs(it->second, "--jobs");
  }
  return opt;
}

// ---------------------------------------------------------------------------
// Config sections.  Every key must be recognized; silent typos cost hours.

class SectionReader {
 public:
  SectionReader(const json& config, const std::string& name) : name_(name) {
    if (config.contains(name)) {
      const json& s = config[name];
      if (!s.is_object()) {
        throw sumkit::error("config section '" + name + "' must be an object");
      }
      section_ = s;
      for (const auto& [key, value] : s.items()) pending_.insert(key);
    }
  }

  int geti(const char* key, int def) {
    return get_number<int>(key, def, "an integer");
  }
  double getd(const char* key, double def) {
    return get_number<double>(key, def, "a number");
  }
  bool getb(const char* key, bool def) {
    if (!section_.contains(key)) return def;
    pending_.erase(key);
    if (!section_[key].is_boolean()) {
      throw sumkit::error("config " + name_ + "." + key + ": expected a bool");
    }
    return section_[key].get<bool>();
  }

  void finish() const {
    if (!pending_.empty()) {
      throw sumkit::error("config section '" + name_ + "': unknown key '" +
                          *pending_.begin() + "'");
    }
  }

 private:
  template <typename T>
  T get_number(const char* key, T def, const char* kind) {
    if (!section_.contains(key)) return def;
    pending_.erase(key);
    if (!section_[key].is_number()) {
      throw sumkit::error("config " + name_ + "." + key + ": expected " + kind);
    }
    return section_[key].get<T>();
  }

  std::string name_;
  json section_ = json::object();
  std::set<std::string> pending_;
};

sumkit::GenConfig make_gen_config(const json& config, std::uint64_t seed) {
  SectionReader s(config, "generate");
  sumkit::GenConfig g;
  g.n_admissions = s.geti("n_admissions", g.n_admissions);
  g.notes_min = s.geti("notes_min", g.notes_min);
  g.notes_max = s.geti("notes_max", g.notes_max);
  g.sents_min = s.geti("sents_min", g.sents_min);
  g.sents_max = s.geti("sents_max", g.sents_max);
  g.copy_forward_prob = s.getd("copy_forward_prob", g.copy_forward_prob);
  g.edit_prob = s.getd("edit_prob", g.edit_prob);
  g.problems_min = s.geti("problems_min", g.problems_min);
  g.problems_max = s.geti("problems_max", g.problems_max);
  g.gazetteer_per_group = s.geti("gazetteer_per_group", g.gazetteer_per_group);
  g.template_pool_size = s.geti("template_pool_size", g.template_pool_size);
  g.oneliner_copy = s.getb("oneliner_copy", g.oneliner_copy);
  g.chain_density = s.getd("chain_density", g.chain_density);
  s.finish();
  g.seed = seed;
  return g;
}

sumkit::FilterConfig make_filter_config(const json& config) {
  SectionReader s(config, "filter");
  sumkit::FilterConfig f;
  f.min_note_chars = s.geti("min_note_chars", f.min_note_chars);
  f.max_source_tokens = s.geti("max_source_tokens", f.max_source_tokens);
  f.min_summary_chars = s.geti("min_summary_chars", f.min_summary_chars);
  f.max_summary_tokens = s.geti("max_summary_tokens", f.max_summary_tokens);
  s.finish();
  return f;
}

struct OracleOptions {
  int target_words = 0;
  int target_tokens = 0;
};

OracleOptions make_oracle_options(const json& config) {
  SectionReader s(config, "oracles");
  OracleOptions o;
  o.target_words = s.geti("target_words", 0);
  o.target_tokens = s.geti("target_tokens", 0);
  s.finish();
  return o;
}

struct CoherenceOptions {
  sumkit::CoherenceConfig cfg;
  int epochs = 20;
  int pairs_per_doc = 5;
  int perms_per_doc = 20;
};

CoherenceOptions make_coherence_options(const json& config) {
  SectionReader s(config, "coherence");
  CoherenceOptions o;
  o.cfg.embed_dim = s.geti("embed_dim", o.cfg.embed_dim);
  o.cfg.filters = s.geti("filters", o.cfg.filters);
  o.cfg.width = s.geti("width", o.cfg.width);
  o.cfg.margin = s.getd("margin", o.cfg.margin);
  o.cfg.lr = s.getd("lr", o.cfg.lr);
  o.epochs = s.geti("epochs", o.epochs);
  o.pairs_per_doc = s.geti("pairs_per_doc", o.pairs_per_doc);
  o.perms_per_doc = s.geti("perms_per_doc", o.perms_per_doc);
  s.finish();
  return o;
}

struct ExtractorOptions {
  sumkit::LabelConfig label;
  sumkit::ScorerConfig scorer;
  int epochs = 150;
  int max_sents = sumkit::kDefaultMaxSents;
};

ExtractorOptions make_extractor_options(const json& config) {
  SectionReader s(config, "extractor");
  ExtractorOptions o;
  o.label.min_best_gain = s.getd("min_best_gain", o.label.min_best_gain);
  o.label.min_differential =
      s.getd("min_differential", o.label.min_differential);
  o.label.min_tokens = s.geti("min_tokens", o.label.min_tokens);
  o.label.temperature = s.getd("temperature", o.label.temperature);
  o.label.divide_temperature =
      s.getb("divide_temperature", o.label.divide_temperature);
  o.label.drop_ramp_start = s.getd("drop_ramp_start", o.label.drop_ramp_start);
  o.label.drop_ramp_len = s.getd("drop_ramp_len", o.label.drop_ramp_len);
  o.label.drop_cap = s.getd("drop_cap", o.label.drop_cap);
  o.scorer.hidden1 = s.geti("hidden1", o.scorer.hidden1);
  o.scorer.hidden2 = s.geti("hidden2", o.scorer.hidden2);
  o.scorer.lr = s.getd("lr", o.scorer.lr);
  o.epochs = s.geti("epochs", o.epochs);
  o.max_sents = s.geti("max_sents", o.max_sents);
  s.finish();
  return o;
}

// ---------------------------------------------------------------------------
// Hashing and small IO helpers.

std::string sha256_hex(const void* data, std::size_t len) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int digest_len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data, len) != 1 ||
      EVP_DigestFinal_ex(ctx, digest.data(), &digest_len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(static_cast<std::size_t>(digest_len) * 2);
  for (unsigned int i = 0; i < digest_len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_string(const std::string& s) {
  return sha256_hex(s.data(), s.size());
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sumkit::error("cannot open for hashing: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();
  return sha256_hex(content.data(), content.size());
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sumkit::error("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw sumkit::error("write failed: " + path.string());
}

json read_json_file(const fs::path& path, const char* producer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw sumkit::error("missing artifact: " + path.string() + " (run `" +
                        producer + "` first)");
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw sumkit::error(path.string() + ": " + e.what());
  }
}

std::vector<std::vector<std::string>> read_csv_file(const fs::path& path,
                                                    const char* producer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw sumkit::error("missing artifact: " + path.string() + " (run `" +
                        producer + "` first)");
  }
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(sumkit::csv_split(line));
  }
  if (rows.empty()) throw sumkit::error("empty artifact: " + path.string());
  return rows;
}

fs::path ensure_out_dir(const Options& opt) {
  const fs::path dir(opt.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw sumkit::error("cannot create output directory " + dir.string() +
                        ": " + ec.message());
  }
  return dir;
}

void print_done(const std::string& command, const json& extra) {
  json line = extra;
  line["command"] = command;
  std::cout << line.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Corpus loading shared by every analysis command.

struct LoadedCorpus {
  std::vector<sumkit::Admission> admissions;  // after filtering
  sumkit::FilterReport filter;
  std::vector<sumkit::AdmissionView> views;  // aligned with admissions
};

LoadedCorpus load_corpus(const Options& opt) {
  if (opt.input.empty()) {
    throw usage_error("this command needs --input (a corpus JSONL file)");
  }
  LoadedCorpus corpus;
  auto raw = sumkit::ingest(opt.input);
  auto [kept, report] =
      sumkit::filter_admissions(raw, make_filter_config(opt.config));
  corpus.admissions = std::move(kept);
  corpus.filter = report;
  if (corpus.admissions.empty()) {
    throw sumkit::error("no admissions survive filtering: " + opt.input);
  }
  corpus.views.reserve(corpus.admissions.size());
  for (const auto& adm : corpus.admissions) {
    corpus.views.push_back(sumkit::make_view(adm));
  }
  return corpus;
}

sumkit::Gazetteer load_gazetteer(const Options& opt) {
  if (opt.gazetteer.empty()) {
    throw usage_error("this command needs --gazetteer (a gazetteer CSV file)");
  }
  return sumkit::Gazetteer::load_file(opt.gazetteer);
}

// Views with a usable summary and at least one source sentence; pathological
// admissions (e.g. punctuation-only text that tokenizes to nothing) are
// counted rather than fatal.
std::vector<std::size_t> usable_view_indices(
    std::span<const sumkit::AdmissionView> views) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (!views[i].summary_tokens.empty() && !views[i].source.empty()) {
      idx.push_back(i);
    }
  }
  return idx;
}

// ---------------------------------------------------------------------------
// Shared emitters.

void emit_frag_rank(const fs::path& path,
                    const sumkit::ExtractivenessAggregate& agg) {
  sumkit::CsvWriter csv(path, {"bin", "mean_length", "n"});
  for (int b = 0; b < sumkit::kFragmentRankBins; ++b) {
    csv.row(b + 1, agg.mean_length_by_rank[static_cast<std::size_t>(b)],
            agg.count_by_rank[static_cast<std::size_t>(b)]);
  }
}

sumkit::ExtractivenessAggregate compute_extractiveness(
    const LoadedCorpus& corpus, int jobs, std::int64_t* n_skipped) {
  const auto idx = usable_view_indices(corpus.views);
  std::vector<sumkit::ExtractivenessStats> stats(idx.size());
  sumkit::parallel_for(idx.size(), jobs, [&](std::size_t i) {
    stats[i] = sumkit::extractiveness(corpus.views[idx[i]]);
  });
  if (n_skipped != nullptr) {
    *n_skipped = static_cast<std::int64_t>(corpus.views.size() - idx.size());
  }
  return sumkit::aggregate_extractiveness(stats);
}

json mean_std_json(const sumkit::MeanStd& m) {
  return {{"mean", m.mean}, {"std", m.std_dev}, {"n", m.n}};
}

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const Options& opt) {
  const fs::path out = ensure_out_dir(opt);
  const sumkit::GenConfig cfg = make_gen_config(opt.config, opt.seed);
  sumkit::validate(cfg);
  const sumkit::GenResult gen = sumkit::generate(cfg);
  sumkit::serialize(gen.admissions, out / "corpus.jsonl");
  sumkit::emit_gazetteer_csv(cfg, out / "gazetteer.csv");
  sumkit::emit_ground_truth_jsonl(gen.truth, out / "ground_truth.jsonl");
  print_done("generate",
             {{"admissions", gen.admissions.size()}, {"out", opt.out}});
  return 0;
}

// ---------------------------------------------------------------------------
// stats

int cmd_stats(const Options& opt) {
  const fs::path out = ensure_out_dir(opt);
  const LoadedCorpus corpus = load_corpus(opt);
  const sumkit::CorpusStats stats = sumkit::corpus_stats(corpus.admissions);
  write_json_file(out / "stats.json", {{"corpus", stats.to_json()},
                                       {"filter", corpus.filter.to_json()}});
  print_done("stats", {{"admissions", stats.n_admissions}, {"out", opt.out}});
  return 0;
}

// ---------------------------------------------------------------------------
// analyze extractiveness

int cmd_analyze_extractiveness(const Options& opt) {
  const fs::path out = ensure_out_dir(opt);
  const LoadedCorpus corpus = load_corpus(opt);
  std::int64_t skipped = 0;
  const auto agg = compute_extractiveness(corpus, opt.jobs, &skipped);
  emit_frag_rank(out / "frag_rank.csv", agg);
  {
    sumkit::CsvWriter csv(out / "frag_len_hist.csv", {"length", "count"});
    for (const auto& [length, count] : agg.length_histogram) {
      csv.row(length, count);
    }
  }
  write_json_file(out / "extractiveness.json",
                  {{"coverage", mean_std_json(agg.coverage)},
                   {"density", mean_std_json(agg.density)},
                   {"unigram_fragment_share", agg.unigram_fragment_share},
                   {"n_fragments", agg.n_fragments},
                   {"n_admissions_skipped", skipped}});
  print_done("analyze extractiveness",
             {{"n_fragments", agg.n_fragments}, {"out", opt.out}});
  return 0;
}

// ---------------------------------------------------------------------------
// analyze entities

void emit_transition_csv(const fs::path& path,
                         const sumkit::TransitionMatrix& m) {
  sumkit::CsvWriter csv(path, {"from_group", "to_group", "count", "prob"});
  for (std::size_t i = 0; i < m.groups.size(); ++i) {
    for (std::size_t j = 0; j < m.groups.size(); ++j) {
      csv.row(m.groups[i], m.groups[j], m.counts[i][j], m.probs[i][j]);
    }
  }
}

int cmd_analyze_entities(const Options& opt) {
  const fs::path out = ensure_out_dir(opt);
  const LoadedCorpus corpus = load_corpus(opt);
  const sumkit::Gazetteer gaz = load_gazetteer(opt);
  const auto mentions = sumkit::link_corpus(corpus.views, gaz, opt.jobs);

  {
    sumkit::CsvWriter csv(out / "fig4.csv",
                          {"mention_count", "n_concepts", "p_in_summary"});
    for (const auto& bin : sumkit::inclusion_curve(mentions)) {
      csv.row(bin.mention_count, bin.n_concepts, bin.p_in_summary);
    }
  }

  constexpr sumkit::NoteOrder kOrders[] = {sumkit::NoteOrder::Forward,
                                           sumkit::NoteOrder::Backward,
                                           sumkit::NoteOrder::GreedyOracle};
  {
    sumkit::CsvWriter fig5(out / "fig5.csv",
                           {"order", "decile", "mean_cumulative"});
    sumkit::CsvWriter table4(out / "table4.csv",
                             {"order", "mean_notes_to_read",
                              "mean_percent_to_read", "n_used", "n_skipped"});
    for (const auto order : kOrders) {
      const auto agg =
          sumkit::aggregate_macro_ordering(corpus.views, mentions, order);
      for (int d = 0; d < sumkit::kOrderingDeciles; ++d) {
        fig5.row(sumkit::to_string(order), d + 1,
                 agg.mean_cumulative[static_cast<std::size_t>(d)]);
      }
      table4.row(sumkit::to_string(order), agg.mean_notes_to_read,
                 agg.mean_percent_to_read, agg.n_used, agg.n_skipped);
    }
  }

  {
    sumkit::CsvWriter csv(out / "fig6.csv", {"bin", "share"});
    const auto hist = sumkit::micro_histogram(mentions);
    for (std::size_t b = 0; b < hist.size(); ++b) {
      csv.row(b + 1, hist[b]);
    }
  }

  {
    sumkit::CsvWriter csv(out / "fig7.csv", {"group", "bin", "share"});
    const auto pos = sumkit::positional_groups(mentions);
    for (int g = 0; g < sumkit::kNumGroups; ++g) {
      for (int b = 0; b < pos.bins; ++b) {
        csv.row(sumkit::to_string(static_cast<sumkit::SemanticGroup>(g)), b + 1,
                pos.distribution[static_cast<std::size_t>(g)]
                                [static_cast<std::size_t>(b)]);
      }
    }
  }

  const auto [src_trans, sum_trans] =
      sumkit::corpus_transitions(corpus.views, mentions);
  emit_transition_csv(out / "fig8_source.csv", src_trans);
  emit_transition_csv(out / "fig8_summary.csv", sum_trans);

  const auto density = sumkit::density_stats(corpus.views, mentions);
  const auto shares = sumkit::global_proportions(mentions);
  json shares_json = json::object();
  for (int g = 0; g < sumkit::kNumGroups; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    shares_json[sumkit::to_string(static_cast<sumkit::SemanticGroup>(g))] = {
        {"source_count", shares.source_counts[gi]},
        {"summary_count", shares.summary_counts[gi]},
        {"source_share", shares.source_share[gi]},
        {"summary_share", shares.summary_share[gi]}};
  }
  write_json_file(
      out / "entity_stats.json",
      {{"summary_entity_token_frac", density.summary_entity_token_frac},
       {"source_entity_token_frac", density.source_entity_token_frac},
       {"mean_unique_summary", density.mean_unique_summary},
       {"mean_unique_source", density.mean_unique_source},
       {"entity_compression", density.entity_compression},
       {"n_admissions", density.n_admissions},
       {"n_with_summary_concepts", density.n_with_summary_concepts},
       {"group_shares", shares_json},
       {"source_diagonal_share", src_trans.diagonal_share()},
       {"summary_diagonal_share", sum_trans.diagonal_share()}});
  print_done("analyze entities",
             {{"admissions", corpus.views.size()}, {"out", opt.out}});
  return 0;
}

// ---------------------------------------------------------------------------
// analyze coherence-stats

int cmd_analyze_coherence_stats(const Options& opt) {
  const fs::path out = ensure_out_dir(opt);
  const LoadedCorpus corpus = load_corpus(opt);
  const sumkit::Gazetteer gaz = load_gazetteer(opt);
  const auto mentions = sumkit::link_corpus(corpus.views, gaz, opt.jobs);
  const auto stats = sumkit::chain_stats(mentions);
  write_json_file(out / "coherence_stats.json",
                  {{"singleton_fraction", stats.singleton_fraction},
                   {"adjacent_fraction", stats.adjacent_fraction},
                   {"adjacent_defined", stats.adjacent_defined},
                   {"n_concepts", stats.n_concepts},
                   {"n_multi", stats.n_multi}});
  print_done("analyze coherence-stats",
             {{"n_concepts", stats.n_concepts}, {"out", opt.out}});
  return 0;
}

// ---------------------------------------------------------------------------
// oracles

int cmd_oracles(const Options& opt) {
  const fs::path out = ensure_out_dir(opt);
  const LoadedCorpus corpus = load_corpus(opt);
  const OracleOptions oracle_opt = make_oracle_options(opt.config);

  const auto usable = usable_view_indices(corpus.views);
  if (usable.empty()) throw sumkit::error("no usable admissions for oracles");
  std::vector<sumkit::AdmissionView> scope;
  for (const std::size_t i : usable) {
    if (corpus.views[i].split == sumkit::Split::Test) {
      scope.push_back(corpus.views[i]);
    }
  }
  const bool test_only = !scope.empty();
  if (!test_only) {
    for (const std::size_t i : usable) scope.push_back(corpus.views[i]);
  }

  const auto index = sumkit::Bm25Index::build(corpus.admissions);
  sumkit::EvalConfig eval_cfg;
  eval_cfg.target_words = oracle_opt.target_words;
  eval_cfg.target_tokens = oracle_opt.target_tokens;
  eval_cfg.seed = sumkit::derive_seed(opt.seed, 0xA0);
  eval_cfg.jobs = opt.jobs;
  const auto rows = sumkit::evaluate_methods(scope, &index, eval_cfg);
  {
    sumkit::CsvWriter csv(out / "method_scores.csv",
                          {"method", "r1_r", "r1_p", "r1_f", "r2_r", "r2_p",
                           "r2_f", "mean_r12", "n"});
    for (const auto& row : rows) {
      csv.row(sumkit::to_string(row.method), row.r1.recall, row.r1.precision,
              row.r1.f1, row.r2.recall, row.r2.precision, row.r2.f1,
              row.mean_r12, row.n);
    }
  }

  std::vector<sumkit::GainResult> gains(scope.size());
  sumkit::parallel_for(scope.size(), opt.jobs, [&](std::size_t i) {
    gains[i] = sumkit::oracle_gain(scope[i]);
  });
  {
    sumkit::CsvWriter csv(out / "gain_curve.csv",
                          {"step", "best", "mean", "min", "cumulative"});
    for (const auto& pt : sumkit::aggregate_gain_curves(gains)) {
      csv.row(pt.step, pt.best, pt.mean, pt.min, pt.cumulative);
    }
  }

  std::int64_t skipped = 0;
  emit_frag_rank(out / "frag_rank.csv",
                 compute_extractiveness(corpus, opt.jobs, &skipped));

  const auto corr = sumkit::centrality_salience_corr(scope, opt.jobs);
  json oracles_json;
  oracles_json["scope"] = test_only ? "test" : "all";
  oracles_json["n_admissions"] = scope.size();
  oracles_json["n_admissions_skipped"] =
      static_cast<std::int64_t>(corpus.views.size()) -
      static_cast<std::int64_t>(usable.size());
  oracles_json["centrality_salience"] = {
      {"r", corr.r}, {"p_value", corr.p_value}, {"n", corr.n}};
  write_json_file(out / "oracles.json", oracles_json);
  print_done("oracles", {{"admissions", scope.size()}, {"out", opt.out}});
  return 0;
}

// ---------------------------------------------------------------------------
// train coherence

int cmd_train_coherence(const Options& opt) {
  const fs::path out = ensure_out_dir(opt);
  const LoadedCorpus corpus = load_corpus(opt);
  const sumkit::Gazetteer gaz = load_gazetteer(opt);
  const CoherenceOptions copt = make_coherence_options(opt.config);
  const auto mentions = sumkit::link_corpus(corpus.views, gaz, opt.jobs);

  std::vector<sumkit::EntityGrid> train_grids, eval_grids;
  std::vector<std::string> eval_ids;
  std::int64_t skipped = 0;
  for (std::size_t i = 0; i < corpus.views.size(); ++i) {
    const auto& view = corpus.views[i];
    if (view.summary.size() < 2 || mentions[i].summary.empty()) {
      ++skipped;
      continue;
    }
    auto grid = sumkit::build_grid(view.summary, mentions[i].summary);
    if (view.split == sumkit::Split::Train) {
      train_grids.push_back(std::move(grid));
    } else {
      eval_grids.push_back(std::move(grid));
      eval_ids.push_back(view.admission_id);
    }
  }
  if (train_grids.empty()) {
    throw sumkit::error("no trainable summaries (need >= 2 sentences and a "
                        "linked concept)");
  }
  if (eval_grids.empty()) {
    throw sumkit::error("no valid/test summaries to evaluate on");
  }

  std::set<std::string> vocab_set;
  for (const auto& g : train_grids) {
    vocab_set.insert(g.entities.begin(), g.entities.end());
  }
  const std::vector<std::string> vocab(vocab_set.begin(), vocab_set.end());

  auto model = sumkit::init_coherence_model(
      vocab, copt.cfg, sumkit::derive_seed(opt.seed, 0xC0));
  const auto untrained = model;
  const auto pair_set = sumkit::make_ranking_pairs(
      train_grids, copt.pairs_per_doc, sumkit::derive_seed(opt.seed, 0xC1));
  if (pair_set.pairs.empty()) {
    throw sumkit::error("no ranking pairs could be sampled from the corpus");
  }
  const auto trace = sumkit::train_coherence(
      model, pair_set.pairs, copt.epochs, sumkit::derive_seed(opt.seed, 0xC2));

  struct GridEval {
    double trained_acc = 0.0;
    std::int64_t trained_wins = 0;
    std::int64_t untrained_wins = 0;
    std::int64_t comparisons = 0;
  };
  std::vector<GridEval> per_grid(eval_grids.size());
  sumkit::parallel_for(eval_grids.size(), opt.jobs, [&](std::size_t i) {
    const std::span<const sumkit::EntityGrid> one(&eval_grids[i], 1);
    const std::uint64_t grid_seed =
        sumkit::derive_seed(opt.seed, 0xC300 + static_cast<std::uint64_t>(i));
    const auto acc =
        sumkit::pairwise_accuracy(model, one, copt.perms_per_doc, grid_seed, 1);
    const auto base = sumkit::pairwise_accuracy(untrained, one,
                                                copt.perms_per_doc, grid_seed, 1);
    per_grid[i] = {acc.accuracy, acc.wins, base.wins, acc.comparisons};
  });

  std::int64_t wins = 0, base_wins = 0, comparisons = 0;
  {
    sumkit::CsvWriter csv(out / "coherence_eval.csv",
                          {"summary_id", "accuracy"});
    for (std::size_t i = 0; i < per_grid.size(); ++i) {
      csv.row(eval_ids[i], per_grid[i].trained_acc);
      wins += per_grid[i].trained_wins;
      base_wins += per_grid[i].untrained_wins;
      comparisons += per_grid[i].comparisons;
    }
  }
  const double accuracy =
      comparisons > 0 ? static_cast<double>(wins) / comparisons : 0.0;
  const double base_accuracy =
      comparisons > 0 ? static_cast<double>(base_wins) / comparisons : 0.0;

  {
    std::ofstream model_out(out / "coherence_model.json", std::ios::binary);
    if (!model_out) throw sumkit::error("cannot write coherence_model.json");
    model_out << sumkit::model_to_json(model).dump() << '\n';
  }
  write_json_file(out / "coherence_train.json",
                  {{"epochs", copt.epochs},
                   {"pairs_per_doc", copt.pairs_per_doc},
                   {"perms_per_doc", copt.perms_per_doc},
                   {"n_train_grids", train_grids.size()},
                   {"n_eval_grids", eval_grids.size()},
                   {"n_skipped", skipped},
                   {"n_pairs", pair_set.pairs.size()},
                   {"n_pair_docs_skipped", pair_set.n_docs_skipped},
                   {"loss_trace", trace},
                   {"eval", {{"accuracy", accuracy},
                             {"wins", wins},
                             {"comparisons", comparisons},
                             {"untrained_accuracy", base_accuracy}}}});
  print_done("train coherence",
             {{"accuracy", accuracy}, {"out", opt.out}});
  return 0;
}

// ---------------------------------------------------------------------------
// train extractor

json step_to_json(const sumkit::ExtractionStep& step) {
  return {{"step_index", step.step_index},
          {"candidate_ids", step.candidate_ids},
          {"gains", step.gains},
          {"chosen_id", step.chosen_id},
          {"soft_targets", step.soft_targets},
          {"prefix_ids", step.prefix_ids},
          {"best_gain", step.best_gain},
          {"min_gain", step.min_gain},
          {"cumulative_r12", step.cumulative_r12}};
}

int cmd_train_extractor(const Options& opt) {
  const fs::path out = ensure_out_dir(opt);
  const LoadedCorpus corpus = load_corpus(opt);
  const sumkit::Gazetteer gaz = load_gazetteer(opt);
  const ExtractorOptions xopt = make_extractor_options(opt.config);
  const auto mentions = sumkit::link_corpus(corpus.views, gaz, opt.jobs);

  const auto usable = usable_view_indices(corpus.views);
  std::vector<std::size_t> train_idx, eval_idx;
  for (const std::size_t i : usable) {
    if (corpus.views[i].split == sumkit::Split::Train) {
      train_idx.push_back(i);
    } else {
      eval_idx.push_back(i);
    }
  }
  if (train_idx.empty()) throw sumkit::error("no train-split admissions");
  if (eval_idx.empty()) throw sumkit::error("no valid/test admissions");

  auto derive_for = [&](std::span<const std::size_t> idx) {
    std::vector<sumkit::LabelResult> labels(idx.size());
    sumkit::parallel_for(idx.size(), opt.jobs, [&](std::size_t k) {
      labels[k] = sumkit::derive_labels(
          corpus.views[idx[k]], xopt.label,
          sumkit::derive_seed(opt.seed,
                              0xE000 + static_cast<std::uint64_t>(idx[k])));
    });
    return labels;
  };
  const auto train_labels = derive_for(train_idx);
  const auto eval_labels = derive_for(eval_idx);

  {
    std::ofstream labels_out(out / "labels.jsonl", std::ios::binary);
    if (!labels_out) throw sumkit::error("cannot write labels.jsonl");
    for (std::size_t k = 0; k < train_idx.size(); ++k) {
      json steps = json::array();
      for (const auto& step : train_labels[k].steps) {
        steps.push_back(step_to_json(step));
      }
      labels_out << json{{"admission_id",
                          corpus.views[train_idx[k]].admission_id},
                         {"empty_pool", train_labels[k].empty_pool},
                         {"pool_ids", train_labels[k].pool_ids},
                         {"steps", steps}}
                        .dump()
                 << '\n';
    }
  }

  std::vector<sumkit::AdmissionView> train_views;
  std::vector<sumkit::AdmissionMentions> train_mentions;
  for (const std::size_t i : train_idx) {
    train_views.push_back(corpus.views[i]);
    train_mentions.push_back(mentions[i]);
  }
  const auto scaler = sumkit::fit_feature_scaler(train_views, train_mentions);

  auto prepare_for = [&](std::span<const std::size_t> idx,
                         std::span<const sumkit::LabelResult> labels) {
    std::vector<sumkit::PreparedAdmission> prepared(idx.size());
    sumkit::parallel_for(idx.size(), opt.jobs, [&](std::size_t k) {
      prepared[k] = sumkit::prepare_admission(corpus.views[idx[k]],
                                              mentions[idx[k]], scaler,
                                              labels[k]);
    });
    return prepared;
  };
  const auto prepared_train = prepare_for(train_idx, train_labels);
  const auto prepared_eval = prepare_for(eval_idx, eval_labels);

  auto model = sumkit::init_scorer(xopt.scorer,
                                   sumkit::derive_seed(opt.seed, 0xE1));
  const auto trace = sumkit::train_scorer(model, prepared_train, xopt.epochs,
                                          sumkit::derive_seed(opt.seed, 0xE2));

  const auto buckets = sumkit::rank_deviation(model, prepared_eval);
  {
    sumkit::CsvWriter csv(out / "rank_deviation.csv",
                          {"step", "mean_rank", "median_rank", "n"});
    for (const auto& b : buckets) {
      csv.row(b.label, b.mean_rank, b.median_rank, b.n);
    }
  }

  {
    std::ofstream model_out(out / "scorer_model.json", std::ios::binary);
    if (!model_out) throw sumkit::error("cannot write scorer_model.json");
    model_out << sumkit::scorer_to_json(model).dump() << '\n';
  }
  write_json_file(out / "extractor_train.json",
                  {{"epochs", xopt.epochs},
                   {"n_train", train_idx.size()},
                   {"n_eval", eval_idx.size()},
                   {"scaler", {{"len_scale", scaler.len_scale},
                               {"ent_scale", scaler.ent_scale}}},
                   {"loss_trace", trace}});
  print_done("train extractor",
             {{"final_loss", trace.empty() ? 0.0 : trace.back()},
              {"out", opt.out}});
  return 0;
}

// ---------------------------------------------------------------------------
// eval: format the final tables from earlier artifacts.

int cmd_eval_table2(const Options& opt) {
  if (opt.input.empty()) {
    throw usage_error("eval needs --input (the artifacts directory)");
  }
  const fs::path out = ensure_out_dir(opt);
  const auto rows =
      read_csv_file(fs::path(opt.input) / "method_scores.csv", "oracles");
  sumkit::CsvWriter csv(out / "table2.csv", {"method", "r1_r", "r1_p", "r1_f",
                                             "r2_r", "r2_p", "r2_f"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 7) {
      throw sumkit::error("method_scores.csv: malformed row " +
                          std::to_string(i));
    }
    csv.row(rows[i][0], rows[i][1], rows[i][2], rows[i][3], rows[i][4],
            rows[i][5], rows[i][6]);
  }
  print_done("eval table2", {{"out", opt.out}});
  return 0;
}

int cmd_eval_table3(const Options& opt) {
  if (opt.input.empty()) {
    throw usage_error("eval needs --input (the artifacts directory)");
  }
  const fs::path out = ensure_out_dir(opt);
  const auto rows = read_csv_file(fs::path(opt.input) / "rank_deviation.csv",
                                  "train extractor");
  sumkit::CsvWriter csv(out / "table3.csv",
                        {"step", "mean_rank", "median_rank"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 3) {
      throw sumkit::error("rank_deviation.csv: malformed row " +
                          std::to_string(i));
    }
    csv.row(rows[i][0], rows[i][1], rows[i][2]);
  }
  print_done("eval table3", {{"out", opt.out}});
  return 0;
}

int cmd_eval_table5(const Options& opt) {
  if (opt.input.empty()) {
    throw usage_error("eval needs --input (the artifacts directory)");
  }
  const fs::path out = ensure_out_dir(opt);
  const json train = read_json_file(
      fs::path(opt.input) / "coherence_train.json", "train coherence");
  if (!train.contains("eval")) {
    throw sumkit::error("coherence_train.json: missing eval section");
  }
  const json& eval = train["eval"];
  sumkit::CsvWriter csv(out / "table5.csv",
                        {"model", "pairwise_accuracy", "comparisons"});
  csv.row("untrained_init", eval["untrained_accuracy"].get<double>(),
          eval["comparisons"].get<std::int64_t>());
  csv.row("entity_grid_conv", eval["accuracy"].get<double>(),
          eval["comparisons"].get<std::int64_t>());
  print_done("eval table5", {{"out", opt.out}});
  return 0;
}

// ---------------------------------------------------------------------------
// report: the whole pipeline plus a hashed manifest.

int cmd_report(const Options& opt) {
  const fs::path out = ensure_out_dir(opt);

  Options stage = opt;
  if (stage.input.empty()) {
    cmd_generate(stage);
    stage.input = (out / "corpus.jsonl").string();
    stage.gazetteer = (out / "gazetteer.csv").string();
  } else if (stage.gazetteer.empty()) {
    throw usage_error("report with --input also needs --gazetteer");
  }

  cmd_stats(stage);
  cmd_analyze_extractiveness(stage);
  cmd_analyze_entities(stage);
  cmd_analyze_coherence_stats(stage);
  cmd_oracles(stage);
  cmd_train_coherence(stage);
  cmd_train_extractor(stage);

  Options eval_stage = stage;
  eval_stage.input = out.string();
  cmd_eval_table2(eval_stage);
  cmd_eval_table3(eval_stage);
  cmd_eval_table5(eval_stage);

  // Hash of the effective settings (paths and parallelism excluded so that
  // equivalent runs in different directories hash identically).
  const std::string config_hash =
      sha256_string(json{{"seed", opt.seed}, {"modules", opt.config}}.dump());

  std::vector<std::string> names;
  for (const auto& entry : fs::recursive_directory_iterator(out)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel =
        fs::relative(entry.path(), out).generic_string();
    if (rel == "manifest.json") continue;
    names.push_back(rel);
  }
  std::sort(names.begin(), names.end());
  json files = json::object();
  for (const auto& name : names) {
    files[name] = sha256_file(out / name);
  }
  write_json_file(out / "manifest.json",
                  {{"toolkit_version", sumkit::version_string},
                   {"config_hash", config_hash},
                   {"seed", opt.seed},
                   {"files", files}});
  print_done("report", {{"files", names.size()}, {"out", opt.out}});
  return 0;
}

// ---------------------------------------------------------------------------
// Dispatch

int dispatch(const Options& opt) {
  const auto& cmd = opt.command;
  auto mode = [&](const char* what) -> const std::string& {
    if (cmd.size() != 2) {
      throw usage_error(std::string(cmd[0]) + " needs a mode: " + what);
    }
    return cmd[1];
  };
  if (cmd[0] == "generate" && cmd.size() == 1) return cmd_generate(opt);
  if (cmd[0] == "stats" && cmd.size() == 1) return cmd_stats(opt);
  if (cmd[0] == "analyze") {
    const std::string& m = mode("extractiveness|entities|coherence-stats");
    if (m == "extractiveness") return cmd_analyze_extractiveness(opt);
    if (m == "entities") return cmd_analyze_entities(opt);
    if (m == "coherence-stats") return cmd_analyze_coherence_stats(opt);
    throw usage_error("unknown analyze mode: " + m);
  }
  if (cmd[0] == "oracles" && cmd.size() == 1) return cmd_oracles(opt);
  if (cmd[0] == "train") {
    const std::string& m = mode("coherence|extractor");
    if (m == "coherence") return cmd_train_coherence(opt);
    if (m == "extractor") return cmd_train_extractor(opt);
    throw usage_error("unknown train mode: " + m);
  }
  if (cmd[0] == "eval") {
    const std::string& m = mode("table2|table3|table5");
    if (m == "table2") return cmd_eval_table2(opt);
    if (m == "table3") return cmd_eval_table3(opt);
    if (m == "table5") return cmd_eval_table5(opt);
    throw usage_error("unknown eval table: " + m);
  }
  if (cmd[0] == "report" && cmd.size() == 1) return cmd_report(opt);
  throw usage_error("unknown command: " + cmd[0]);
}

void print_error(const char* kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(parse_options(argc, argv));
  } catch (const usage_error& e) {
    print_error("usage", e.what());
    std::cerr << kUsage;
    return 1;
  } catch (const sumkit::error& e) {
    print_error("data", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 3;
  }
}
