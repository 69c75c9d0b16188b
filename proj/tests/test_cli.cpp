#include <sys/wait.h>

#include <openssl/evp.h>

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "sumkit/corpus.hpp"
#include "sumkit/csv.hpp"
#include "sumkit/extractor.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string& cli_bin() {
  static const std::string bin = [] {
    const char* env = std::getenv("SUMKIT_BIN");
    REQUIRE(env != nullptr);
    return std::string(env);
  }();
  return bin;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sumkit_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  REQUIRE(out.good());
}

// Runs the CLI through the shell; `env_prefix` may carry VAR=value
// assignments so no test mutates this process's environment.
RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / "sumkit_cli_tests";
  fs::create_directories(dir);
  const fs::path out_file = dir / ("stdout_" + std::to_string(counter) + ".txt");
  const fs::path err_file = dir / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  std::string cmd = env_prefix.empty() ? "" : env_prefix + " ";
  cmd += "\"" + cli_bin() + "\" " + args + " > \"" + out_file.string() +
         "\" 2> \"" + err_file.string() + "\"";
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(sumkit::csv_split(line));
  }
  return rows;
}

// 100-admission corpus shared by the read-only command tests.
const fs::path& shared_corpus_dir() {
  static const fs::path dir = [] {
    const fs::path d = fresh_dir("shared_corpus");
    spit(d / "cfg.json", R"({"generate": {"n_admissions": 100}})");
    const auto res = run_cli("generate --out \"" + d.string() +
                             "\" --seed 5 --config \"" +
                             (d / "cfg.json").string() + "\"");
    REQUIRE(res.code == 0);
    return d;
  }();
  return dir;
}

std::string corpus_flags(const fs::path& out) {
  const fs::path& c = shared_corpus_dir();
  return "--input \"" + (c / "corpus.jsonl").string() + "\" --gazetteer \"" +
         (c / "gazetteer.csv").string() + "\" --out \"" + out.string() + "\"";
}

std::string sha256_hex_of(const std::string& content) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  REQUIRE(ctx != nullptr);
  REQUIRE(EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1);
  REQUIRE(EVP_DigestUpdate(ctx, content.data(), content.size()) == 1);
  REQUIRE(EVP_DigestFinal_ex(ctx, digest.data(), &len) == 1);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace

TEST_CASE("usage problems exit 1 with a machine-readable line") {
  for (const std::string& args :
       {std::string(""), std::string("frobnicate"),
        std::string("generate --bogus 1"), std::string("analyze"),
        std::string("eval nosuchtable --input x --out y"),
        std::string("generate --seed notanumber"),
        std::string("generate --seed")}) {
    const auto res = run_cli(args);
    INFO(args);
    CHECK(res.code == 1);
    const auto err = json::parse(res.err.substr(0, res.err.find('\n')));
    CHECK(err["error"] == "usage");
    CHECK(res.err.find("usage: sumkit") != std::string::npos);
  }
}

TEST_CASE("generate is seed-deterministic and ingestible") {
  const fs::path a = fresh_dir("gen_a");
  const fs::path b = fresh_dir("gen_b");
  const fs::path c = fresh_dir("gen_c");
  spit(a / "cfg.json", R"({"generate": {"n_admissions": 40}})");
  const std::string cfg = " --config \"" + (a / "cfg.json").string() + "\"";
  REQUIRE(run_cli("generate --out \"" + a.string() + "\" --seed 3" + cfg).code ==
          0);
  REQUIRE(run_cli("generate --out \"" + b.string() + "\" --seed 3" + cfg).code ==
          0);
  REQUIRE(run_cli("generate --out \"" + c.string() + "\" --seed 4" + cfg).code ==
          0);
  for (const char* name : {"corpus.jsonl", "gazetteer.csv",
                           "ground_truth.jsonl"}) {
    CHECK(slurp(a / name) == slurp(b / name));
  }
  CHECK(slurp(a / "corpus.jsonl") != slurp(c / "corpus.jsonl"));

  const auto admissions = sumkit::ingest(a / "corpus.jsonl");
  CHECK(admissions.size() == 40);
}

TEST_CASE("stats reports corpus and filter figures") {
  const fs::path out = fresh_dir("stats");
  REQUIRE(run_cli("stats " + corpus_flags(out)).code == 0);
  const json stats = json::parse(slurp(out / "stats.json"));
  CHECK(stats["corpus"]["n_admissions"] == 100);
  CHECK(stats["filter"]["admissions_kept"] == 100);
  CHECK(stats["corpus"]["word_compression"]["mean"].get<double>() > 1.0);
}

TEST_CASE("analyze extractiveness emits rank bins and aggregate stats") {
  const fs::path out = fresh_dir("extr");
  REQUIRE(run_cli("analyze extractiveness " + corpus_flags(out)).code == 0);
  const auto rank = read_csv(out / "frag_rank.csv");
  REQUIRE(rank.size() == 11);
  CHECK(rank[0] == std::vector<std::string>{"bin", "mean_length", "n"});
  // one-liner copies put long fragments into the first decile
  CHECK(std::stod(rank[1][1]) > std::stod(rank[10][1]));
  const json agg = json::parse(slurp(out / "extractiveness.json"));
  const double coverage = agg["coverage"]["mean"].get<double>();
  CHECK(coverage > 0.0);
  CHECK(coverage <= 1.0);
  CHECK(agg["n_fragments"].get<std::int64_t>() > 0);
  const auto hist = read_csv(out / "frag_len_hist.csv");
  CHECK(hist.size() > 2);
}

TEST_CASE("analyze entities emits normalized figure data") {
  const fs::path out = fresh_dir("ents");
  REQUIRE(run_cli("analyze entities " + corpus_flags(out)).code == 0);

  const auto fig4 = read_csv(out / "fig4.csv");
  REQUIRE(fig4.size() == 11);
  for (std::size_t i = 1; i < fig4.size(); ++i) {
    const double p = std::stod(fig4[i][2]);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }

  const auto fig6 = read_csv(out / "fig6.csv");
  REQUIRE(fig6.size() == 11);
  double total = 0.0;
  for (std::size_t i = 1; i < fig6.size(); ++i) total += std::stod(fig6[i][1]);
  CHECK(total == Catch::Approx(1.0).margin(1e-9));

  const auto fig7 = read_csv(out / "fig7.csv");
  REQUIRE(fig7.size() == 41);  // 4 groups x 10 bins
  std::map<std::string, double> group_sum;
  for (std::size_t i = 1; i < fig7.size(); ++i) {
    group_sum[fig7[i][0]] += std::stod(fig7[i][2]);
  }
  for (const auto& [group, sum] : group_sum) {
    INFO(group);
    CHECK((std::abs(sum - 1.0) < 1e-9 || sum == 0.0));
  }

  for (const char* name : {"fig8_source.csv", "fig8_summary.csv"}) {
    const auto fig8 = read_csv(out / name);
    REQUIRE(fig8.size() == 10);  // 3x3 plus header
    std::map<std::string, double> row_sum;
    for (std::size_t i = 1; i < fig8.size(); ++i) {
      row_sum[fig8[i][0]] += std::stod(fig8[i][3]);
    }
    for (const auto& [group, sum] : row_sum) {
      INFO(name << " " << group);
      CHECK(sum == Catch::Approx(1.0).margin(1e-9));
    }
  }

  // every summary concept is mentioned in the first note, so one note
  // suffices under both greedy and forward reading order
  const auto table4 = read_csv(out / "table4.csv");
  REQUIRE(table4.size() == 4);
  std::map<std::string, double> notes_to_read;
  for (std::size_t i = 1; i < table4.size(); ++i) {
    notes_to_read[table4[i][0]] = std::stod(table4[i][1]);
  }
  CHECK(notes_to_read["greedy_oracle"] == 1.0);
  CHECK(notes_to_read["forward"] == 1.0);
  CHECK(notes_to_read["backward"] > 1.0);

  const json stats = json::parse(slurp(out / "entity_stats.json"));
  CHECK(stats["entity_compression"].get<double>() >= 1.0);
  CHECK(stats["source_diagonal_share"].get<double>() >
        stats["summary_diagonal_share"].get<double>());
}

TEST_CASE("coherence-stats sees the planted one-mention-per-summary rule") {
  const fs::path out = fresh_dir("chain");
  REQUIRE(run_cli("analyze coherence-stats " + corpus_flags(out)).code == 0);
  const json stats = json::parse(slurp(out / "coherence_stats.json"));
  CHECK(stats["n_concepts"].get<std::int64_t>() > 0);
  CHECK(stats["singleton_fraction"].get<double>() == 1.0);
  CHECK(stats["n_multi"].get<std::int64_t>() == 0);
  CHECK(stats["adjacent_defined"].get<bool>() == false);
}

TEST_CASE("oracles rank above the unsupervised baselines") {
  const fs::path out = fresh_dir("oracles");
  REQUIRE(run_cli("oracles " + corpus_flags(out) + " --seed 2").code == 0);

  const auto scores = read_csv(out / "method_scores.csv");
  REQUIRE(scores.size() == 8);  // 7 methods plus header
  std::map<std::string, double> f1;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    f1[scores[i][0]] = std::stod(scores[i][3]);
  }
  CHECK(f1["oracle_gain"] > f1["lexrank"]);
  CHECK(f1["oracle_sent_align"] > f1["lexrank"]);
  CHECK(f1["oracle_sa_plus_retrieval"] >= f1["oracle_retrieval"]);
  CHECK(f1["oracle_gain"] > f1["random"]);

  const auto curve = read_csv(out / "gain_curve.csv");
  REQUIRE(curve.size() >= 3);
  const double first_cum = std::stod(curve[1][4]);
  CHECK(first_cum > 0.0);
  CHECK(first_cum <= 1.0);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(std::stod(curve[i][1]) >= std::stod(curve[i][3]));  // best >= min
  }

  const json meta = json::parse(slurp(out / "oracles.json"));
  CHECK(meta["scope"] == "test");
  CHECK(meta["n_admissions"].get<int>() == 10);
}

TEST_CASE("train coherence beats its untrained initialization") {
  const fs::path out = fresh_dir("train_coh");
  spit(out / "cfg.json", R"({"coherence": {"epochs": 6}})");
  REQUIRE(run_cli("train coherence " + corpus_flags(out) +
                  " --seed 9 --config \"" + (out / "cfg.json").string() + "\"")
              .code == 0);
  const json train = json::parse(slurp(out / "coherence_train.json"));
  const double acc = train["eval"]["accuracy"].get<double>();
  const double base = train["eval"]["untrained_accuracy"].get<double>();
  CHECK(acc > base);
  CHECK(train["loss_trace"].size() == 6);
  const auto eval_rows = read_csv(out / "coherence_eval.csv");
  CHECK(eval_rows.size() ==
        1 + train["n_eval_grids"].get<std::size_t>());
  const json model = json::parse(slurp(out / "coherence_model.json"));
  CHECK(model.contains("embedding"));
  CHECK(model.contains("vocab"));
}

TEST_CASE("train extractor writes labels, ranks and a loadable checkpoint") {
  const fs::path out = fresh_dir("train_ext");
  spit(out / "cfg.json", R"({"extractor": {"epochs": 30}})");
  REQUIRE(run_cli("train extractor " + corpus_flags(out) +
                  " --seed 9 --config \"" + (out / "cfg.json").string() + "\"")
              .code == 0);

  const json train = json::parse(slurp(out / "extractor_train.json"));
  REQUIRE(train["loss_trace"].size() == 30);
  CHECK(train["loss_trace"].back().get<double>() <
        train["loss_trace"].front().get<double>());

  std::ifstream labels(out / "labels.jsonl");
  std::string line;
  std::size_t n_lines = 0;
  while (std::getline(labels, line)) {
    const json adm = json::parse(line);
    CHECK(adm.contains("admission_id"));
    CHECK(adm.contains("steps"));
    ++n_lines;
  }
  CHECK(n_lines == train["n_train"].get<std::size_t>());

  const auto rank = read_csv(out / "rank_deviation.csv");
  REQUIRE(rank.size() == 7);  // 6 buckets plus header
  CHECK(rank[1][0] == "1");
  CHECK(rank[6][0] == ">5");

  const auto model = sumkit::scorer_from_json(
      json::parse(slurp(out / "scorer_model.json")));
  CHECK(model.w1.size() ==
        static_cast<std::size_t>(model.cfg.hidden1) * sumkit::kNumFeatures);
}

TEST_CASE("eval commands format artifacts and name missing ones") {
  const fs::path empty = fresh_dir("eval_empty");
  const auto missing = run_cli("eval table2 --input \"" + empty.string() +
                               "\" --out \"" + empty.string() + "\"");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("method_scores.csv") != std::string::npos);

  const fs::path out = fresh_dir("eval_full");
  REQUIRE(run_cli("oracles " + corpus_flags(out) + " --seed 2").code == 0);
  REQUIRE(run_cli("eval table2 --input \"" + out.string() + "\" --out \"" +
                  out.string() + "\"")
              .code == 0);
  const auto table2 = read_csv(out / "table2.csv");
  REQUIRE(table2.size() == 8);
  CHECK(table2[0] == std::vector<std::string>{"method", "r1_r", "r1_p", "r1_f",
                                              "r2_r", "r2_p", "r2_f"});
  // formatting only: scores must match the raw artifact byte for byte
  const auto raw = read_csv(out / "method_scores.csv");
  for (std::size_t i = 1; i < table2.size(); ++i) {
    for (std::size_t j = 0; j < 7; ++j) CHECK(table2[i][j] == raw[i][j]);
  }
}

TEST_CASE("report writes a complete manifest with real hashes") {
  const fs::path out = fresh_dir("report");
  spit(out / "cfg.json",
       R"({"generate": {"n_admissions": 40}, "coherence": {"epochs": 4},
           "extractor": {"epochs": 15}})");
  REQUIRE(run_cli("report --out \"" + out.string() + "\" --seed 21 --config \"" +
                  (out / "cfg.json").string() + "\"")
              .code == 0);

  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["toolkit_version"] == "0.1.0");
  CHECK(manifest["seed"] == 21);
  CHECK(manifest["config_hash"].get<std::string>().size() == 64);

  std::set<std::string> on_disk;
  for (const auto& entry : fs::recursive_directory_iterator(out)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), out).generic_string();
    if (rel != "manifest.json") on_disk.insert(rel);
  }
  std::set<std::string> listed;
  for (const auto& [name, hash] : manifest["files"].items()) {
    listed.insert(name);
    CHECK(hash.get<std::string>() == sha256_hex_of(slurp(out / name)));
  }
  CHECK(listed == on_disk);
}

TEST_CASE("report trees are byte-identical across parallelism and reruns") {
  const fs::path cfg_dir = fresh_dir("det_cfg");
  const fs::path a = fresh_dir("det_a");
  const fs::path b = fresh_dir("det_b");
  spit(cfg_dir / "cfg.json",
       R"({"generate": {"n_admissions": 40}, "coherence": {"epochs": 4},
           "extractor": {"epochs": 15}})");
  const std::string cfg = " --seed 33 --config \"" +
                          (cfg_dir / "cfg.json").string() + "\"";
  REQUIRE(run_cli("report --out \"" + a.string() + "\" --jobs 1" + cfg).code ==
          0);
  REQUIRE(run_cli("report --out \"" + b.string() + "\" --jobs 8" + cfg).code ==
          0);
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), a).generic_string();
    INFO(rel);
    CHECK(slurp(a / rel) == slurp(b / rel));
    ++compared;
  }
  CHECK(compared >= 30);
}

TEST_CASE("config file, environment and flags stack in that order") {
  const fs::path dir = fresh_dir("precedence");
  spit(dir / "cfg.json",
       R"({"seed": 5, "generate": {"n_admissions": 30}})");
  const std::string cfg = " --config \"" + (dir / "cfg.json").string() + "\"";

  auto generate_into = [&](const std::string& sub, const std::string& extra,
                           const std::string& env) {
    const fs::path out = dir / sub;
    REQUIRE(
        run_cli("generate --out \"" + out.string() + "\"" + cfg + extra, env)
            .code == 0);
    return slurp(out / "corpus.jsonl");
  };
  const std::string from_config = generate_into("a", "", "");
  const std::string from_env = generate_into("b", "", "SUMKIT_SEED=6");
  const std::string from_flag =
      generate_into("c", " --seed 7", "SUMKIT_SEED=6");

  // reference corpora produced with explicit seeds
  const std::string ref5 = generate_into("r5", " --seed 5", "");
  const std::string ref6 = generate_into("r6", " --seed 6", "");
  const std::string ref7 = generate_into("r7", " --seed 7", "");
  CHECK(from_config == ref5);
  CHECK(from_env == ref6);
  CHECK(from_flag == ref7);
  CHECK(from_config != from_env);

  // unknown config keys are rejected before any work happens
  spit(dir / "bad.json", R"({"generate": {"n_admission": 30}})");
  const auto bad = run_cli("generate --out \"" + (dir / "x").string() +
                           "\" --config \"" + (dir / "bad.json").string() +
                           "\"");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("n_admission") != std::string::npos);
}

TEST_CASE("environment supplies the corpus path when flags omit it") {
  const fs::path out = fresh_dir("env_input");
  const auto res =
      run_cli("stats --out \"" + out.string() + "\"",
              "SUMKIT_INPUT=\"" +
                  (shared_corpus_dir() / "corpus.jsonl").string() + "\"");
  CHECK(res.code == 0);
  CHECK(json::parse(slurp(out / "stats.json"))["corpus"]["n_admissions"] ==
        100);
}
