#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "oracle_helpers.hpp"
#include "sumkit/corpus.hpp"
#include "sumkit/lexical.hpp"
#include "sumkit/random.hpp"

using namespace sumkit;

namespace {

std::vector<std::string> toks(const std::string& text) {
  return tokenize(text);
}

AdmissionView view_of(const std::string& summary,
                      std::vector<std::string> notes) {
  Admission adm;
  adm.admission_id = "t";
  adm.summary = summary;
  std::int64_t ts = 0;
  for (auto& n : notes) {
    adm.notes.push_back({"n" + std::to_string(ts), NoteType::Progress, ts,
                         std::move(n)});
    ts += 10;
  }
  return make_view(adm);
}

}  // namespace

TEST_CASE("rouge_n hand-computed cases") {
  const auto cand = toks("the cat sat");
  const auto ref = toks("the cat ran");
  const auto r1 = rouge_n(cand, ref, 1);
  CHECK(r1.recall == Catch::Approx(2.0 / 3.0));
  CHECK(r1.precision == Catch::Approx(2.0 / 3.0));
  CHECK(r1.f1 == Catch::Approx(2.0 / 3.0));
  const auto r2 = rouge_n(cand, ref, 2);
  CHECK(r2.recall == Catch::Approx(0.5));
  CHECK(r2.precision == Catch::Approx(0.5));
}

TEST_CASE("rouge_n clips repeated n-grams") {
  const auto cand = toks("a a a a");
  const auto ref = toks("a a b");
  const auto r1 = rouge_n(cand, ref, 1);
  CHECK(r1.recall == Catch::Approx(2.0 / 3.0));
  CHECK(r1.precision == Catch::Approx(2.0 / 4.0));
}

TEST_CASE("rouge_n empty cases are all-zero") {
  const std::vector<std::string> empty;
  const auto ref = toks("a b");
  CHECK(rouge_n(empty, ref, 1).f1 == 0.0);
  CHECK(rouge_n(ref, empty, 1).f1 == 0.0);
  CHECK(rouge_n(toks("a"), ref, 2).f1 == 0.0);  // candidate has no bigrams
}

TEST_CASE("identical sequences score 1.0") {
  const auto t = toks("one two three four");
  CHECK(rouge_n(t, t, 1).f1 == Catch::Approx(1.0));
  CHECK(rouge_n(t, t, 2).f1 == Catch::Approx(1.0));
  CHECK(r12(t, t) == Catch::Approx(1.0));
}

TEST_CASE("rouge_n equals brute-force oracle on random instances") {
  rng_t rng(derive_seed(11, 0));
  for (int trial = 0; trial < 300; ++trial) {
    const auto cand = refimpl::random_tokens(rng, 40, 5);
    const auto ref = refimpl::random_tokens(rng, 40, 5);
    for (int n = 1; n <= 2; ++n) {
      const auto got = rouge_n(cand, ref, n);
      const auto want = refimpl::rouge_brute(cand, ref, n);
      CHECK(got.recall == Catch::Approx(want.recall).margin(1e-12));
      CHECK(got.precision == Catch::Approx(want.precision).margin(1e-12));
      CHECK(got.f1 == Catch::Approx(want.f1).margin(1e-12));
    }
  }
}

TEST_CASE("RougeAccumulator matches whole-sequence recomputation") {
  rng_t rng(derive_seed(12, 0));
  for (int trial = 0; trial < 120; ++trial) {
    const auto ref_toks = refimpl::random_tokens(rng, 30, 4);
    TokenInterner interner;
    RougeAccumulator acc(interner.ids(ref_toks));
    std::vector<std::string> concat;
    const int n_sents = uniform_int(rng, 0, 6);
    for (int s = 0; s < n_sents; ++s) {
      const auto sent = refimpl::random_tokens(rng, 10, 4);
      // peek must equal append-then-measure
      const double peeked = acc.peek_r12(interner.ids(sent));
      acc.append(interner.ids(sent));
      std::vector<std::string> next_concat = concat;
      next_concat.insert(next_concat.end(), sent.begin(), sent.end());
      const double want = refimpl::r12_brute(next_concat, ref_toks);
      CHECK(acc.current_r12() == Catch::Approx(want).margin(1e-12));
      CHECK(peeked == Catch::Approx(want).margin(1e-12));
      concat = std::move(next_concat);
    }
  }
}

TEST_CASE("extract_fragments basic behaviour") {
  const auto summary = toks("the cat sat on the mat");
  const auto source = toks("yesterday the cat sat quietly on the mat outside");
  const auto frags = extract_fragments(summary, source);
  REQUIRE(frags.size() == 2);
  CHECK(frags[0].summary_start == 0);
  CHECK(frags[0].length == 3);  // "the cat sat"
  CHECK(frags[1].length == 3);  // "on the mat"
}

TEST_CASE("extract_fragments no overlap -> empty") {
  CHECK(extract_fragments(toks("alpha beta"), toks("gamma delta")).empty());
}

TEST_CASE("extract_fragments ties go to the earliest source position") {
  const auto summary = toks("a b");
  const auto source = toks("x a b y a b");
  const auto frags = extract_fragments(summary, source);
  REQUIRE(frags.size() == 1);
  CHECK(frags[0].source_start == 1);
}

TEST_CASE("extract_fragments equals exhaustive oracle on random instances") {
  rng_t rng(derive_seed(13, 0));
  for (int trial = 0; trial < 500; ++trial) {
    const auto summary = refimpl::random_tokens(rng, 30, 5);
    const auto source = refimpl::random_tokens(rng, 30, 5);
    const auto got = extract_fragments(summary, source);
    const auto want = refimpl::fragments_brute(summary, source);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].summary_start == want[i].summary_start);
      CHECK(got[i].source_start == want[i].source_start);
      CHECK(got[i].length == want[i].length);
    }
  }
}

TEST_CASE("fragments are non-overlapping and ordered on the summary side") {
  rng_t rng(derive_seed(14, 0));
  for (int trial = 0; trial < 200; ++trial) {
    const auto summary = refimpl::random_tokens(rng, 25, 3);
    const auto source = refimpl::random_tokens(rng, 25, 3);
    int prev_end = -1;
    for (const auto& f : extract_fragments(summary, source)) {
      CHECK(f.summary_start > prev_end);
      CHECK(f.length >= 1);
      prev_end = f.summary_start + f.length - 1;
    }
  }
}

TEST_CASE("extractiveness: planted verbatim copy dominates density") {
  const std::string copied =
      "patient was admitted with severe chest pain radiating to the left arm";
  const auto view = view_of(
      copied + ". Novel text unseen anywhere in any note here.",
      {"Intro sentence present. " + copied + ". Trailing content follows."});
  const auto stats = extractiveness(view);
  REQUIRE(!stats.fragments.empty());
  int longest = 0;
  for (const auto& f : stats.fragments) longest = std::max(longest, f.length);
  CHECK(longest == 12);
  // density >= longest^2 / |summary| means the copy dominates
  const double len = static_cast<double>(view.summary_tokens.size());
  CHECK(stats.density >= longest * longest / len);
  CHECK(stats.coverage <= 1.0);
  CHECK(stats.density >= stats.coverage);
}

TEST_CASE("extractiveness: zero overlap -> zero coverage and density") {
  const auto view =
      view_of("completely novel reference text.", {"unrelated source words"});
  const auto stats = extractiveness(view);
  CHECK(stats.coverage == 0.0);
  CHECK(stats.density == 0.0);
  CHECK(stats.fragments.empty());
}

TEST_CASE("extractiveness rejects empty summaries") {
  Admission adm;
  adm.admission_id = "x";
  adm.summary = "...";  // tokenizes to nothing
  adm.notes.push_back({"n", NoteType::Progress, 0, "Some source text."});
  CHECK_THROWS_AS(extractiveness(make_view(adm)), error);
}

TEST_CASE("coverage and density formulas on a hand case") {
  // summary = 10 tokens; fragments of lengths 4 and 2.
  const auto view = view_of("a b c d x y z w e f",
                            {"a b c d q q e f q q"});
  const auto stats = extractiveness(view);
  REQUIRE(stats.fragments.size() == 2);
  CHECK(stats.coverage == Catch::Approx(0.6));
  CHECK(stats.density == Catch::Approx((16.0 + 4.0) / 10.0));
  CHECK(stats.length_histogram.at(4) == 1);
  CHECK(stats.length_histogram.at(2) == 1);
}

TEST_CASE("rank deciles use ceil(rank*10/k)") {
  // k=2 fragments: ranks 1,2 -> deciles ceil(5)=5, ceil(10)=10.
  const auto view = view_of("a b c d x y z w e f",
                            {"a b c d q q e f q q"});
  const auto stats = extractiveness(view);
  CHECK(stats.rank_count[4] == 1);
  CHECK(stats.rank_count[9] == 1);
  CHECK(stats.rank_length_sum[4] == 4);
  CHECK(stats.rank_length_sum[9] == 2);
}

TEST_CASE("aggregate_extractiveness pools histograms and rank bins") {
  const auto v1 = view_of("a b c d x y z w e f", {"a b c d q q e f q q"});
  const auto v2 = view_of("a b q q q", {"a b z z z"});
  const std::vector<ExtractivenessStats> per = {extractiveness(v1),
                                                extractiveness(v2)};
  const auto agg = aggregate_extractiveness(per);
  CHECK(agg.n_fragments == 3);
  CHECK(agg.length_histogram.at(2) == 2);
  CHECK(agg.length_histogram.at(4) == 1);
  CHECK(agg.coverage.n == 2);
  // v2's single fragment: rank 1 of 1 -> decile 10.
  CHECK(agg.count_by_rank[9] == 2);
  CHECK(agg.mean_length_by_rank[9] == Catch::Approx(2.0));
  CHECK(agg.unigram_fragment_share == 0.0);
}
