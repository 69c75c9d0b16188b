#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sumkit/error.hpp"
#include "sumkit/numeric.hpp"

namespace sumkit {

using json = nlohmann::json;

enum class NoteType { Admission, Progress, Consult, Other };
enum class Split { Train, Valid, Test };

inline std::string to_string(NoteType t) {
  switch (t) {
    case NoteType::Admission: return "admission";
    case NoteType::Progress: return "progress";
    case NoteType::Consult: return "consult";
    default: return "other";
  }
}

inline std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    default: return "test";
  }
}

inline NoteType note_type_from_string(std::string_view s) {
  if (s == "admission") return NoteType::Admission;
  if (s == "progress") return NoteType::Progress;
  if (s == "consult") return NoteType::Consult;
  return NoteType::Other;
}

struct Note {
  std::string note_id;
  NoteType note_type = NoteType::Other;
  std::int64_t timestamp = 0;  // seconds since epoch
  std::string text;
};

struct Admission {
  std::string admission_id;
  Split split = Split::Train;
  std::string summary;
  std::vector<Note> notes;
};

// ---------------------------------------------------------------------------
// Tokenization

namespace detail {
inline bool is_alnum_ascii(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}
inline char to_lower_ascii(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}
inline bool is_space_ascii(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}
inline bool is_upper_ascii(char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_digit_ascii(char c) { return c >= '0' && c <= '9'; }
}  // namespace detail

/// Lowercased maximal alphanumeric runs; everything else is a separator.
/// Locale-independent by construction.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (detail::is_alnum_ascii(c)) {
      cur.push_back(detail::to_lower_ascii(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Number of whitespace-separated chunks.  This is the "word" count used for
/// word budgets, as opposed to the normalized token count.
inline int word_count(std::string_view text) {
  int n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool ws = detail::is_space_ascii(c);
    if (!ws && !in_word) ++n;
    in_word = !ws;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Sentence segmentation

struct SentenceRecord {
  int sent_id = 0;                  // position within its scope (note/summary)
  std::vector<std::string> tokens;  // normalized tokens
  std::string raw;                  // trimmed surface text
  int note_index = 0;      // index into Admission::notes; see sentinels below
  std::size_t char_start = 0;  // offset of the first non-space char in source
  int note_token_offset = 0;   // tokens preceding this sentence in its scope
  int note_token_count = 0;    // total tokens in its scope

  /// Relative position of the sentence start within its note, in [0, 1).
  double rel_pos() const {
    return note_token_count > 0
               ? static_cast<double>(note_token_offset) / note_token_count
               : 0.0;
  }
};

/// note_index sentinel for summary sentences.
inline constexpr int kSummaryNoteIndex = -1;
/// note_index sentinel for sentences pulled from other admissions.
inline constexpr int kRetrievedNoteIndex = -2;

/// Splits clinical text into sentences.  Boundaries:
///  - '.', '!' or '?' followed by whitespace and an uppercase letter or digit;
///  - a newline when the line that just ended lacks terminal punctuation, or
///    when the next line starts with a list marker ('-', '*', or digits
///    followed by '.' or ')').
/// Decimal numbers ("3.5 mg") never split because no whitespace follows the
/// period.  The returned raw slices, in order, cover all non-whitespace text.
inline std::vector<SentenceRecord> segment(std::string_view text) {
  using namespace detail;
  const std::size_t n = text.size();
  std::vector<std::size_t> bounds{0};

  auto is_list_marker = [&](std::size_t pos) {
    if (pos >= n) return false;
    const char c = text[pos];
    if (c == '-' || c == '*') return true;
    if (!is_digit_ascii(c)) return false;
    std::size_t j = pos;
    while (j < n && is_digit_ascii(text[j])) ++j;
    return j < n && (text[j] == '.' || text[j] == ')');
  };

  char last_nonspace = '\0';
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (c == '.' || c == '!' || c == '?') {
      std::size_t j = i + 1;
      if (j < n && is_space_ascii(text[j])) {
        std::size_t k = j;
        while (k < n && is_space_ascii(text[k])) ++k;
        if (k < n && (is_upper_ascii(text[k]) || is_digit_ascii(text[k]) ||
                      is_list_marker(k))) {
          bounds.push_back(k);
          i = k - 1;
          last_nonspace = '\0';
          continue;
        }
      }
      last_nonspace = c;
    } else if (c == '\n') {
      std::size_t k = i + 1;
      while (k < n && (text[k] == ' ' || text[k] == '\t')) ++k;
      const bool line_unterminated = last_nonspace != '\0' &&
                                     last_nonspace != '.' &&
                                     last_nonspace != '!' &&
                                     last_nonspace != '?';
      if (k < n && text[k] != '\n' &&
          (line_unterminated || is_list_marker(k))) {
        bounds.push_back(k);
        i = k - 1;
        last_nonspace = '\0';
        continue;
      }
    } else if (!is_space_ascii(c)) {
      last_nonspace = c;
    }
  }
  bounds.push_back(n);

  std::vector<SentenceRecord> out;
  int next_id = 0;
  int token_offset = 0;
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    std::size_t lo = bounds[b];
    std::size_t hi = bounds[b + 1];
    while (lo < hi && is_space_ascii(text[lo])) ++lo;
    while (hi > lo && is_space_ascii(text[hi - 1])) --hi;
    if (lo >= hi) continue;
    SentenceRecord rec;
    rec.sent_id = next_id++;
    rec.raw = std::string(text.substr(lo, hi - lo));
    rec.tokens = tokenize(rec.raw);
    rec.char_start = lo;
    rec.note_token_offset = token_offset;
    token_offset += static_cast<int>(rec.tokens.size());
    out.push_back(std::move(rec));
  }
  for (auto& rec : out) rec.note_token_count = token_offset;
  return out;
}

// ---------------------------------------------------------------------------
// JSONL ingest / serialize

namespace detail {

inline const json& require_field(const json& obj, const char* name,
                                 std::size_t line_no) {
  auto it = obj.find(name);
  if (it == obj.end()) {
    throw error("missing field " + std::string(name) + " @line " +
                std::to_string(line_no));
  }
  return *it;
}

inline std::string require_string(const json& obj, const char* name,
                                  std::size_t line_no) {
  const json& f = require_field(obj, name, line_no);
  if (!f.is_string()) {
    throw error("field " + std::string(name) + " must be a string @line " +
                std::to_string(line_no));
  }
  return f.get<std::string>();
}

}  // namespace detail

enum class CorpusFormat { JsonLines };

/// Reads a JSONL corpus: one admission object per line.  Notes are sorted by
/// timestamp (stable, so file order breaks ties).  Malformed lines, missing
/// fields, unknown split names, negative timestamps, empty summaries and
/// empty note lists are all reported with their line number.
inline std::vector<Admission> ingest(
    const std::filesystem::path& path,
    CorpusFormat format = CorpusFormat::JsonLines) {
  if (format != CorpusFormat::JsonLines) throw error("unsupported format");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error("cannot open: " + path.string());
  std::vector<Admission> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw error("malformed json @line " + std::to_string(line_no) + ": " +
                  e.what());
    }
    if (!obj.is_object()) {
      throw error("expected object @line " + std::to_string(line_no));
    }
    Admission adm;
    adm.admission_id = detail::require_string(obj, "admission_id", line_no);
    if (adm.admission_id.empty()) {
      throw error("empty admission_id @line " + std::to_string(line_no));
    }
    const std::string split = detail::require_string(obj, "split", line_no);
    if (split == "train") {
      adm.split = Split::Train;
    } else if (split == "valid") {
      adm.split = Split::Valid;
    } else if (split == "test") {
      adm.split = Split::Test;
    } else {
      throw error("invalid split \"" + split + "\" @line " +
                  std::to_string(line_no));
    }
    adm.summary = detail::require_string(obj, "summary", line_no);
    if (adm.summary.empty()) {
      throw error("empty summary @line " + std::to_string(line_no));
    }
    const json& notes = detail::require_field(obj, "notes", line_no);
    if (!notes.is_array()) {
      throw error("field notes must be an array @line " +
                  std::to_string(line_no));
    }
    if (notes.empty()) {
      throw error("empty notes @line " + std::to_string(line_no));
    }
    for (const json& jn : notes) {
      if (!jn.is_object()) {
        throw error("note must be an object @line " + std::to_string(line_no));
      }
      Note note;
      note.note_id = detail::require_string(jn, "note_id", line_no);
      note.note_type = note_type_from_string(
          detail::require_string(jn, "note_type", line_no));
      const json& ts = detail::require_field(jn, "timestamp", line_no);
      if (!ts.is_number_integer() && !ts.is_number_unsigned()) {
        throw error("field timestamp must be an integer @line " +
                    std::to_string(line_no));
      }
      note.timestamp = ts.get<std::int64_t>();
      if (note.timestamp < 0) {
        throw error("negative timestamp @line " + std::to_string(line_no));
      }
      note.text = detail::require_string(jn, "text", line_no);
      adm.notes.push_back(std::move(note));
    }
    std::stable_sort(adm.notes.begin(), adm.notes.end(),
                     [](const Note& a, const Note& b) {
                       return a.timestamp < b.timestamp;
                     });
    out.push_back(std::move(adm));
  }
  return out;
}

inline json to_json(const Admission& adm) {
  json notes = json::array();
  for (const Note& n : adm.notes) {
    notes.push_back({{"note_id", n.note_id},
                     {"note_type", to_string(n.note_type)},
                     {"timestamp", n.timestamp},
                     {"text", n.text}});
  }
  return {{"admission_id", adm.admission_id},
          {"split", to_string(adm.split)},
          {"summary", adm.summary},
          {"notes", notes}};
}

/// Writes admissions as JSONL.  `ingest(serialize(x)) == x` provided notes
/// are already timestamp-sorted.
inline void serialize(std::span<const Admission> admissions,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error("cannot open for writing: " + path.string());
  for (const Admission& adm : admissions) {
    out << to_json(adm).dump() << '\n';
  }
  if (!out) throw error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Filtering

struct FilterConfig {
  int min_note_chars = 25;        // notes shorter than this are dropped
  int max_source_tokens = 20000;  // admissions with more source tokens drop
  int min_summary_chars = 25;
  int max_summary_tokens = 500;
};

struct FilterReport {
  std::int64_t admissions_in = 0;
  std::int64_t admissions_kept = 0;
  std::int64_t notes_dropped = 0;
  // reason -> number of admissions dropped for that (first-tripped) reason
  std::map<std::string, std::int64_t> dropped;

  json to_json() const {
    json d = json::object();
    for (const auto& [k, v] : dropped) d[k] = v;
    return {{"admissions_in", admissions_in},
            {"admissions_kept", admissions_kept},
            {"notes_dropped", notes_dropped},
            {"dropped", d}};
  }
};

namespace detail {
inline std::size_t trimmed_length(std::string_view s) {
  std::size_t lo = 0, hi = s.size();
  while (lo < hi && is_space_ascii(s[lo])) ++lo;
  while (hi > lo && is_space_ascii(s[hi - 1])) --hi;
  return hi - lo;
}
}  // namespace detail

/// Applies note-level and admission-level quality filters.  Admission checks
/// run in a fixed order and only the first failed check is counted, so the
/// per-reason tallies sum to the number of dropped admissions.
inline std::pair<std::vector<Admission>, FilterReport> filter_admissions(
    std::span<const Admission> admissions, const FilterConfig& cfg = {}) {
  if (cfg.min_note_chars < 0 || cfg.max_source_tokens <= 0 ||
      cfg.min_summary_chars < 0 || cfg.max_summary_tokens <= 0) {
    throw error("filter_admissions: thresholds must be positive");
  }
  std::vector<Admission> kept;
  FilterReport report;
  report.admissions_in = static_cast<std::int64_t>(admissions.size());
  for (const Admission& adm : admissions) {
    Admission trimmed;
    trimmed.admission_id = adm.admission_id;
    trimmed.split = adm.split;
    trimmed.summary = adm.summary;
    for (const Note& note : adm.notes) {
      if (detail::trimmed_length(note.text) <
          static_cast<std::size_t>(cfg.min_note_chars)) {
        ++report.notes_dropped;
        continue;
      }
      trimmed.notes.push_back(note);
    }
    auto drop = [&](const char* reason) { ++report.dropped[reason]; };
    if (trimmed.notes.empty()) {
      drop("no_valid_notes");
      continue;
    }
    std::size_t source_tokens = 0;
    for (const Note& note : trimmed.notes) {
      source_tokens += tokenize(note.text).size();
    }
    if (source_tokens > static_cast<std::size_t>(cfg.max_source_tokens)) {
      drop("source_too_long");
      continue;
    }
    const std::size_t summary_tokens = tokenize(trimmed.summary).size();
    if (source_tokens < summary_tokens) {
      drop("source_shorter_than_summary");
      continue;
    }
    if (detail::trimmed_length(trimmed.summary) <
        static_cast<std::size_t>(cfg.min_summary_chars)) {
      drop("summary_too_short");
      continue;
    }
    if (summary_tokens > static_cast<std::size_t>(cfg.max_summary_tokens)) {
      drop("summary_too_long");
      continue;
    }
    kept.push_back(std::move(trimmed));
  }
  report.admissions_kept = static_cast<std::int64_t>(kept.size());
  return {std::move(kept), report};
}

// ---------------------------------------------------------------------------
// Flattened per-admission view

/// Segmented, flattened form of one admission: all source sentences across
/// notes with contiguous ids, plus segmented summary sentences and the full
/// summary token sequence.  Sentences that normalize to zero tokens are
/// dropped here (they carry no signal for any downstream consumer).
struct AdmissionView {
  std::string admission_id;
  Split split = Split::Train;
  std::vector<NoteType> note_types;          // per note
  std::vector<SentenceRecord> source;        // sent_id = flat index
  std::vector<SentenceRecord> summary;       // note_index = kSummaryNoteIndex
  std::vector<std::string> summary_tokens;   // concatenated summary tokens
};

inline AdmissionView make_view(const Admission& adm) {
  AdmissionView view;
  view.admission_id = adm.admission_id;
  view.split = adm.split;
  int next_id = 0;
  for (std::size_t ni = 0; ni < adm.notes.size(); ++ni) {
    view.note_types.push_back(adm.notes[ni].note_type);
    for (SentenceRecord& rec : segment(adm.notes[ni].text)) {
      if (rec.tokens.empty()) continue;
      rec.sent_id = next_id++;
      rec.note_index = static_cast<int>(ni);
      view.source.push_back(std::move(rec));
    }
  }
  int next_sum_id = 0;
  for (SentenceRecord& rec : segment(adm.summary)) {
    if (rec.tokens.empty()) continue;
    rec.sent_id = next_sum_id++;
    rec.note_index = kSummaryNoteIndex;
    view.summary.push_back(std::move(rec));
  }
  for (const SentenceRecord& rec : view.summary) {
    view.summary_tokens.insert(view.summary_tokens.end(), rec.tokens.begin(),
                               rec.tokens.end());
  }
  return view;
}

// ---------------------------------------------------------------------------
// Corpus statistics

struct CorpusStats {
  std::int64_t n_admissions = 0;
  std::int64_t n_patients = 0;  // distinct admission ids
  std::int64_t n_notes = 0;
  MeanStd los_days;                    // per admission
  MeanStd notes_per_admission;         // per admission
  MeanStd source_sentences;            // per admission
  MeanStd source_tokens;               // per admission
  MeanStd source_tokens_per_sentence;  // pooled over sentences
  MeanStd summary_sentences;           // per admission
  MeanStd summary_tokens;              // per admission
  MeanStd summary_tokens_per_sentence;  // pooled over sentences
  MeanStd word_compression;  // source tokens / summary tokens, per admission

  json to_json() const {
    auto ms = [](const MeanStd& m) {
      return json{{"mean", m.mean}, {"std", m.std_dev}, {"n", m.n}};
    };
    return {{"n_admissions", n_admissions},
            {"n_patients", n_patients},
            {"n_notes", n_notes},
            {"los_days", ms(los_days)},
            {"notes_per_admission", ms(notes_per_admission)},
            {"source_sentences", ms(source_sentences)},
            {"source_tokens", ms(source_tokens)},
            {"source_tokens_per_sentence", ms(source_tokens_per_sentence)},
            {"summary_sentences", ms(summary_sentences)},
            {"summary_tokens", ms(summary_tokens)},
            {"summary_tokens_per_sentence", ms(summary_tokens_per_sentence)},
            {"word_compression", ms(word_compression)}};
  }
};

inline CorpusStats corpus_stats(std::span<const Admission> admissions) {
  if (admissions.empty()) throw error("corpus_stats: no admissions");
  CorpusStats stats;
  stats.n_admissions = static_cast<std::int64_t>(admissions.size());
  std::set<std::string> ids;
  std::vector<double> los, notes_per, src_sents, src_toks, sum_sents, sum_toks,
      compression, src_sent_lens, sum_sent_lens;
  for (const Admission& adm : admissions) {
    ids.insert(adm.admission_id);
    stats.n_notes += static_cast<std::int64_t>(adm.notes.size());
    notes_per.push_back(static_cast<double>(adm.notes.size()));
    if (!adm.notes.empty()) {
      los.push_back(static_cast<double>(adm.notes.back().timestamp -
                                        adm.notes.front().timestamp) /
                    86400.0);
    }
    const AdmissionView view = make_view(adm);
    double st = 0.0;
    for (const SentenceRecord& s : view.source) {
      st += static_cast<double>(s.tokens.size());
      src_sent_lens.push_back(static_cast<double>(s.tokens.size()));
    }
    double mt = 0.0;
    for (const SentenceRecord& s : view.summary) {
      mt += static_cast<double>(s.tokens.size());
      sum_sent_lens.push_back(static_cast<double>(s.tokens.size()));
    }
    src_sents.push_back(static_cast<double>(view.source.size()));
    src_toks.push_back(st);
    sum_sents.push_back(static_cast<double>(view.summary.size()));
    sum_toks.push_back(mt);
    if (mt > 0.0) compression.push_back(st / mt);
  }
  stats.n_patients = static_cast<std::int64_t>(ids.size());
  stats.los_days = mean_std(los);
  stats.notes_per_admission = mean_std(notes_per);
  stats.source_sentences = mean_std(src_sents);
  stats.source_tokens = mean_std(src_toks);
  stats.source_tokens_per_sentence = mean_std(src_sent_lens);
  stats.summary_sentences = mean_std(sum_sents);
  stats.summary_tokens = mean_std(sum_toks);
  stats.summary_tokens_per_sentence = mean_std(sum_sent_lens);
  stats.word_compression = mean_std(compression);
  return stats;
}

}  // namespace sumkit
