#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "sumkit/error.hpp"

namespace sumkit {

/// Shortest round-trip decimal form of a double.  Used for every float that
/// ends up in a CSV or JSON report so that repeated runs are byte-identical.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string csv_escape(std::string_view field) {
  const bool needs_quotes =
      field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

/// Minimal CSV writer: header row on construction, one `row(...)` call per
/// record.  Numeric fields are formatted with shortest round-trip notation.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path,
            std::initializer_list<std::string_view> header)
      : out_(path, std::ios::binary) {
    if (!out_) throw error("cannot open for writing: " + path.string());
    bool first = true;
    for (auto h : header) {
      if (!first) out_ << ',';
      out_ << csv_escape(h);
      first = false;
    }
    out_ << '\n';
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((write_field(fields, first), first = false), ...);
    out_ << '\n';
  }

  void flush() { out_.flush(); }

 private:
  void write_field(const std::string& s, bool first) {
    sep(first);
    out_ << csv_escape(s);
  }
  void write_field(std::string_view s, bool first) {
    sep(first);
    out_ << csv_escape(s);
  }
  void write_field(const char* s, bool first) {
    sep(first);
    out_ << csv_escape(s);
  }
  void write_field(double v, bool first) {
    sep(first);
    out_ << format_double(v);
  }
  void write_field(int v, bool first) {
    sep(first);
    out_ << v;
  }
  void write_field(std::int64_t v, bool first) {
    sep(first);
    out_ << v;
  }
  void write_field(std::uint64_t v, bool first) {
    sep(first);
    out_ << v;
  }
  void sep(bool first) {
    if (!first) out_ << ',';
  }

  std::ofstream out_;
};

/// Splits one CSV line into fields, honouring double-quote escaping.
inline std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace sumkit
