#pragma once

// Small text and file utilities shared by every module: ASCII case folding,
// word tokenization, stopwords, stable hashing, shortest round-trip number
// formatting and an RFC 4180 CSV reader/writer.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "bibliograph/errors.hpp"

namespace bibliograph::text {

inline char fold_char(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

// Folds ASCII letters only; multi-byte UTF-8 sequences pass through untouched.
inline std::string casefold(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), fold_char);
  return out;
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline bool starts_with_folded(std::string_view haystack, std::string_view prefix) {
  if (prefix.size() > haystack.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (fold_char(haystack[i]) != fold_char(prefix[i])) return false;
  }
  return true;
}

inline bool contains_folded(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  if (needle.size() > haystack.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    if (starts_with_folded(haystack.substr(i), needle)) return true;
  }
  return false;
}

// Splits on `sep`, trims each piece and drops empty pieces.
inline std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(sep, start);
    if (end == std::string_view::npos) end = s.size();
    auto piece = trim(s.substr(start, end - start));
    if (!piece.empty()) out.emplace_back(piece);
    start = end + 1;
  }
  return out;
}

inline bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

// Lower-cased runs of letters/digits (non-ASCII bytes count as letters).
inline std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (is_word_byte(static_cast<unsigned char>(ch))) {
      cur.push_back(fold_char(ch));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Word tokens plus segment breaks: punctuation other than hyphen/apostrophe
// ends a segment, which keyphrase n-grams never cross. An empty string marks
// a break.
inline std::vector<std::string> words_with_breaks(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  };
  for (char ch : s) {
    auto uc = static_cast<unsigned char>(ch);
    if (is_word_byte(uc)) {
      cur.push_back(fold_char(ch));
    } else {
      flush();
      if (!is_space(ch) && ch != '-' && ch != '\'') {
        if (!out.empty() && !out.back().empty()) out.emplace_back();
      }
    }
  }
  flush();
  return out;
}

inline const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> kWords = {
      "a",       "about",   "above",  "across", "after",   "again",  "against", "all",
      "also",    "am",      "among",  "an",     "and",     "any",    "are",     "as",
      "at",      "be",      "been",   "before", "being",   "below",  "between", "both",
      "but",     "by",      "can",    "could",  "did",     "do",     "does",    "doing",
      "down",    "during",  "each",   "either", "etc",     "few",    "for",     "from",
      "further", "had",     "has",    "have",   "having",  "he",     "her",     "here",
      "hers",    "him",     "his",    "how",    "however", "i",      "if",      "in",
      "into",    "is",      "it",     "its",    "itself",  "may",    "might",   "more",
      "most",    "much",    "must",   "my",     "no",      "nor",    "not",     "of",
      "off",     "on",      "once",   "only",   "or",      "other",  "our",     "ours",
      "out",     "over",    "own",    "same",   "shall",   "she",    "should",  "so",
      "some",    "such",    "than",   "that",   "the",     "their",  "theirs",  "them",
      "then",    "there",   "these",  "they",   "this",    "those",  "through", "thus",
      "to",      "too",     "toward", "towards", "under",  "until",  "up",      "upon",
      "us",      "using",   "very",   "via",    "was",     "we",     "were",    "what",
      "when",    "where",   "which",  "while",  "who",     "whom",   "why",     "will",
      "with",    "within",  "without", "would", "you",     "your",   "yours",   "based",
      "new",     "study",   "paper",  "approach", "towards",
  };
  return kWords;
}

inline bool is_stopword(std::string_view w) { return stopwords().count(std::string(w)) > 0; }

// 64-bit FNV-1a. Used for stable ids and cache keys, not for security.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 14695981039346656037ull) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return out;
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// CSV (RFC 4180)

inline std::string csv_escape(std::string_view field) {
  bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(fields[i]);
  }
  out += '\n';
  return out;
}

struct CsvRow {
  std::size_t line = 0;  // 1-based physical line where the row starts
  std::vector<std::string> fields;
};

// Parses a whole CSV document. Quoted fields may span lines; a UTF-8 BOM is
// skipped. Throws FormatError on an unterminated quote.
inline std::vector<CsvRow> parse_csv(std::string_view doc, char delim = ',') {
  if (doc.size() >= 3 && static_cast<unsigned char>(doc[0]) == 0xEF &&
      static_cast<unsigned char>(doc[1]) == 0xBB && static_cast<unsigned char>(doc[2]) == 0xBF) {
    doc.remove_prefix(3);
  }
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  std::size_t line = 1;
  row.line = 1;
  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    if (row_has_content || row.fields.size() > 1 || !row.fields.front().empty()) {
      rows.push_back(std::move(row));
    }
    row = CsvRow{};
    row_has_content = false;
  };
  for (std::size_t i = 0; i < doc.size(); ++i) {
    char c = doc[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < doc.size() && doc[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
      row_has_content = true;
    } else if (c == delim) {
      end_field();
      row_has_content = true;
    } else if (c == '\r') {
      // swallowed; the following '\n' ends the row
    } else if (c == '\n') {
      end_row();
      ++line;
      row.line = line;
    } else {
      field += c;
    }
  }
  if (in_quotes) throw FormatError("unterminated quoted CSV field starting near line " + std::to_string(row.line));
  if (!field.empty() || !row.fields.empty() || row_has_content) end_row();
  return rows;
}

}  // namespace bibliograph::text
