#pragma once

// Bibliographic records: parsing of export dialects, DOI normalization,
// cross-source merge/deduplication and cohort filtering.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "bibliograph/errors.hpp"
#include "bibliograph/text.hpp"

namespace bibliograph {

using json = nlohmann::json;

enum class VenueType { journal, conference, unknown };
enum class DocType { article, proceedings_paper, other };
enum class SourceDb { scopus_like, wos_like };
enum class Dialect { scopus_like_csv, wos_like_csv, jsonl };

inline std::string to_string(VenueType v) {
  switch (v) {
    case VenueType::journal: return "journal";
    case VenueType::conference: return "conference";
    case VenueType::unknown: break;
  }
  return "unknown";
}

inline std::string to_string(DocType d) {
  switch (d) {
    case DocType::article: return "article";
    case DocType::proceedings_paper: return "proceedings-paper";
    case DocType::other: break;
  }
  return "other";
}

inline std::string to_string(SourceDb s) {
  return s == SourceDb::scopus_like ? "scopus-like" : "wos-like";
}

inline std::string to_string(Dialect d) {
  switch (d) {
    case Dialect::scopus_like_csv: return "scopus-like-csv";
    case Dialect::wos_like_csv: return "wos-like-csv";
    case Dialect::jsonl: break;
  }
  return "jsonl";
}

inline VenueType parse_venue_type(std::string_view s) {
  auto f = text::casefold(text::trim(s));
  if (f == "journal") return VenueType::journal;
  if (f == "conference" || f == "conference proceeding" || f == "conference proceedings") {
    return VenueType::conference;
  }
  return VenueType::unknown;
}

inline DocType parse_doc_type(std::string_view s) {
  auto f = text::casefold(text::trim(s));
  // WoS writes "Article; Proceedings Paper" for proceedings in journals; the
  // leading type wins.
  if (auto semi = f.find(';'); semi != std::string::npos) f = std::string(text::trim(f.substr(0, semi)));
  if (f == "article") return DocType::article;
  if (f == "proceedings-paper" || f == "proceedings paper" || f == "conference paper") {
    return DocType::proceedings_paper;
  }
  return DocType::other;
}

inline std::optional<SourceDb> parse_source_db(std::string_view s) {
  auto f = text::casefold(text::trim(s));
  if (f == "scopus-like" || f == "scopus") return SourceDb::scopus_like;
  if (f == "wos-like" || f == "wos") return SourceDb::wos_like;
  return std::nullopt;
}

inline Dialect parse_dialect(std::string_view s) {
  if (s == "scopus-like-csv") return Dialect::scopus_like_csv;
  if (s == "wos-like-csv") return Dialect::wos_like_csv;
  if (s == "jsonl") return Dialect::jsonl;
  throw ConfigError("unknown dialect '" + std::string(s) + "'");
}

struct FosTag {
  std::string tag;
  int level = 0;

  bool operator==(const FosTag&) const = default;
};

struct BibRecord {
  std::string record_id;
  std::optional<std::string> doi;
  std::string title;
  std::optional<std::string> abstract;
  std::vector<std::string> author_keywords;
  std::optional<int> year;
  std::string venue;
  VenueType venue_type = VenueType::unknown;
  DocType doc_type = DocType::other;
  std::vector<std::string> authors;
  std::vector<std::string> affiliations;
  std::vector<std::string> countries;
  std::vector<FosTag> fos_tags;
  std::set<SourceDb> source_dbs;

  bool operator==(const BibRecord&) const = default;
};

using Corpus = std::vector<BibRecord>;

inline int max_valid_year() {
  using namespace std::chrono;
  auto today = year_month_day{floor<days>(system_clock::now())};
  return static_cast<int>(today.year()) + 1;
}

inline bool valid_year(int y) { return y >= 1900 && y <= max_valid_year(); }

// ---------------------------------------------------------------------------
// DOI normalization

inline std::optional<std::string> normalize_doi(std::string_view raw) {
  static const std::regex kShape(R"(^10\.[0-9]+/\S+$)");
  static constexpr std::string_view kPrefixes[] = {
      "https://doi.org/", "http://doi.org/",  "https://dx.doi.org/", "http://dx.doi.org/",
      "doi.org/",         "dx.doi.org/",      "doi:",
  };
  std::string s = text::casefold(text::trim(raw));
  bool stripped = true;
  while (stripped) {
    stripped = false;
    for (auto p : kPrefixes) {
      if (s.rfind(p, 0) == 0) {
        s = std::string(text::trim(std::string_view(s).substr(p.size())));
        stripped = true;
      }
    }
  }
  if (s.empty() || !std::regex_match(s, kShape)) return std::nullopt;
  return s;
}

// Key used for deduplication: the DOI when present, otherwise the casefolded
// title plus year.
inline std::string dedup_key(const BibRecord& r) {
  if (r.doi) return "doi:" + *r.doi;
  return "ty:" + text::casefold(text::trim(r.title)) + "|" + (r.year ? std::to_string(*r.year) : "?");
}

inline std::string make_record_id(const BibRecord& r) { return "r" + text::hex64(text::fnv1a64(dedup_key(r))); }

// ---------------------------------------------------------------------------
// JSON form (the jsonl dialect and the canonical corpus file)

inline json record_to_json(const BibRecord& r, bool with_id = true) {
  json j;
  if (with_id) j["record_id"] = r.record_id;
  j["doi"] = r.doi ? json(*r.doi) : json(nullptr);
  j["title"] = r.title;
  j["abstract"] = r.abstract ? json(*r.abstract) : json(nullptr);
  j["keywords"] = r.author_keywords;
  j["year"] = r.year ? json(*r.year) : json(nullptr);
  j["venue"] = r.venue;
  j["venue_type"] = to_string(r.venue_type);
  j["doc_type"] = to_string(r.doc_type);
  j["authors"] = r.authors;
  j["affiliations"] = r.affiliations;
  j["countries"] = r.countries;
  json fos = json::array();
  for (const auto& t : r.fos_tags) fos.push_back({{"tag", t.tag}, {"level", t.level}});
  j["fos"] = std::move(fos);
  json src = json::array();
  for (auto s : r.source_dbs) src.push_back(to_string(s));
  j["source"] = std::move(src);
  return j;
}

namespace detail {

inline std::vector<std::string> string_list(const json& j, const char* key) {
  std::vector<std::string> out;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return out;
  if (it->is_string()) return text::split_list(it->get<std::string>(), ';');
  if (!it->is_array()) throw FormatError(std::string("'") + key + "' must be a list");
  for (const auto& v : *it) {
    if (!v.is_string()) throw FormatError(std::string("'") + key + "' entries must be strings");
    auto t = text::trim(v.get_ref<const std::string&>());
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline std::optional<std::string> opt_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw FormatError(std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

inline std::optional<int> parse_year_field(const json& v) {
  if (v.is_null()) return std::nullopt;
  int y = 0;
  if (v.is_number_integer()) {
    y = v.get<int>();
  } else if (v.is_string()) {
    auto s = text::trim(v.get_ref<const std::string&>());
    if (s.empty()) return std::nullopt;
    y = static_cast<int>(text::parse_double(s));
  } else {
    throw FormatError("'year' must be an integer");
  }
  if (!valid_year(y)) throw FormatError("year " + std::to_string(y) + " out of range");
  return y;
}

}  // namespace detail

// Throws FormatError describing why the object is not a usable record.
inline BibRecord record_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("row is not a JSON object");
  BibRecord r;
  auto title = detail::opt_string(j, "title");
  if (!title || text::trim(*title).empty()) throw FormatError("missing title");
  r.title = std::string(text::trim(*title));
  if (auto d = detail::opt_string(j, "doi")) r.doi = normalize_doi(*d);
  r.abstract = detail::opt_string(j, "abstract");
  if (r.abstract && text::trim(*r.abstract).empty()) r.abstract.reset();
  r.author_keywords = detail::string_list(j, "keywords");
  if (auto it = j.find("year"); it != j.end()) r.year = detail::parse_year_field(*it);
  r.venue = detail::opt_string(j, "venue").value_or("");
  r.venue_type = parse_venue_type(detail::opt_string(j, "venue_type").value_or(""));
  r.doc_type = parse_doc_type(detail::opt_string(j, "doc_type").value_or(""));
  r.authors = detail::string_list(j, "authors");
  r.affiliations = detail::string_list(j, "affiliations");
  r.countries = detail::string_list(j, "countries");
  if (auto it = j.find("fos"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw FormatError("'fos' must be a list");
    for (const auto& f : *it) {
      if (!f.is_object() || !f.contains("tag") || !f["tag"].is_string()) {
        throw FormatError("'fos' entries need a string 'tag'");
      }
      FosTag t{f["tag"].get<std::string>(), 0};
      if (f.contains("level") && f["level"].is_number()) t.level = f["level"].get<int>();
      r.fos_tags.push_back(std::move(t));
    }
  }
  if (auto it = j.find("source"); it != j.end() && !it->is_null()) {
    std::vector<std::string> names;
    if (it->is_string()) names.push_back(it->get<std::string>());
    else names = detail::string_list(j, "source");
    for (const auto& n : names) {
      auto s = parse_source_db(n);
      if (!s) throw FormatError("unknown source '" + n + "'");
      r.source_dbs.insert(*s);
    }
  }
  if (r.source_dbs.empty()) throw FormatError("missing source");
  r.record_id = make_record_id(r);
  return r;
}

inline std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

// Column mapping for a CSV export. Field names: doi, title, abstract,
// keywords, year, venue, venue_type, doc_type, authors, affiliations,
// countries. Unmapped fields stay empty; unknown columns are ignored.
struct CsvMapping {
  std::map<std::string, std::string> columns;
  char delimiter = ',';
  char list_separator = ';';
  SourceDb source = SourceDb::scopus_like;
};

inline CsvMapping default_mapping(Dialect dialect) {
  CsvMapping m;
  switch (dialect) {
    case Dialect::scopus_like_csv:
      m.source = SourceDb::scopus_like;
      m.columns = {{"doi", "DOI"},           {"title", "Title"},
                   {"abstract", "Abstract"}, {"keywords", "Author Keywords"},
                   {"year", "Year"},         {"venue", "Source title"},
                   {"doc_type", "Document Type"}, {"authors", "Authors"},
                   {"affiliations", "Affiliations"}};
      break;
    case Dialect::wos_like_csv:
      m.source = SourceDb::wos_like;
      m.columns = {{"doi", "DI"},   {"title", "TI"},    {"abstract", "AB"},
                   {"keywords", "DE"}, {"year", "PY"},  {"venue", "SO"},
                   {"doc_type", "DT"}, {"authors", "AU"}, {"affiliations", "C3"}};
      break;
    case Dialect::jsonl:
      throw ConfigError("the jsonl dialect has no column mapping");
  }
  return m;
}

// Overrides from config: {"columns": {...}, "delimiter": ",", "list_separator": ";"}.
inline CsvMapping mapping_from_json(Dialect dialect, const json& j) {
  CsvMapping m = default_mapping(dialect);
  if (!j.is_object()) throw ConfigError("CSV mapping must be an object");
  if (auto it = j.find("columns"); it != j.end()) {
    for (auto& [field, col] : it->items()) {
      if (!col.is_string()) throw ConfigError("CSV column name for '" + field + "' must be a string");
      m.columns[field] = col.get<std::string>();
    }
  }
  auto single_char = [](const json& v, const char* what) {
    if (!v.is_string() || v.get<std::string>().size() != 1) {
      throw ConfigError(std::string(what) + " must be a single character");
    }
    return v.get<std::string>()[0];
  };
  if (auto it = j.find("delimiter"); it != j.end()) m.delimiter = single_char(*it, "delimiter");
  if (auto it = j.find("list_separator"); it != j.end()) m.list_separator = single_char(*it, "list_separator");
  return m;
}

struct SkippedRow {
  std::size_t line = 0;
  std::string reason;
};

struct ParseResult {
  std::vector<BibRecord> records;
  std::vector<SkippedRow> skipped;
  std::size_t data_rows = 0;
};

inline json skip_report_to_json(const ParseResult& r) {
  json skipped = json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"line", s.line}, {"reason", s.reason}});
  return {{"data_rows", r.data_rows}, {"parsed", r.records.size()}, {"skipped", std::move(skipped)}};
}

namespace detail {

inline void check_skip_ratio(const ParseResult& r, const std::string& origin) {
  if (r.skipped.size() * 2 > r.data_rows) {
    throw FormatError(origin + ": " + std::to_string(r.skipped.size()) + " of " + std::to_string(r.data_rows) +
                      " rows unparseable");
  }
}

inline ParseResult parse_jsonl(std::string_view content) {
  ParseResult out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    auto line = text::trim(content.substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty()) continue;
    ++out.data_rows;
    try {
      out.records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      out.skipped.push_back({line_no, std::string("invalid JSON: ") + e.what()});
    } catch (const FormatError& e) {
      out.skipped.push_back({line_no, e.what()});
    }
  }
  return out;
}

inline ParseResult parse_csv_records(std::string_view content, const CsvMapping& mapping) {
  ParseResult out;
  auto rows = text::parse_csv(content, mapping.delimiter);
  if (rows.empty()) return out;
  const auto& header = rows.front().fields;
  std::unordered_map<std::string, std::size_t> col_index;
  for (std::size_t i = 0; i < header.size(); ++i) col_index.emplace(std::string(text::trim(header[i])), i);
  auto column_of = [&](const std::string& field) -> std::optional<std::size_t> {
    auto m = mapping.columns.find(field);
    if (m == mapping.columns.end()) return std::nullopt;
    auto c = col_index.find(m->second);
    if (c == col_index.end()) return std::nullopt;
    return c->second;
  };
  std::map<std::string, std::optional<std::size_t>> cols;
  for (const char* f : {"doi", "title", "abstract", "keywords", "year", "venue", "venue_type", "doc_type", "authors",
                        "affiliations", "countries"}) {
    cols[f] = column_of(f);
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    ++out.data_rows;
    if (row.fields.size() != header.size()) {
      out.skipped.push_back({row.line, "expected " + std::to_string(header.size()) + " fields, found " +
                                           std::to_string(row.fields.size())});
      continue;
    }
    auto get = [&](const char* f) -> std::string {
      auto c = cols[f];
      return c ? std::string(text::trim(row.fields[*c])) : std::string();
    };
    auto list = [&](const char* f) { return text::split_list(get(f), mapping.list_separator); };
    BibRecord rec;
    rec.title = get("title");
    if (rec.title.empty()) {
      out.skipped.push_back({row.line, "missing title"});
      continue;
    }
    rec.doi = normalize_doi(get("doi"));
    if (auto a = get("abstract"); !a.empty()) rec.abstract = a;
    rec.author_keywords = list("keywords");
    if (auto y = get("year"); !y.empty()) {
      try {
        int year = static_cast<int>(text::parse_double(y));
        if (!valid_year(year)) throw FormatError("year " + y + " out of range");
        rec.year = year;
      } catch (const FormatError& e) {
        out.skipped.push_back({row.line, e.what()});
        continue;
      }
    }
    rec.venue = get("venue");
    rec.doc_type = parse_doc_type(get("doc_type"));
    rec.venue_type = parse_venue_type(get("venue_type"));
    if (rec.venue_type == VenueType::unknown) {
      if (rec.doc_type == DocType::article) rec.venue_type = VenueType::journal;
      if (rec.doc_type == DocType::proceedings_paper) rec.venue_type = VenueType::conference;
    }
    rec.authors = list("authors");
    rec.affiliations = list("affiliations");
    rec.countries = list("countries");
    rec.source_dbs.insert(mapping.source);
    rec.record_id = make_record_id(rec);
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace detail

// Parses in-memory content. Unparseable rows are collected in `skipped`;
// more than half of the rows failing is a FormatError.
inline ParseResult parse_records_text(std::string_view content, Dialect dialect,
                                      const std::optional<CsvMapping>& mapping = std::nullopt,
                                      const std::string& origin = "<memory>") {
  ParseResult out = dialect == Dialect::jsonl
                        ? detail::parse_jsonl(content)
                        : detail::parse_csv_records(content, mapping.value_or(default_mapping(dialect)));
  detail::check_skip_ratio(out, origin);
  return out;
}

inline ParseResult parse_records(const std::filesystem::path& path, Dialect dialect,
                                 const std::optional<CsvMapping>& mapping = std::nullopt) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("no such file: " + path.string());
  return parse_records_text(text::read_file(path), dialect, mapping, path.string());
}

inline ParseResult parse_records(const std::filesystem::path& path, std::string_view dialect) {
  return parse_records(path, parse_dialect(dialect));
}

// ---------------------------------------------------------------------------
// Merge and deduplication

struct YearConflict {
  std::string record_id;
  std::string key;
  int kept = 0;
  std::vector<int> seen;
};

struct IngestReport {
  std::map<std::string, std::size_t> raw_counts;
  std::size_t merged_count = 0;
  std::size_t duplicate_pairs = 0;
  std::size_t missing_doi = 0;
  std::vector<YearConflict> year_conflicts;
};

inline json ingest_report_to_json(const IngestReport& r) {
  json conflicts = json::array();
  for (const auto& c : r.year_conflicts) {
    conflicts.push_back({{"record_id", c.record_id}, {"key", c.key}, {"kept", c.kept}, {"seen", c.seen}});
  }
  return {{"raw_counts", r.raw_counts},
          {"merged_count", r.merged_count},
          {"duplicate_pairs", r.duplicate_pairs},
          {"missing_doi", r.missing_doi},
          {"year_conflicts", std::move(conflicts)}};
}

struct MergeResult {
  Corpus corpus;
  IngestReport report;
};

namespace detail {

template <class T, class KeyFn>
void union_into(std::vector<T>& dst, const std::vector<T>& src, KeyFn key) {
  std::unordered_set<std::string> seen;
  for (const auto& v : dst) seen.insert(key(v));
  for (const auto& v : src) {
    if (seen.insert(key(v)).second) dst.push_back(v);
  }
}

// Members are visited in a canonical order (sorted by their JSON form) so
// the merged record does not depend on batch order.
inline BibRecord merge_group(std::vector<const BibRecord*> group, IngestReport& report) {
  std::vector<std::pair<std::string, const BibRecord*>> keyed;
  keyed.reserve(group.size());
  for (const auto* r : group) keyed.emplace_back(record_to_json(*r, false).dump(), r);
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  BibRecord out = *keyed.front().second;
  std::set<int> years;
  if (out.year) years.insert(*out.year);
  auto exact = [](const std::string& s) { return s; };
  for (std::size_t i = 1; i < keyed.size(); ++i) {
    const BibRecord& r = *keyed[i].second;
    if (out.title.empty()) out.title = r.title;
    if (r.abstract && (!out.abstract || r.abstract->size() > out.abstract->size())) out.abstract = r.abstract;
    if (r.year) years.insert(*r.year);
    if (out.venue.empty()) out.venue = r.venue;
    if (out.venue_type == VenueType::unknown) out.venue_type = r.venue_type;
    if (out.doc_type == DocType::other) out.doc_type = r.doc_type;
    union_into(out.author_keywords, r.author_keywords, [](const std::string& s) { return text::casefold(s); });
    union_into(out.authors, r.authors, exact);
    union_into(out.affiliations, r.affiliations, exact);
    union_into(out.countries, r.countries, exact);
    union_into(out.fos_tags, r.fos_tags, [](const FosTag& t) { return text::casefold(t.tag); });
    out.source_dbs.insert(r.source_dbs.begin(), r.source_dbs.end());
  }
  if (!years.empty()) out.year = *years.begin();
  out.record_id = make_record_id(out);
  if (years.size() > 1) {
    report.year_conflicts.push_back({out.record_id, dedup_key(out), *years.begin(), {years.begin(), years.end()}});
  }
  return out;
}

}  // namespace detail

// Folds the batches into one corpus keyed by normalized DOI, falling back to
// (casefolded title, year) when a record has no DOI. Output order is the
// order of first appearance.
inline MergeResult merge_dedup(const std::vector<std::vector<BibRecord>>& batches) {
  MergeResult out;
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const BibRecord*>> groups;
  for (const auto& batch : batches) {
    for (const auto& r : batch) {
      auto src = r.source_dbs.empty() ? std::string("unknown") : to_string(*r.source_dbs.begin());
      ++out.report.raw_counts[src];
      auto key = dedup_key(r);
      auto [it, inserted] = groups.try_emplace(key);
      if (inserted) order.push_back(key);
      it->second.push_back(&r);
    }
  }
  out.corpus.reserve(order.size());
  for (const auto& key : order) {
    auto& group = groups[key];
    if (group.size() == 1) {
      BibRecord r = *group.front();
      r.record_id = make_record_id(r);
      out.corpus.push_back(std::move(r));
    } else {
      out.report.duplicate_pairs += group.size() - 1;
      out.corpus.push_back(detail::merge_group(group, out.report));
    }
  }
  out.report.merged_count = out.corpus.size();
  out.report.missing_doi = static_cast<std::size_t>(
      std::count_if(out.corpus.begin(), out.corpus.end(), [](const BibRecord& r) { return !r.doi; }));
  return out;
}

// ---------------------------------------------------------------------------
// Cohorts and search strings

inline Corpus filter_core_cohort(const Corpus& corpus, const std::vector<std::string>& phrases) {
  if (phrases.empty()) throw ContractError("filter_core_cohort needs at least one phrase");
  Corpus out;
  for (const auto& r : corpus) {
    bool hit = false;
    for (const auto& p : phrases) {
      if (text::contains_folded(r.title, p) || (r.abstract && text::contains_folded(*r.abstract, p)) ||
          std::any_of(r.author_keywords.begin(), r.author_keywords.end(),
                      [&](const std::string& k) { return text::contains_folded(k, p); })) {
        hit = true;
        break;
      }
    }
    if (hit) out.push_back(r);
  }
  return out;
}

inline std::vector<std::string> default_cohort_phrases() {
  return {"responsible artificial intelligence", "responsible ai"};
}

inline std::vector<std::string> default_search_stems() {
  return {"responsib*", "accountab*", "explainab*", "transparan*", "fair*",    "intelligib*", "bias",
          "discriminat*", "reliab*", "safety",      "privacy",     "security", "inclusive*",  "accessib*"};
}

inline std::string build_search_query(const std::vector<std::string>& stems = default_search_stems()) {
  if (stems.empty()) throw ContractError("build_search_query needs at least one stem");
  std::string out;
  for (std::size_t i = 0; i < stems.size(); ++i) {
    if (i) out += " OR ";
    out += stems[i];
  }
  return out;
}

}  // namespace bibliograph
