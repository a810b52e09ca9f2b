#pragma once

// Descriptive portraits: entity rankings, publication trends, principle
// tagging, principle x technique interplay and cohort keyphrases.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bibliograph/corpus.hpp"
#include "bibliograph/errors.hpp"
#include "bibliograph/text.hpp"

namespace bibliograph::portraits {

// ---------------------------------------------------------------------------
// Principle lexicon

struct Principle {
  std::string name;
  std::vector<std::string> stems;  // lower case, matched at word start
};

class PrincipleLexicon {
 public:
  explicit PrincipleLexicon(std::vector<Principle> principles) : principles_(std::move(principles)) {
    std::set<std::string> names;
    for (auto& p : principles_) {
      if (p.name.empty()) throw ConfigError("principle with empty name");
      if (!names.insert(p.name).second) throw ConfigError("duplicate principle '" + p.name + "'");
      std::erase_if(p.stems, [](const std::string& s) { return text::trim(s).empty(); });
      if (p.stems.empty()) throw ConfigError("principle '" + p.name + "' has no stems");
      for (auto& s : p.stems) s = text::casefold(text::trim(s));
    }
  }

  static PrincipleLexicon defaults() {
    return PrincipleLexicon({
        {"accountability", {"accountab"}},
        {"explainability", {"explainab"}},
        {"transparency", {"transparan", "transparen"}},
        {"fairness", {"fair"}},
        {"intelligibility", {"intelligib"}},
        {"unbiased", {"unbias", "bias"}},
        {"non-discrimination", {"discriminat"}},
        {"reliability", {"reliab"}},
        {"safety", {"safety"}},
        {"privacy", {"privacy"}},
        {"security", {"security"}},
        {"inclusiveness", {"inclusive"}},
        {"accessibility", {"accessib"}},
    });
  }

  const std::vector<Principle>& principles() const { return principles_; }
  std::size_t size() const { return principles_.size(); }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& p : principles_) out.push_back(p.name);
    return out;
  }

 private:
  std::vector<Principle> principles_;
};

inline json lexicon_to_json(const PrincipleLexicon& lex) {
  json out = json::array();
  for (const auto& p : lex.principles()) out.push_back({{"name", p.name}, {"stems", p.stems}});
  return out;
}

inline PrincipleLexicon lexicon_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("principle lexicon must be an array");
  std::vector<Principle> ps;
  try {
    for (const auto& e : j) ps.push_back({e.at("name").get<std::string>(), e.at("stems").get<std::vector<std::string>>()});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed principle lexicon: ") + e.what());
  }
  return PrincipleLexicon(std::move(ps));
}

// Principles whose stems start any word of the title or a keyword (and the
// abstract when asked), in lexicon order.
inline std::vector<std::string> tag_principles(const BibRecord& r, const PrincipleLexicon& lex,
                                               bool include_abstract = false) {
  std::vector<std::string> tokens = text::words(r.title);
  for (const auto& k : r.author_keywords) {
    auto w = text::words(k);
    tokens.insert(tokens.end(), w.begin(), w.end());
  }
  if (include_abstract && r.abstract) {
    auto w = text::words(*r.abstract);
    tokens.insert(tokens.end(), w.begin(), w.end());
  }
  std::vector<std::string> out;
  for (const auto& p : lex.principles()) {
    bool hit = std::any_of(p.stems.begin(), p.stems.end(), [&](const std::string& stem) {
      return std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) { return t.starts_with(stem); });
    });
    if (hit) out.push_back(p.name);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rankings and trends

enum class EntityKind { country, institution, venue, author, fos };

inline std::string to_string(EntityKind k) {
  switch (k) {
    case EntityKind::country: return "country";
    case EntityKind::institution: return "institution";
    case EntityKind::venue: return "venue";
    case EntityKind::author: return "author";
    case EntityKind::fos: return "fos";
  }
  return "fos";
}

inline EntityKind parse_entity_kind(std::string_view s) {
  if (s == "country") return EntityKind::country;
  if (s == "institution") return EntityKind::institution;
  if (s == "venue") return EntityKind::venue;
  if (s == "author") return EntityKind::author;
  if (s == "fos") return EntityKind::fos;
  throw ConfigError("unknown entity kind '" + std::string(s) + "'");
}

// Distinct entity names of a record (a record counts once per entity).
inline std::vector<std::string> entity_names(const BibRecord& r, EntityKind kind) {
  std::vector<std::string> raw;
  switch (kind) {
    case EntityKind::country: raw = r.countries; break;
    case EntityKind::institution: raw = r.affiliations; break;
    case EntityKind::author: raw = r.authors; break;
    case EntityKind::venue: raw = {r.venue}; break;
    case EntityKind::fos:
      for (const auto& f : r.fos_tags) raw.push_back(f.tag);
      break;
  }
  std::vector<std::string> out;
  for (const auto& s : raw) {
    auto t = std::string(text::trim(s));
    if (!t.empty()) out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct RankRow {
  std::string name;
  std::size_t count = 0;
  double share = 0.0;  // count over all entity incidences

  bool operator==(const RankRow&) const = default;
};

struct RankTable {
  EntityKind kind = EntityKind::fos;
  std::vector<RankRow> rows;  // count descending, name ascending
  std::size_t incidences = 0;  // sum over documents of distinct entities
  double top_share = 0.0;      // share covered by the listed rows
};

// Full counting. top_n = nullopt lists every entity.
inline RankTable rank_entities(const Corpus& corpus, EntityKind kind, std::optional<std::size_t> top_n = 10) {
  std::map<std::string, std::size_t> counts;
  RankTable t;
  t.kind = kind;
  for (const auto& r : corpus) {
    for (auto& n : entity_names(r, kind)) {
      ++counts[n];
      ++t.incidences;
    }
  }
  for (auto& [name, c] : counts) t.rows.push_back({name, c, 0.0});
  std::stable_sort(t.rows.begin(), t.rows.end(), [](const RankRow& a, const RankRow& b) { return a.count > b.count; });
  if (top_n && t.rows.size() > *top_n) t.rows.resize(*top_n);
  std::size_t listed = 0;
  for (auto& row : t.rows) {
    row.share = static_cast<double>(row.count) / static_cast<double>(t.incidences);
    listed += row.count;
  }
  if (t.incidences > 0) t.top_share = static_cast<double>(listed) / static_cast<double>(t.incidences);
  return t;
}

// The trailing "total" row carries the listed share; report files written
// per table omit it and record the share in the run summary instead.
inline std::string rank_table_to_csv(const RankTable& t, bool total_row = true) {
  std::string out = text::csv_line({"rank", "name", "count", "share"});
  std::size_t listed = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    listed += r.count;
    out += text::csv_line({std::to_string(i + 1), r.name, std::to_string(r.count), text::format_double(r.share)});
  }
  if (total_row) out += text::csv_line({"", "total", std::to_string(listed), text::format_double(t.top_share)});
  return out;
}

struct TrendPoint {
  int year = 0;
  std::size_t count = 0;

  bool operator==(const TrendPoint&) const = default;
};

// Records per year, zero-filled between the first and last year present.
inline std::vector<TrendPoint> publication_trend(const Corpus& corpus) {
  std::map<int, std::size_t> by_year;
  for (const auto& r : corpus) {
    if (r.year) ++by_year[*r.year];
  }
  std::vector<TrendPoint> out;
  if (by_year.empty()) return out;
  for (int y = by_year.begin()->first; y <= by_year.rbegin()->first; ++y) {
    auto it = by_year.find(y);
    out.push_back({y, it == by_year.end() ? 0 : it->second});
  }
  return out;
}

inline std::string trend_to_csv(const std::vector<TrendPoint>& series) {
  std::string out = text::csv_line({"year", "count"});
  for (const auto& p : series) out += text::csv_line({std::to_string(p.year), std::to_string(p.count)});
  return out;
}

// ---------------------------------------------------------------------------
// Interplay

struct InterplayMatrix {
  std::vector<std::string> principles;  // rows
  std::vector<std::string> techniques;  // columns
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::vector<double>> row_shares;  // each row sums to 1, or is all zero
  std::size_t documents = 0;
};

// Level-1 FoS tags present in the corpus, one spelling per case-folded tag
// (first seen), ordered by folded form.
inline std::vector<std::string> default_techniques(const Corpus& corpus) {
  std::map<std::string, std::string> seen;
  for (const auto& r : corpus) {
    for (const auto& f : r.fos_tags) {
      auto tag = std::string(text::trim(f.tag));
      if (f.level == 1 && !tag.empty()) seen.emplace(text::casefold(tag), tag);
    }
  }
  std::vector<std::string> out;
  for (auto& [k, v] : seen) out.push_back(v);
  return out;
}

inline InterplayMatrix build_interplay(const Corpus& corpus, const PrincipleLexicon& lex,
                                       const std::vector<std::string>& techniques, bool include_abstract = false) {
  if (techniques.empty()) throw ContractError("build_interplay needs at least one technique tag");
  InterplayMatrix m;
  m.principles = lex.names();
  m.techniques = techniques;
  m.documents = corpus.size();
  m.counts.assign(m.principles.size(), std::vector<std::size_t>(techniques.size(), 0));
  std::map<std::string, std::size_t> principle_index;
  for (std::size_t i = 0; i < m.principles.size(); ++i) principle_index[m.principles[i]] = i;
  std::map<std::string, std::vector<std::size_t>> technique_index;
  for (std::size_t j = 0; j < techniques.size(); ++j) technique_index[text::casefold(text::trim(techniques[j]))].push_back(j);

  for (const auto& r : corpus) {
    auto tagged = tag_principles(r, lex, include_abstract);
    if (tagged.empty()) continue;
    std::set<std::size_t> cols;
    for (const auto& f : r.fos_tags) {
      auto it = technique_index.find(text::casefold(text::trim(f.tag)));
      if (it != technique_index.end()) cols.insert(it->second.begin(), it->second.end());
    }
    for (const auto& p : tagged) {
      for (auto j : cols) ++m.counts[principle_index.at(p)][j];
    }
  }
  for (const auto& row : m.counts) {
    std::size_t total = 0;
    for (auto c : row) total += c;
    std::vector<double> shares(row.size(), 0.0);
    if (total > 0) {
      for (std::size_t j = 0; j < row.size(); ++j) shares[j] = static_cast<double>(row[j]) / static_cast<double>(total);
    }
    m.row_shares.push_back(std::move(shares));
  }
  return m;
}

inline std::string interplay_counts_to_csv(const InterplayMatrix& m) {
  std::vector<std::string> header{"principle"};
  header.insert(header.end(), m.techniques.begin(), m.techniques.end());
  std::string out = text::csv_line(header);
  for (std::size_t i = 0; i < m.principles.size(); ++i) {
    std::vector<std::string> row{m.principles[i]};
    for (auto c : m.counts[i]) row.push_back(std::to_string(c));
    out += text::csv_line(row);
  }
  return out;
}

inline std::string interplay_shares_to_csv(const InterplayMatrix& m) {
  std::vector<std::string> header{"principle"};
  header.insert(header.end(), m.techniques.begin(), m.techniques.end());
  std::string out = text::csv_line(header);
  for (std::size_t i = 0; i < m.principles.size(); ++i) {
    std::vector<std::string> row{m.principles[i]};
    for (auto s : m.row_shares[i]) row.push_back(text::format_double(s));
    out += text::csv_line(row);
  }
  return out;
}

// Link table for circular plots: one row per non-zero cell.
inline std::string chord_table_to_csv(const InterplayMatrix& m) {
  std::string out = text::csv_line({"source", "target", "value"});
  for (std::size_t i = 0; i < m.principles.size(); ++i) {
    for (std::size_t j = 0; j < m.techniques.size(); ++j) {
      if (m.counts[i][j] > 0) out += text::csv_line({m.principles[i], m.techniques[j], std::to_string(m.counts[i][j])});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Keyphrases

struct CandidateSet {
  std::vector<std::string> terms;  // sorted
  std::vector<std::size_t> df;
  std::vector<std::map<std::size_t, std::size_t>> doc_counts;  // per document: term index -> occurrences
  std::vector<std::string> documents;                         // title and abstract text
};

namespace detail {

inline bool is_boundary(const std::string& tok) {
  return tok.empty() || tok.size() < 2 || text::is_stopword(tok) ||
         std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// 1-3 token windows that cross no punctuation break and no stopword.
inline std::vector<std::string> ngrams(std::string_view s) {
  std::vector<std::string> out;
  std::vector<std::string> segment;
  auto flush = [&] {
    for (std::size_t i = 0; i < segment.size(); ++i) {
      std::string g;
      for (std::size_t n = 0; n < 3 && i + n < segment.size(); ++n) {
        if (n) g += ' ';
        g += segment[i + n];
        out.push_back(g);
      }
    }
    segment.clear();
  };
  for (auto& tok : text::words_with_breaks(s)) {
    if (is_boundary(tok)) {
      flush();
    } else {
      segment.push_back(std::move(tok));
    }
  }
  flush();
  return out;
}

}  // namespace detail

// Candidates must occur in at least min(2, cohort size) documents.
inline CandidateSet candidate_set(const Corpus& cohort) {
  if (cohort.empty()) throw ContractError("keyphrase extraction needs a non-empty cohort");
  const std::size_t min_df = std::min<std::size_t>(2, cohort.size());
  std::vector<std::map<std::string, std::size_t>> per_doc;
  std::map<std::string, std::size_t> df;
  CandidateSet cs;
  for (const auto& r : cohort) {
    std::map<std::string, std::size_t> counts;
    for (auto& g : detail::ngrams(r.title)) ++counts[g];
    if (r.abstract) {
      for (auto& g : detail::ngrams(*r.abstract)) ++counts[g];
    }
    for (auto& [g, c] : counts) ++df[g];
    per_doc.push_back(std::move(counts));
    cs.documents.push_back(r.abstract ? r.title + ". " + *r.abstract : r.title);
  }
  std::map<std::string, std::size_t> index;
  for (auto& [g, d] : df) {
    if (d < min_df) continue;
    index.emplace(g, cs.terms.size());
    cs.terms.push_back(g);
    cs.df.push_back(d);
  }
  for (const auto& counts : per_doc) {
    std::map<std::size_t, std::size_t> m;
    for (const auto& [g, c] : counts) {
      auto it = index.find(g);
      if (it != index.end()) m.emplace(it->second, c);
    }
    cs.doc_counts.push_back(std::move(m));
  }
  return cs;
}

using KeyphraseScorer = std::function<std::vector<double>(const CandidateSet&)>;

// Sum over documents of tf * (ln((1 + N) / (1 + df)) + 1).
inline std::vector<double> tfidf_sum_scores(const CandidateSet& cs) {
  const double n = static_cast<double>(cs.doc_counts.size());
  std::vector<double> idf(cs.terms.size());
  for (std::size_t i = 0; i < idf.size(); ++i) idf[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(cs.df[i]))) + 1.0;
  std::vector<double> score(cs.terms.size(), 0.0);
  for (const auto& doc : cs.doc_counts) {
    for (const auto& [t, c] : doc) score[t] += static_cast<double>(c) * idf[t];
  }
  return score;
}

using EmbeddingProvider = std::function<std::vector<double>(const std::string&)>;

// Ranks candidates by cosine similarity to the mean document embedding.
inline KeyphraseScorer embedding_scorer(EmbeddingProvider embed) {
  return [embed = std::move(embed)](const CandidateSet& cs) {
    auto norm = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x * x;
      return std::sqrt(s);
    };
    std::vector<double> centroid;
    for (const auto& d : cs.documents) {
      auto e = embed(d);
      if (centroid.empty()) centroid.assign(e.size(), 0.0);
      if (e.size() != centroid.size()) throw ContractError("embedding dimensions differ");
      for (std::size_t i = 0; i < e.size(); ++i) centroid[i] += e[i];
    }
    double cn = norm(centroid);
    std::vector<double> out;
    for (const auto& t : cs.terms) {
      auto e = embed(t);
      if (e.size() != centroid.size()) throw ContractError("embedding dimensions differ");
      double dot = 0;
      for (std::size_t i = 0; i < e.size(); ++i) dot += e[i] * centroid[i];
      double en = norm(e);
      out.push_back(cn > 0 && en > 0 ? dot / (cn * en) : 0.0);
    }
    return out;
  };
}

struct Keyphrase {
  std::string term;
  double score = 0.0;

  bool operator==(const Keyphrase&) const = default;
};

inline std::vector<Keyphrase> extract_keyphrases(const Corpus& cohort, int k,
                                                 const KeyphraseScorer& scorer = tfidf_sum_scores) {
  if (k <= 0) throw ContractError("keyphrase count must be positive");
  auto cs = candidate_set(cohort);
  auto scores = scorer(cs);
  if (scores.size() != cs.terms.size()) throw ContractError("scorer returned the wrong number of scores");
  std::vector<Keyphrase> out;
  for (std::size_t i = 0; i < cs.terms.size(); ++i) out.push_back({cs.terms[i], scores[i]});
  // Terms are already sorted, so a stable sort on score keeps term order on ties.
  std::stable_sort(out.begin(), out.end(), [](const Keyphrase& a, const Keyphrase& b) { return a.score > b.score; });
  if (out.size() > static_cast<std::size_t>(k)) out.resize(static_cast<std::size_t>(k));
  return out;
}

inline std::string keyphrases_to_csv(const std::vector<Keyphrase>& ks) {
  std::string out = text::csv_line({"rank", "term", "score"});
  for (std::size_t i = 0; i < ks.size(); ++i) {
    out += text::csv_line({std::to_string(i + 1), ks[i].term, text::format_double(ks[i].score)});
  }
  return out;
}

}  // namespace bibliograph::portraits
