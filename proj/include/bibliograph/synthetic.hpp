#pragma once

// Seeded generators for fixtures with known structure.

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bibliograph/corpus.hpp"
#include "bibliograph/network.hpp"
#include "bibliograph/text.hpp"

namespace bibliograph::synthetic {

struct PlantedHierarchyParams {
  std::size_t supergroups = 2;
  std::size_t subgroups = 2;  // per supergroup
  std::size_t group_size = 10;
  double intra_subgroup = 10.0;
  double intra_supergroup = 3.0;
  double inter = 0.5;
  double core_boost = 1.5;  // weights touching a subgroup's core node are scaled by this
  double jitter = 0.1;      // each weight scaled by U[1 - jitter, 1 + jitter]
};

struct PlantedHierarchy {
  CoocGraph graph;
  std::vector<int> supergroup;  // per graph node index
  std::vector<int> subgroup;    // per graph node index, unique across supergroups
};

// Complete graph over supergroups x subgroups x group_size nodes. Node 00 of
// each subgroup is its core term, the density peak the subgroup forms
// around. Labels are "s<S>g<G>n<NN>", so index order groups nodes by their
// planted community.
inline PlantedHierarchy planted_hierarchy(std::uint64_t seed, const PlantedHierarchyParams& p = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> scale(1.0 - p.jitter, 1.0 + p.jitter);
  struct Info {
    std::string label;
    int super, sub;
    bool core;
  };
  std::vector<Info> info;
  for (std::size_t s = 0; s < p.supergroups; ++s) {
    for (std::size_t g = 0; g < p.subgroups; ++g) {
      for (std::size_t n = 0; n < p.group_size; ++n) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "s%zug%zun%02zu", s, g, n);
        info.push_back({buf, static_cast<int>(s), static_cast<int>(s * p.subgroups + g), n == 0});
      }
    }
  }
  std::map<std::string, std::size_t> nodes;
  for (const auto& i : info) nodes.emplace(i.label, 1);
  std::map<CoocGraph::LabelPair, double> edges;
  for (std::size_t i = 0; i < info.size(); ++i) {
    for (std::size_t j = i + 1; j < info.size(); ++j) {
      double w = info[i].sub == info[j].sub       ? p.intra_subgroup
                 : info[i].super == info[j].super ? p.intra_supergroup
                                                  : p.inter;
      if (info[i].core) w *= p.core_boost;
      if (info[j].core) w *= p.core_boost;
      edges.emplace(CoocGraph::LabelPair{info[i].label, info[j].label}, w * scale(rng));
    }
  }
  PlantedHierarchy out{CoocGraph::from_parts(EntityUnit::term, nodes, edges), {}, {}};
  for (const auto& i : info) {
    out.supergroup.push_back(i.super);
    out.subgroup.push_back(i.sub);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Year-sliced keyword streams

struct StreamParams {
  int first_year = 2015;
  int years = 4;
  std::size_t per_year = 40;
  std::size_t vocabulary = 24;  // size of the base vocabulary "a00".."aNN"
  std::size_t terms_per_record = 6;
};

namespace detail {

inline std::vector<std::string> sample_terms(std::mt19937_64& rng, const std::string& prefix, std::size_t vocab,
                                             std::size_t k) {
  std::vector<std::size_t> idx(vocab);
  for (std::size_t i = 0; i < vocab; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, vocab); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%02zu", prefix.c_str(), idx[i]);
    out.emplace_back(buf);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline BibRecord stream_record(std::size_t serial, int year, std::vector<std::string> keywords) {
  BibRecord r;
  r.title = "Record " + std::to_string(serial);
  r.year = year;
  r.author_keywords = std::move(keywords);
  r.source_dbs.insert(SourceDb::scopus_like);
  r.record_id = make_record_id(r);
  return r;
}

}  // namespace detail

// Every year draws its keywords from the same vocabulary.
inline Corpus stationary_stream(std::uint64_t seed, const StreamParams& p = {}) {
  std::mt19937_64 rng(seed);
  Corpus out;
  for (int y = 0; y < p.years; ++y) {
    for (std::size_t i = 0; i < p.per_year; ++i) {
      out.push_back(detail::stream_record(out.size(), p.first_year + y,
                                          detail::sample_terms(rng, "a", p.vocabulary, p.terms_per_record)));
    }
  }
  return out;
}

// The stationary stream plus `drift_records` records in year index
// `drift_year` whose keywords come from a disjoint vocabulary "b00"..
inline Corpus drift_stream(std::uint64_t seed, const StreamParams& p = {}, int drift_year = 2,
                           std::size_t drift_records = 12, std::size_t drift_vocabulary = 8) {
  auto out = stationary_stream(seed, p);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::size_t terms = std::min<std::size_t>(4, drift_vocabulary);
  for (std::size_t i = 0; i < drift_records; ++i) {
    out.push_back(detail::stream_record(out.size(), p.first_year + drift_year,
                                        detail::sample_terms(rng, "b", drift_vocabulary, terms)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bibliography with two overlapping source exports and works payloads for
// the mock API. Uses plain modulo draws on mt19937_64 output so the bundled
// files do not depend on the standard library's distribution algorithms.

struct BibliographyParams {
  std::size_t records = 500;
  int first_year = 2015;
  int years = 8;
  std::size_t both_sources_percent = 20;  // share of records exported by both databases
  std::size_t missing_doi_percent = 4;
  std::size_t unknown_to_api_percent = 10;
  std::size_t cohort_percent = 15;  // records that say "responsible AI"
};

struct Bibliography {
  Corpus scopus_batch;
  Corpus wos_batch;
  std::map<std::string, json> works;  // DOI -> OpenAlex-shaped payload
  std::size_t distinct = 0;
};

namespace detail {

struct Theme {
  const char* technique;  // level-1 FoS tag
  std::vector<const char*> terms;
  int debut;  // first year index in which the theme appears
};

inline const std::vector<Theme>& themes() {
  static const std::vector<Theme> t{
      {"Machine learning", {"neural", "deep", "learning", "training", "classifier", "gradient", "model", "prediction"}, 0},
      {"Robotics", {"robot", "autonomous", "vehicle", "navigation", "control", "manipulation", "sensor", "drone"}, 0},
      {"Human-computer interaction",
       {"user", "interface", "interaction", "usability", "participant", "trust", "experience", "design"}, 1},
      {"Computer security",
       {"attack", "adversarial", "defense", "encryption", "federated", "threat", "intrusion", "malware"}, 3},
      {"Natural language processing",
       {"language", "text", "translation", "sentiment", "dialogue", "summarization", "embedding", "chatbot"}, 5},
      {"Computer vision", {"image", "detection", "segmentation", "recognition", "video", "camera", "pixel", "face"}, 2},
  };
  return t;
}

inline const std::vector<const char*>& principle_words() {
  static const std::vector<const char*> w{"accountability", "explainable",   "transparency", "fairness",
                                          "intelligible",   "unbiased",      "reliability",  "safety",
                                          "privacy",        "security",      "inclusive",    "accessibility",
                                          "discrimination", "interpretable", "robustness"};
  return w;
}

inline const std::vector<const char*>& filler_words() {
  static const std::vector<const char*> w{"we",      "propose", "method",  "results", "show",   "framework",
                                          "evaluate", "system", "analysis", "across", "improve", "efficient"};
  return w;
}

inline std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

inline std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

inline std::vector<std::string> pick_distinct(std::mt19937_64& rng, const std::vector<const char*>& pool,
                                              std::size_t k) {
  std::vector<std::string> out;
  while (out.size() < std::min(k, pool.size())) {
    std::string w = pool[draw(rng, pool.size())];
    if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(std::move(w));
  }
  return out;
}

}  // namespace detail

inline Bibliography synthetic_bibliography(std::uint64_t seed, const BibliographyParams& p = {}) {
  std::mt19937_64 rng(seed);
  const auto& themes = detail::themes();
  Bibliography out;

  // Yearly output grows roughly linearly; the last year takes the remainder.
  std::vector<std::size_t> per_year(static_cast<std::size_t>(p.years));
  std::size_t weight_sum = 0;
  for (int y = 0; y < p.years; ++y) weight_sum += static_cast<std::size_t>(y + 2);
  std::size_t assigned = 0;
  for (int y = 0; y + 1 < p.years; ++y) {
    per_year[static_cast<std::size_t>(y)] = p.records * static_cast<std::size_t>(y + 2) / weight_sum;
    assigned += per_year[static_cast<std::size_t>(y)];
  }
  per_year.back() = p.records - assigned;

  const std::vector<std::string> countries{"CN", "US", "GB", "DE", "FR", "CA", "AU", "IN", "JP", "NL", "SG", "KR"};
  const std::vector<const char*> venues{"Journal of Intelligent Systems", "Proceedings of the Learning Conference",
                                        "Robotics Letters", "Interaction Design Review",
                                        "Proceedings of the Security Symposium", "Language Technology Journal",
                                        "Vision Computing Transactions", "Ethics and Information Systems"};

  std::set<std::pair<std::string, int>> seen_titles;
  std::size_t serial = 0;
  for (int y = 0; y < p.years; ++y) {
    std::vector<std::size_t> live;
    for (std::size_t t = 0; t < themes.size(); ++t) {
      if (themes[t].debut <= y) live.push_back(t);
    }
    for (std::size_t k = 0; k < per_year[static_cast<std::size_t>(y)]; ++k, ++serial) {
      const auto& theme = themes[live[detail::draw(rng, live.size())]];
      BibRecord r;
      r.year = p.first_year + y;
      auto terms = detail::pick_distinct(rng, theme.terms, 4);
      bool principled = detail::draw(rng, 100) < 60;
      std::string principle = principled ? detail::principle_words()[detail::draw(rng, detail::principle_words().size())] : "";
      bool cohort = detail::draw(rng, 100) < p.cohort_percent;

      do {
        r.title = detail::capitalize(principled ? principle : std::string(detail::filler_words()[detail::draw(rng, 12)]));
        for (std::size_t i = 0; i < 3; ++i) r.title += " " + terms[detail::draw(rng, terms.size())];
        r.title += " " + std::string(detail::filler_words()[detail::draw(rng, 12)]);
      } while (!seen_titles.emplace(text::casefold(r.title), *r.year).second);
      if (cohort) r.title += " for responsible AI";

      std::string abstract;
      for (std::size_t i = 0; i < 14; ++i) {
        abstract += (i ? " " : "");
        abstract += detail::draw(rng, 3) == 0 ? detail::filler_words()[detail::draw(rng, 12)]
                                               : theme.terms[detail::draw(rng, theme.terms.size())];
      }
      if (principled && detail::draw(rng, 2) == 0) abstract += " with attention to " + principle;
      r.abstract = abstract + ".";
      // The theme's first term is its core keyword, so each theme forms a
      // density peak in the keyword network.
      r.author_keywords = {theme.terms[0]};
      for (const auto& t : terms) {
        if (r.author_keywords.size() < 3 && t != theme.terms[0]) r.author_keywords.push_back(t);
      }
      if (principled) r.author_keywords.push_back(principle);
      r.venue = venues[detail::draw(rng, venues.size())];
      r.doc_type = r.venue.rfind("Proceedings", 0) == 0 ? DocType::proceedings_paper : DocType::article;
      r.venue_type = r.doc_type == DocType::proceedings_paper ? VenueType::conference : VenueType::journal;

      bool has_doi = detail::draw(rng, 100) >= p.missing_doi_percent;
      char doi[40];
      std::snprintf(doi, sizeof doi, "10.5555/synth.%04zu", serial);
      if (has_doi) r.doi = doi;

      // Entities the API knows; the raw exports carry author names only.
      std::size_t n_authors = 1 + detail::draw(rng, 4);
      json authorships = json::array();
      for (std::size_t a = 0; a < n_authors; ++a) {
        std::size_t person = detail::draw(rng, 160);
        std::size_t inst = person % 45;
        r.authors.push_back("Author " + std::to_string(person));
        authorships.push_back(
            {{"author", {{"display_name", "Author " + std::to_string(person)}}},
             {"institutions",
              json::array({{{"display_name", "Institute " + std::to_string(inst)},
                            {"country_code", countries[(inst * 7) % countries.size()]}}})}});
      }
      json concepts = json::array({{{"display_name", "Computer science"}, {"level", 0}, {"score", 0.9}},
                                   {{"display_name", theme.technique}, {"level", 1}, {"score", 0.7}}});
      if (detail::draw(rng, 4) == 0) {
        const auto& other = themes[live[detail::draw(rng, live.size())]];
        if (other.technique != theme.technique) {
          concepts.push_back({{"display_name", other.technique}, {"level", 1}, {"score", 0.4}});
        }
      }
      for (std::size_t i = 0; i < 2; ++i) {
        concepts.push_back({{"display_name", detail::capitalize(terms[i])}, {"level", 2}, {"score", 0.3}});
      }
      if (has_doi && detail::draw(rng, 100) >= p.unknown_to_api_percent) {
        out.works[doi] = {{"authorships", authorships}, {"concepts", concepts}};
      }

      // Records in only one export split 5:3 between the two databases.
      bool both = detail::draw(rng, 100) < p.both_sources_percent;
      bool first = detail::draw(rng, 8) < 5;
      bool in_scopus = both || first, in_wos = both || !first;
      if (in_scopus) {
        BibRecord s = r;
        s.source_dbs = {SourceDb::scopus_like};
        s.record_id = make_record_id(s);
        out.scopus_batch.push_back(std::move(s));
      }
      if (in_wos) {
        BibRecord w = r;
        w.source_dbs = {SourceDb::wos_like};
        if (in_scopus && detail::draw(rng, 3) == 0) w.abstract.reset();  // the merge keeps the longer abstract
        w.record_id = make_record_id(w);
        out.wos_batch.push_back(std::move(w));
      }
      ++out.distinct;
    }
  }
  return out;
}

inline std::string scopus_csv(const Corpus& batch) {
  auto join = [](const std::vector<std::string>& xs) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : "; ") + x;
    return s;
  };
  std::string out = text::csv_line({"Authors", "Title", "Year", "Source title", "DOI", "Abstract", "Author Keywords",
                                    "Document Type", "Affiliations"});
  for (const auto& r : batch) {
    out += text::csv_line({join(r.authors), r.title, r.year ? std::to_string(*r.year) : "", r.venue, r.doi.value_or(""),
                           r.abstract.value_or(""), join(r.author_keywords),
                           r.doc_type == DocType::proceedings_paper ? "Conference Paper" : "Article", ""});
  }
  return out;
}

inline std::string wos_jsonl(const Corpus& batch) {
  std::string out;
  for (const auto& r : batch) out += record_to_json(r, false).dump() + "\n";
  return out;
}

inline constexpr std::uint64_t kBundleSeed = 20240501;

// The bundled fixture's data files by name.
inline std::map<std::string, std::string> bundle_files(std::uint64_t seed = kBundleSeed) {
  auto b = synthetic_bibliography(seed);
  json works(b.works);
  return {{"scopus_export.csv", scopus_csv(b.scopus_batch)},
          {"wos_export.jsonl", wos_jsonl(b.wos_batch)},
          {"works.json", works.dump(1) + "\n"}};
}

}  // namespace bibliograph::synthetic
