#pragma once

// Scientific evolutionary pathways: the corpus is replayed one publication
// year at a time. Records join their most similar topic; records far from
// every topic are pooled as novelty candidates, and candidate clusters that
// are large enough become descendant topics linked to their predecessors.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bibliograph/corpus.hpp"
#include "bibliograph/errors.hpp"
#include "bibliograph/network.hpp"
#include "bibliograph/text.hpp"

namespace bibliograph::sep {

struct SepParams {
  double novelty_threshold = 0.35;  // best cosine below this marks a record as novel
  std::size_t min_descendant_size = 5;
  std::size_t top_k_label = 5;
  std::size_t vocabulary_min_df = 2;
  std::uint64_t seed = 0;  // community detection visiting order

  void validate() const {
    if (!(novelty_threshold > 0.0 && novelty_threshold < 1.0)) {
      throw ConfigError("sep.novelty_threshold must lie in (0, 1)");
    }
    if (min_descendant_size < 2) throw ConfigError("sep.min_descendant_size must be >= 2");
    if (vocabulary_min_df < 1) throw ConfigError("sep.vocabulary_min_df must be >= 1");
  }
};

inline json params_to_json(const SepParams& p) {
  return {{"novelty_threshold", p.novelty_threshold},
          {"min_descendant_size", p.min_descendant_size},
          {"top_k_label", p.top_k_label},
          {"vocabulary_min_df", p.vocabulary_min_df},
          {"seed", p.seed}};
}

inline SepParams params_from_json(const json& j) {
  SepParams p;
  p.novelty_threshold = j.value("novelty_threshold", p.novelty_threshold);
  p.min_descendant_size = j.value("min_descendant_size", p.min_descendant_size);
  p.top_k_label = j.value("top_k_label", p.top_k_label);
  p.vocabulary_min_df = j.value("vocabulary_min_df", p.vocabulary_min_df);
  p.seed = j.value("seed", p.seed);
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Slicing

struct Slice {
  int year = 0;
  std::vector<BibRecord> records;  // corpus order
};

struct SliceStream {
  std::vector<Slice> slices;          // ascending year
  std::vector<std::string> excluded;  // record ids without a year
};

inline SliceStream slice_stream(const Corpus& corpus) {
  SliceStream out;
  std::map<int, std::vector<BibRecord>> by_year;
  for (const auto& r : corpus) {
    if (r.year) {
      by_year[*r.year].push_back(r);
    } else {
      out.excluded.push_back(r.record_id);
    }
  }
  for (auto& [year, records] : by_year) out.slices.push_back({year, std::move(records)});
  return out;
}

// ---------------------------------------------------------------------------
// Vectors

using TermId = std::uint32_t;

struct DocVector {
  std::vector<std::pair<TermId, double>> entries;  // sorted by term, no zeros
  double norm = 0.0;

  bool is_zero() const { return entries.empty(); }

  static DocVector from_map(const std::map<TermId, double>& weights) {
    DocVector v;
    double sq = 0.0;
    for (const auto& [t, w] : weights) {
      if (w == 0.0) continue;
      v.entries.emplace_back(t, w);
      sq += w * w;
    }
    v.norm = std::sqrt(sq);
    return v;
  }

  bool operator==(const DocVector&) const = default;
};

inline double dot(const DocVector& a, const DocVector& b) {
  double s = 0.0;
  auto i = a.entries.begin();
  auto j = b.entries.begin();
  while (i != a.entries.end() && j != b.entries.end()) {
    if (i->first < j->first) {
      ++i;
    } else if (j->first < i->first) {
      ++j;
    } else {
      s += i->second * j->second;
      ++i;
      ++j;
    }
  }
  return s;
}

inline double cosine(const DocVector& a, const DocVector& b) {
  if (a.is_zero() || b.is_zero()) return 0.0;
  return std::clamp(dot(a, b) / (a.norm * b.norm), 0.0, 1.0);
}

// Terms of a record with repeats: author keywords and FoS tags as whole
// phrases, plus content words of the title.
inline std::vector<std::string> record_terms(const BibRecord& r) {
  std::vector<std::string> out;
  for (const auto& k : r.author_keywords) {
    auto t = text::casefold(text::trim(k));
    if (!t.empty()) out.push_back(std::move(t));
  }
  for (const auto& f : r.fos_tags) {
    auto t = text::casefold(text::trim(f.tag));
    if (!t.empty()) out.push_back(std::move(t));
  }
  for (auto& w : text::words(r.title)) {
    if (is_content_term(w)) out.push_back(std::move(w));
  }
  return out;
}

// Terms with document frequency >= min_df, ids in sorted term order, and a
// smoothed idf = ln((1 + N) / (1 + df)) + 1 frozen at construction.
class Vocabulary {
 public:
  static Vocabulary build(std::span<const BibRecord> records, std::size_t min_df) {
    std::map<std::string, std::size_t> df;
    for (const auto& r : records) {
      auto terms = record_terms(r);
      std::sort(terms.begin(), terms.end());
      terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
      for (auto& t : terms) ++df[t];
    }
    Vocabulary v;
    v.documents_ = records.size();
    for (const auto& [term, count] : df) {
      if (count < min_df) continue;
      v.index_.emplace(term, static_cast<TermId>(v.terms_.size()));
      v.terms_.push_back(term);
      v.idf_.push_back(std::log((1.0 + static_cast<double>(v.documents_)) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    return v;
  }

  std::size_t size() const { return terms_.size(); }
  std::size_t documents() const { return documents_; }
  const std::string& term(TermId id) const { return terms_.at(id); }
  double idf(TermId id) const { return idf_.at(id); }
  std::optional<TermId> find(const std::string& term) const {
    auto it = index_.find(term);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<double> idf_;
  std::map<std::string, TermId> index_;
  std::size_t documents_ = 0;
};

// Raw term counts times idf; out-of-vocabulary terms are dropped, so a
// record with none in vocabulary yields the zero vector.
inline DocVector vectorize_record(const BibRecord& r, const Vocabulary& vocab) {
  std::map<TermId, double> tf;
  for (const auto& t : record_terms(r)) {
    if (auto id = vocab.find(t)) tf[*id] += 1.0;
  }
  for (auto& [id, w] : tf) w *= vocab.idf(id);
  return DocVector::from_map(tf);
}

using Vectorizer = std::function<DocVector(const BibRecord&)>;

// ---------------------------------------------------------------------------
// Topics

struct Topic {
  std::string topic_id;
  std::vector<std::string> members;  // record ids in join order
  DocVector centroid;
  int birth_year = 0;
  std::vector<std::string> label;

  bool operator==(const Topic&) const = default;
};

struct Classification {
  std::optional<std::size_t> topic;  // index into the topic list; nullopt = orphan
  double similarity = 0.0;
};

// Most similar topic by cosine; ties go to the earlier birth year, then the
// smaller topic id. All-zero similarity means the record is an orphan.
inline Classification classify_record(const DocVector& v, std::span<const Topic> topics) {
  if (topics.empty()) throw ContractError("classify_record needs at least one topic");
  if (v.is_zero()) throw ContractError("classify_record needs a non-zero vector");
  Classification best;
  for (std::size_t i = 0; i < topics.size(); ++i) {
    double s = cosine(v, topics[i].centroid);
    if (s <= 0.0) continue;
    bool take = !best.topic || s > best.similarity;
    if (!take && s == best.similarity) {
      const auto& cur = topics[*best.topic];
      take = std::pair(topics[i].birth_year, topics[i].topic_id) < std::pair(cur.birth_year, cur.topic_id);
    }
    if (take) best = {i, s};
  }
  return best;
}

inline bool is_novel(const Classification& c, double threshold) { return !c.topic || c.similarity < threshold; }

// Records a frozen topic set would flag as novel.
inline std::size_t count_novelty_candidates(std::span<const DocVector> vectors, std::span<const Topic> topics,
                                            double threshold) {
  std::size_t n = 0;
  for (const auto& v : vectors) {
    if (!v.is_zero() && is_novel(classify_record(v, topics), threshold)) ++n;
  }
  return n;
}

struct EvolutionEdge {
  std::string predecessor;
  std::string descendant;
  double weight = 0.0;  // centroid cosine at the descendant's birth

  bool operator==(const EvolutionEdge&) const = default;
};

struct SliceReport {
  int year = 0;
  std::size_t records = 0;
  std::size_t zero_vectors = 0;
  std::size_t assigned = 0;    // joined an existing topic directly
  std::size_t candidates = 0;  // flagged novel, orphans included
  std::size_t orphans = 0;
  std::size_t new_topics = 0;  // roots in the bootstrap slice, descendants later
  std::size_t folded = 0;      // candidates in undersized clusters

  bool operator==(const SliceReport&) const = default;
};

struct EvolutionGraph {
  std::vector<Topic> topics;  // creation order, ids ascending
  std::vector<EvolutionEdge> edges;
  Partition communities;  // indexed like topics
  std::vector<SliceReport> slices;
  std::vector<std::string> unplaced;  // records with a zero vector
  std::vector<std::string> excluded;  // records without a year

  std::size_t index_of(const std::string& topic_id) const {
    for (std::size_t i = 0; i < topics.size(); ++i) {
      if (topics[i].topic_id == topic_id) return i;
    }
    throw LookupError("unknown topic '" + topic_id + "'");
  }
};

namespace detail {

inline std::string topic_id(std::size_t n) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "T%06zu", n);
  return buf;
}

inline std::vector<std::string> top_terms(const DocVector& c, std::size_t k, const Vocabulary* vocab) {
  std::vector<std::pair<TermId, double>> sorted = c.entries;
  auto name = [&](TermId t) { return vocab ? vocab->term(t) : std::to_string(t); };
  std::sort(sorted.begin(), sorted.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return name(a.first) < name(b.first);
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < sorted.size() && i < k; ++i) out.push_back(name(sorted[i].first));
  return out;
}

// Running sum of member vectors; the centroid is the sum over the count.
struct TopicSum {
  std::map<TermId, double> sum;
  std::size_t count = 0;

  void add(const DocVector& v) {
    for (const auto& [t, w] : v.entries) sum[t] += w;
    ++count;
  }
  DocVector centroid() const {
    std::map<TermId, double> mean;
    for (const auto& [t, w] : sum) mean[t] = w / static_cast<double>(count);
    return DocVector::from_map(mean);
  }
};

inline DocVector mean_of(std::span<const DocVector* const> vs) {
  TopicSum s;
  for (auto* v : vs) s.add(*v);
  return s.centroid();
}

// Threshold-graph clustering: records are linked when their cosine reaches
// the threshold, and the graph is split by modularity. Clusters are returned
// in order of their smallest member.
inline std::vector<std::vector<std::size_t>> cluster_vectors(std::span<const DocVector* const> vs, double threshold,
                                                             std::uint64_t seed) {
  const std::size_t n = vs.size();
  if (n == 0) return {};
  auto label = [](std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%08zu", i);
    return std::string(buf);
  };
  std::map<std::string, std::size_t> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.emplace(label(i), 1);
  std::map<CoocGraph::LabelPair, double> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = cosine(*vs[i], *vs[j]);
      if (s >= threshold && s > 0.0) edges.emplace(CoocGraph::LabelPair{label(i), label(j)}, s);
    }
  }
  auto g = CoocGraph::from_parts(EntityUnit::term, nodes, edges);
  auto p = louvain_partition(g, seed);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(p.community_count()));
  for (std::size_t i = 0; i < n; ++i) out[static_cast<std::size_t>(p.community[i])].push_back(i);
  return out;
}

// Highest cosine against topics [0, limit), ties to the lowest index; used
// when a record or cluster has no positive similarity to go by.
inline std::size_t nearest_by_centroid(const DocVector& v, std::span<const Topic> topics, std::size_t limit) {
  std::size_t best = 0;
  double best_s = -1.0;
  for (std::size_t i = 0; i < limit; ++i) {
    double s = cosine(v, topics[i].centroid);
    if (s > best_s) {
      best = i;
      best_s = s;
    }
  }
  return best;
}

template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, Fn&& fn) {
  constexpr std::size_t kChunk = 1024;
  std::vector<T> out(n);
  if (n <= kChunk) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::future<void>> parts;
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    parts.push_back(std::async(std::launch::async, [&, begin] {
      for (std::size_t i = begin; i < std::min(n, begin + kChunk); ++i) out[i] = fn(i);
    }));
  }
  for (auto& p : parts) p.get();
  return out;
}

}  // namespace detail

// Replays the corpus slice by slice. The first slice with any non-zero
// vector seeds the root topics from its threshold-graph clusters (clusters
// of at least m records; if none is that large every cluster becomes a
// root, otherwise the small ones fold into their nearest root). In later
// slices, classification runs against the topics as they stood at the start
// of the slice; direct joins are applied first, then candidate clusters of
// size >= m become descendants, then smaller candidate clusters fold back.
inline EvolutionGraph run_sep(const Corpus& corpus, const SepParams& params, const Vectorizer& vectorizer,
                              const Vocabulary* vocab_for_labels = nullptr) {
  params.validate();
  auto stream = slice_stream(corpus);
  EvolutionGraph out;
  out.excluded = stream.excluded;
  std::vector<detail::TopicSum> sums;
  const double tau = params.novelty_threshold;
  const std::size_t m = params.min_descendant_size;

  auto new_topic = [&](int year, const std::vector<const BibRecord*>& recs, const std::vector<const DocVector*>& vs) {
    Topic t;
    t.topic_id = detail::topic_id(out.topics.size() + 1);
    t.birth_year = year;
    detail::TopicSum s;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      t.members.push_back(recs[i]->record_id);
      s.add(*vs[i]);
    }
    t.centroid = s.centroid();
    out.topics.push_back(std::move(t));
    sums.push_back(std::move(s));
    return out.topics.size() - 1;
  };
  auto join = [&](std::size_t topic, const BibRecord& r, const DocVector& v) {
    out.topics[topic].members.push_back(r.record_id);
    sums[topic].add(v);
  };
  auto refresh = [&](std::size_t from) {
    for (std::size_t i = from; i < out.topics.size(); ++i) out.topics[i].centroid = sums[i].centroid();
  };

  for (const auto& slice : stream.slices) {
    SliceReport report;
    report.year = slice.year;
    report.records = slice.records.size();
    auto vectors = detail::parallel_map<DocVector>(slice.records.size(),
                                                   [&](std::size_t i) { return vectorizer(slice.records[i]); });
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      if (vectors[i].is_zero()) {
        out.unplaced.push_back(slice.records[i].record_id);
        ++report.zero_vectors;
      } else {
        live.push_back(i);
      }
    }

    if (out.topics.empty()) {
      if (live.empty()) {
        out.slices.push_back(report);
        continue;
      }
      std::vector<const DocVector*> vs;
      for (auto i : live) vs.push_back(&vectors[i]);
      auto clusters = detail::cluster_vectors(vs, tau, params.seed);
      bool any_large = std::any_of(clusters.begin(), clusters.end(), [&](auto& c) { return c.size() >= m; });
      std::vector<std::size_t> small;
      for (const auto& c : clusters) {
        if (any_large && c.size() < m) {
          small.insert(small.end(), c.begin(), c.end());
          continue;
        }
        std::vector<const BibRecord*> recs;
        std::vector<const DocVector*> cvs;
        for (auto k : c) {
          recs.push_back(&slice.records[live[k]]);
          cvs.push_back(vs[k]);
        }
        new_topic(slice.year, recs, cvs);
      }
      report.new_topics = out.topics.size();
      std::sort(small.begin(), small.end());
      const std::size_t roots = out.topics.size();
      for (auto k : small) {
        join(detail::nearest_by_centroid(*vs[k], out.topics, roots), slice.records[live[k]], *vs[k]);
      }
      refresh(0);
      out.slices.push_back(report);
      continue;
    }

    const std::size_t before = out.topics.size();
    auto classes = detail::parallel_map<Classification>(
        live.size(), [&](std::size_t k) { return classify_record(vectors[live[k]], out.topics); });

    std::vector<std::size_t> candidates;  // positions in `live`
    for (std::size_t k = 0; k < live.size(); ++k) {
      if (is_novel(classes[k], tau)) {
        candidates.push_back(k);
        if (!classes[k].topic) ++report.orphans;
      } else {
        join(*classes[k].topic, slice.records[live[k]], vectors[live[k]]);
        ++report.assigned;
      }
    }
    report.candidates = candidates.size();
    refresh(0);

    std::vector<const DocVector*> cvs;
    for (auto k : candidates) cvs.push_back(&vectors[live[k]]);
    auto clusters = detail::cluster_vectors(cvs, tau, params.seed);
    std::vector<std::vector<std::size_t>> undersized;
    for (const auto& c : clusters) {
      if (c.size() < m) {
        undersized.push_back(c);
        continue;
      }
      std::vector<const BibRecord*> recs;
      std::vector<const DocVector*> vs;
      std::set<std::size_t> preds;
      for (auto k : c) {
        recs.push_back(&slice.records[live[candidates[k]]]);
        vs.push_back(cvs[k]);
        if (auto t = classes[candidates[k]].topic) preds.insert(*t);
      }
      std::size_t id = new_topic(slice.year, recs, vs);
      if (preds.empty()) preds.insert(detail::nearest_by_centroid(out.topics[id].centroid, out.topics, before));
      for (auto p : preds) {
        out.edges.push_back({out.topics[p].topic_id, out.topics[id].topic_id,
                             cosine(out.topics[p].centroid, out.topics[id].centroid)});
      }
      ++report.new_topics;
    }
    for (const auto& c : undersized) {
      std::vector<const DocVector*> vs;
      for (auto k : c) vs.push_back(cvs[k]);
      auto cluster_centroid = detail::mean_of(vs);
      for (auto k : c) {
        const auto& cls = classes[candidates[k]];
        std::size_t target = cls.topic ? *cls.topic : detail::nearest_by_centroid(cluster_centroid, out.topics, before);
        join(target, slice.records[live[candidates[k]]], *cvs[k]);
        ++report.folded;
      }
    }
    refresh(0);
    out.slices.push_back(report);
  }

  for (auto& t : out.topics) t.label = detail::top_terms(t.centroid, params.top_k_label, vocab_for_labels);

  if (!out.topics.empty()) {
    std::map<std::string, std::size_t> nodes;
    for (const auto& t : out.topics) nodes.emplace(t.topic_id, t.members.size());
    std::map<CoocGraph::LabelPair, double> edges;
    for (const auto& e : out.edges) {
      if (e.weight > 0.0) edges[{e.predecessor, e.descendant}] = e.weight;
    }
    auto g = CoocGraph::from_parts(EntityUnit::term, nodes, edges);
    out.communities = louvain_partition(g, params.seed);
  }
  return out;
}

inline EvolutionGraph run_sep(const Corpus& corpus, const SepParams& params = {}) {
  params.validate();
  std::vector<BibRecord> dated;
  for (const auto& r : corpus) {
    if (r.year) dated.push_back(r);
  }
  auto vocab = Vocabulary::build(dated, params.vocabulary_min_df);
  return run_sep(corpus, params, [&](const BibRecord& r) { return vectorize_record(r, vocab); }, &vocab);
}

// ---------------------------------------------------------------------------
// Views and serialization

struct SepViewRow {
  std::string kind;  // "node" or "edge"
  std::string id;    // topic id for nodes, "<pred>-><desc>" for edges
  std::string source, target;
  double size = 0.0;
  int color = 0;
  int birth_year = 0;
  double weight = 0.0;
  std::string label;
};

// One row per topic (size = member count, color = community) followed by one
// row per edge (weight = similarity).
inline std::vector<SepViewRow> export_sep_view(const EvolutionGraph& g) {
  std::vector<SepViewRow> rows;
  for (std::size_t i = 0; i < g.topics.size(); ++i) {
    const auto& t = g.topics[i];
    SepViewRow r;
    r.kind = "node";
    r.id = t.topic_id;
    r.size = static_cast<double>(t.members.size());
    r.color = i < g.communities.community.size() ? g.communities.community[i] : 0;
    r.birth_year = t.birth_year;
    for (const auto& l : t.label) r.label += (r.label.empty() ? "" : "; ") + l;
    rows.push_back(std::move(r));
  }
  for (const auto& e : g.edges) {
    SepViewRow r;
    r.kind = "edge";
    r.id = e.predecessor + "->" + e.descendant;
    r.source = e.predecessor;
    r.target = e.descendant;
    r.weight = e.weight;
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string sep_view_to_csv(const std::vector<SepViewRow>& rows) {
  std::string out = text::csv_line({"kind", "id", "source", "target", "size", "color", "birth_year", "weight", "label"});
  for (const auto& r : rows) {
    bool node = r.kind == "node";
    out += text::csv_line({r.kind, r.id, r.source, r.target, node ? text::format_double(r.size) : "",
                           node ? std::to_string(r.color) : "", node ? std::to_string(r.birth_year) : "",
                           node ? "" : text::format_double(r.weight), r.label});
  }
  return out;
}

inline json slice_report_to_json(const SliceReport& s) {
  return {{"year", s.year},         {"records", s.records},       {"zero_vectors", s.zero_vectors},
          {"assigned", s.assigned}, {"candidates", s.candidates}, {"orphans", s.orphans},
          {"new_topics", s.new_topics}, {"folded", s.folded}};
}

inline json evolution_to_json(const EvolutionGraph& g) {
  json topics = json::array();
  for (std::size_t i = 0; i < g.topics.size(); ++i) {
    const auto& t = g.topics[i];
    topics.push_back({{"topic_id", t.topic_id},
                      {"birth_year", t.birth_year},
                      {"size", t.members.size()},
                      {"label", t.label},
                      {"community", i < g.communities.community.size() ? g.communities.community[i] : 0},
                      {"members", t.members}});
  }
  json edges = json::array();
  for (const auto& e : g.edges) {
    edges.push_back({{"predecessor", e.predecessor}, {"descendant", e.descendant}, {"weight", e.weight}});
  }
  json slices = json::array();
  for (const auto& s : g.slices) slices.push_back(slice_report_to_json(s));
  return {{"topics", std::move(topics)},
          {"edges", std::move(edges)},
          {"modularity", g.communities.modularity},
          {"slices", std::move(slices)},
          {"unplaced", g.unplaced},
          {"excluded", g.excluded}};
}

}  // namespace bibliograph::sep
