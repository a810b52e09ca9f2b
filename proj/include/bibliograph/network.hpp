#pragma once

// Weighted co-occurrence networks, inverse-weight shortest paths, Newman
// modularity and Louvain community detection.

#include <algorithm>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bibliograph/corpus.hpp"
#include "bibliograph/errors.hpp"
#include "bibliograph/text.hpp"

namespace bibliograph {

enum class EntityUnit { fos, keyword, author, country, venue, term };

inline std::string to_string(EntityUnit u) {
  switch (u) {
    case EntityUnit::fos: return "fos";
    case EntityUnit::keyword: return "keyword";
    case EntityUnit::author: return "author";
    case EntityUnit::country: return "country";
    case EntityUnit::venue: return "venue";
    case EntityUnit::term: break;
  }
  return "term";
}

inline EntityUnit parse_entity_unit(std::string_view s) {
  if (s == "fos") return EntityUnit::fos;
  if (s == "keyword") return EntityUnit::keyword;
  if (s == "author") return EntityUnit::author;
  if (s == "country") return EntityUnit::country;
  if (s == "venue") return EntityUnit::venue;
  if (s == "term") return EntityUnit::term;
  throw ConfigError("unknown network unit '" + std::string(s) + "'");
}

// Undirected weighted graph with sorted node labels. Node indices follow
// label order, edges are stored once with a < b and sorted.
class CoocGraph {
 public:
  struct Neighbor {
    std::size_t node;
    double weight;
  };
  struct Edge {
    std::size_t a;
    std::size_t b;
    double weight;
    bool operator==(const Edge&) const = default;
  };
  using LabelPair = std::pair<std::string, std::string>;

  CoocGraph() = default;

  static CoocGraph from_parts(EntityUnit unit, const std::map<std::string, std::size_t>& nodes,
                              const std::map<LabelPair, double>& edges, bool normalized = false) {
    CoocGraph g;
    g.unit_ = unit;
    g.normalized_ = normalized;
    g.labels_.reserve(nodes.size());
    for (const auto& [label, freq] : nodes) {
      if (freq < 1) throw ContractError("node '" + label + "' has frequency 0");
      g.index_.emplace(label, g.labels_.size());
      g.labels_.push_back(label);
      g.frequency_.push_back(freq);
    }
    std::vector<Edge> list;
    list.reserve(edges.size());
    for (const auto& [pair, w] : edges) {
      if (pair.first == pair.second) throw ContractError("self-loop on '" + pair.first + "'");
      if (!(w > 0.0)) throw ContractError("edge weight must be positive");
      auto a = g.index_.find(pair.first);
      auto b = g.index_.find(pair.second);
      if (a == g.index_.end() || b == g.index_.end()) throw ContractError("edge endpoint missing from nodes");
      list.push_back({std::min(a->second, b->second), std::max(a->second, b->second), w});
    }
    g.set_edges(std::move(list));
    return g;
  }

  std::size_t node_count() const { return labels_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return labels_.empty(); }
  EntityUnit unit() const { return unit_; }
  bool normalized() const { return normalized_; }

  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t frequency(std::size_t i) const { return frequency_.at(i); }

  std::optional<std::size_t> find(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(const std::string& label) const {
    auto i = find(label);
    if (!i) throw LookupError("node '" + label + "' not in graph");
    return *i;
  }

  std::span<const Neighbor> neighbors(std::size_t i) const { return adjacency_.at(i); }
  const std::vector<Edge>& edges() const { return edges_; }

  std::optional<double> edge_weight(std::size_t a, std::size_t b) const {
    for (const auto& n : adjacency_.at(a)) {
      if (n.node == b) return n.weight;
    }
    return std::nullopt;
  }

  double total_weight() const {
    double m = 0.0;
    for (const auto& e : edges_) m += e.weight;
    return m;
  }

  // Subgraph on the given node indices (any order, no duplicates); labels
  // keep their relative order, so indices of the result are still sorted.
  CoocGraph induced(std::span<const std::size_t> nodes) const {
    std::vector<std::size_t> keep(nodes.begin(), nodes.end());
    std::sort(keep.begin(), keep.end());
    std::vector<std::size_t> remap(labels_.size(), kNone);
    CoocGraph g;
    g.unit_ = unit_;
    g.normalized_ = normalized_;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      remap[keep[i]] = i;
      g.index_.emplace(labels_[keep[i]], i);
      g.labels_.push_back(labels_[keep[i]]);
      g.frequency_.push_back(frequency_[keep[i]]);
    }
    std::vector<Edge> list;
    for (const auto& e : edges_) {
      if (remap[e.a] != kNone && remap[e.b] != kNone) list.push_back({remap[e.a], remap[e.b], e.weight});
    }
    g.set_edges(std::move(list));
    return g;
  }

  bool operator==(const CoocGraph& o) const {
    return unit_ == o.unit_ && normalized_ == o.normalized_ && labels_ == o.labels_ && frequency_ == o.frequency_ &&
           edges_ == o.edges_;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  void set_edges(std::vector<Edge> list) {
    std::sort(list.begin(), list.end(), [](const Edge& x, const Edge& y) {
      return x.a != y.a ? x.a < y.a : x.b < y.b;
    });
    for (std::size_t i = 1; i < list.size(); ++i) {
      if (list[i].a == list[i - 1].a && list[i].b == list[i - 1].b) throw ContractError("duplicate edge");
    }
    edges_ = std::move(list);
    adjacency_.assign(labels_.size(), {});
    for (const auto& e : edges_) {
      adjacency_[e.a].push_back({e.b, e.weight});
      adjacency_[e.b].push_back({e.a, e.weight});
    }
    for (auto& adj : adjacency_) {
      std::sort(adj.begin(), adj.end(), [](const Neighbor& x, const Neighbor& y) { return x.node < y.node; });
    }
  }

  EntityUnit unit_ = EntityUnit::term;
  bool normalized_ = false;
  std::vector<std::string> labels_;
  std::vector<std::size_t> frequency_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

// ---------------------------------------------------------------------------
// Construction

// Content words used for the `term` unit: non-stopwords of at least three
// characters that are not pure digits.
inline bool is_content_term(const std::string& w) {
  return w.size() >= 3 && !text::is_stopword(w) &&
         !std::all_of(w.begin(), w.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Distinct entities of each record for the chosen unit, sorted.
inline std::vector<std::vector<std::string>> entity_sets(const Corpus& corpus, EntityUnit unit) {
  std::vector<std::vector<std::string>> out;
  out.reserve(corpus.size());
  for (const auto& r : corpus) {
    std::vector<std::string> items;
    switch (unit) {
      case EntityUnit::fos:
        for (const auto& t : r.fos_tags) items.push_back(text::casefold(text::trim(t.tag)));
        break;
      case EntityUnit::keyword:
        for (const auto& k : r.author_keywords) items.push_back(text::casefold(text::trim(k)));
        break;
      case EntityUnit::author: items = r.authors; break;
      case EntityUnit::country: items = r.countries; break;
      case EntityUnit::venue:
        if (!text::trim(r.venue).empty()) items.emplace_back(text::trim(r.venue));
        break;
      case EntityUnit::term: {
        for (auto& w : text::words(r.title)) {
          if (is_content_term(w)) items.push_back(std::move(w));
        }
        if (r.abstract) {
          for (auto& w : text::words(*r.abstract)) {
            if (is_content_term(w)) items.push_back(std::move(w));
          }
        }
        break;
      }
    }
    std::erase_if(items, [](const std::string& s) { return s.empty(); });
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    out.push_back(std::move(items));
  }
  return out;
}

namespace detail {

template <class Fn>
auto chunked_reduce(std::size_t n, Fn&& fn) {
  using Result = decltype(fn(std::size_t{0}, std::size_t{0}));
  constexpr std::size_t kMinChunk = 4096;
  std::size_t workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(1, n / kMinChunk));
  std::vector<Result> parts;
  if (workers <= 1) {
    parts.push_back(fn(0, n));
    return parts;
  }
  std::vector<std::future<Result>> futures;
  std::size_t step = (n + workers - 1) / workers;
  for (std::size_t begin = 0; begin < n; begin += step) {
    futures.push_back(std::async(std::launch::async, fn, begin, std::min(n, begin + step)));
  }
  for (auto& f : futures) parts.push_back(f.get());
  return parts;
}

}  // namespace detail

// Counts documents per entity and per entity pair. Nodes below
// `min_node_freq` go first, then edges below `min_edge_weight`, then nodes
// left without edges by the edge filter. Nodes that never had an edge stay.
inline CoocGraph build_cooc_graph_from_sets(const std::vector<std::vector<std::string>>& sets, EntityUnit unit,
                                            std::size_t min_node_freq = 1, double min_edge_weight = 1.0) {
  if (min_node_freq < 1 || !(min_edge_weight >= 1.0)) throw ConfigError("network thresholds must be >= 1");
  using Counts = std::unordered_map<std::string, std::size_t>;
  auto node_parts = detail::chunked_reduce(sets.size(), [&](std::size_t b, std::size_t e) {
    Counts c;
    for (std::size_t i = b; i < e; ++i) {
      for (const auto& s : sets[i]) ++c[s];
    }
    return c;
  });
  std::map<std::string, std::size_t> freq;
  for (const auto& part : node_parts) {
    for (const auto& [k, v] : part) freq[k] += v;
  }
  std::erase_if(freq, [&](const auto& kv) { return kv.second < min_node_freq; });

  std::vector<std::string> labels;
  std::unordered_map<std::string, std::uint64_t> idx;
  for (const auto& [k, v] : freq) {
    idx.emplace(k, labels.size());
    labels.push_back(k);
  }
  const std::uint64_t n = labels.size();
  using PairCounts = std::unordered_map<std::uint64_t, std::size_t>;
  auto edge_parts = detail::chunked_reduce(sets.size(), [&](std::size_t b, std::size_t e) {
    PairCounts c;
    std::vector<std::uint64_t> ids;
    for (std::size_t i = b; i < e; ++i) {
      ids.clear();
      for (const auto& s : sets[i]) {
        if (auto it = idx.find(s); it != idx.end()) ids.push_back(it->second);
      }
      std::sort(ids.begin(), ids.end());
      for (std::size_t x = 0; x < ids.size(); ++x) {
        for (std::size_t y = x + 1; y < ids.size(); ++y) ++c[ids[x] * n + ids[y]];
      }
    }
    return c;
  });
  std::map<std::uint64_t, std::size_t> pair_count;
  for (const auto& part : edge_parts) {
    for (const auto& [k, v] : part) pair_count[k] += v;
  }
  std::vector<bool> had_edge(n, false), has_edge(n, false);
  std::map<CoocGraph::LabelPair, double> edges;
  for (const auto& [key, count] : pair_count) {
    auto a = key / n, b = key % n;
    had_edge[a] = had_edge[b] = true;
    if (static_cast<double>(count) < min_edge_weight) continue;
    has_edge[a] = has_edge[b] = true;
    edges.emplace(CoocGraph::LabelPair{labels[a], labels[b]}, static_cast<double>(count));
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    if (had_edge[i] && !has_edge[i]) freq.erase(labels[i]);
  }
  return CoocGraph::from_parts(unit, freq, edges);
}

inline CoocGraph build_cooc_graph(const Corpus& corpus, EntityUnit unit, std::size_t min_node_freq = 1,
                                  double min_edge_weight = 1.0) {
  return build_cooc_graph_from_sets(entity_sets(corpus, unit), unit, min_node_freq, min_edge_weight);
}

// Association strength: w(a,b) / (freq(a) * freq(b)).
inline CoocGraph association_strength(const CoocGraph& g) {
  std::map<std::string, std::size_t> nodes;
  for (std::size_t i = 0; i < g.node_count(); ++i) nodes.emplace(g.label(i), g.frequency(i));
  std::map<CoocGraph::LabelPair, double> edges;
  for (const auto& e : g.edges()) {
    double denom = static_cast<double>(g.frequency(e.a)) * static_cast<double>(g.frequency(e.b));
    edges.emplace(CoocGraph::LabelPair{g.label(e.a), g.label(e.b)}, e.weight / denom);
  }
  return CoocGraph::from_parts(g.unit(), nodes, edges, true);
}

// ---------------------------------------------------------------------------
// Canonical JSON

inline json graph_to_json(const CoocGraph& g) {
  json nodes = json::array();
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    nodes.push_back({{"label", g.label(i)}, {"frequency", g.frequency(i)}});
  }
  json edges = json::array();
  for (const auto& e : g.edges()) {
    edges.push_back({{"source", g.label(e.a)}, {"target", g.label(e.b)}, {"weight", e.weight}});
  }
  return {{"unit", to_string(g.unit())}, {"normalized", g.normalized()}, {"nodes", nodes}, {"edges", edges}};
}

inline CoocGraph graph_from_json(const json& j) {
  try {
    std::map<std::string, std::size_t> nodes;
    for (const auto& n : j.at("nodes")) nodes.emplace(n.at("label").get<std::string>(), n.at("frequency").get<std::size_t>());
    std::map<CoocGraph::LabelPair, double> edges;
    for (const auto& e : j.at("edges")) {
      auto a = e.at("source").get<std::string>(), b = e.at("target").get<std::string>();
      if (b < a) std::swap(a, b);
      edges.emplace(CoocGraph::LabelPair{a, b}, e.at("weight").get<double>());
    }
    return CoocGraph::from_parts(parse_entity_unit(j.at("unit").get<std::string>()), nodes, edges,
                                 j.value("normalized", false));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed graph JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Distances (edge length = 1 / weight)

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

inline std::vector<double> shortest_distances(const CoocGraph& g, std::size_t source) {
  std::vector<double> dist(g.node_count(), kUnreachable);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist.at(source) = 0.0;
  queue.push({0.0, source});
  while (!queue.empty()) {
    auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    for (const auto& nb : g.neighbors(u)) {
      double nd = d + 1.0 / nb.weight;
      if (nd < dist[nb.node]) {
        dist[nb.node] = nd;
        queue.push({nd, nb.node});
      }
    }
  }
  return dist;
}

inline std::optional<double> topological_distance(const CoocGraph& g, const std::string& a, const std::string& b) {
  auto ia = g.index_of(a);
  auto ib = g.index_of(b);
  double d = shortest_distances(g, ia)[ib];
  if (d == kUnreachable) return std::nullopt;
  return d;
}

// ---------------------------------------------------------------------------
// Partitions and modularity

struct Partition {
  std::vector<int> community;  // indexed by node
  double modularity = 0.0;

  int community_count() const {
    return community.empty() ? 0 : *std::max_element(community.begin(), community.end()) + 1;
  }

  bool operator==(const Partition&) const = default;
};

inline json partition_to_json(const CoocGraph& g, const Partition& p) {
  json assignment = json::object();
  for (std::size_t i = 0; i < g.node_count(); ++i) assignment[g.label(i)] = p.community.at(i);
  return {{"modularity", p.modularity}, {"communities", p.community_count()}, {"assignment", assignment}};
}

inline Partition partition_from_json(const CoocGraph& g, const json& j) {
  Partition p;
  p.community.assign(g.node_count(), -1);
  const auto& a = j.at("assignment");
  for (std::size_t i = 0; i < g.node_count(); ++i) p.community[i] = a.at(g.label(i)).get<int>();
  p.modularity = j.at("modularity").get<double>();
  return p;
}

// Newman modularity; graphs without edges score 0.
inline double modularity(const CoocGraph& g, std::span<const int> community) {
  if (community.size() != g.node_count()) throw ContractError("assignment does not cover every node");
  for (int c : community) {
    if (c < 0) throw ContractError("node without community");
  }
  double m = g.total_weight();
  if (m <= 0.0) return 0.0;
  std::map<int, double> inner, total;
  for (const auto& e : g.edges()) {
    if (community[e.a] == community[e.b]) inner[community[e.a]] += 2.0 * e.weight;
    total[community[e.a]] += e.weight;
    total[community[e.b]] += e.weight;
  }
  double q = 0.0;
  for (const auto& [c, tot] : total) {
    auto it = inner.find(c);
    double in = it == inner.end() ? 0.0 : it->second;
    q += in / (2.0 * m) - (tot / (2.0 * m)) * (tot / (2.0 * m));
  }
  return q;
}

inline double modularity(const CoocGraph& g, const std::map<std::string, int>& assignment) {
  std::vector<int> community(g.node_count(), -1);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    auto it = assignment.find(g.label(i));
    if (it == assignment.end()) throw ContractError("node '" + g.label(i) + "' has no community");
    community[i] = it->second;
  }
  return modularity(g, community);
}

// Renumbers communities 0..k-1 in order of their lowest node index.
inline std::vector<int> canonical_communities(std::span<const int> community) {
  std::unordered_map<int, int> remap;
  std::vector<int> out(community.size());
  for (std::size_t i = 0; i < community.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(community[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

namespace detail {

// Multigraph used across Louvain levels; self_loop[i] holds the weight of
// edges collapsed inside super-node i (counted once).
struct LouvainLevel {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj;
  std::vector<double> self_loop;
  std::vector<double> degree;
};

inline LouvainLevel level_from_graph(const CoocGraph& g) {
  LouvainLevel lv;
  std::size_t n = g.node_count();
  lv.adj.resize(n);
  lv.self_loop.assign(n, 0.0);
  lv.degree.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& nb : g.neighbors(i)) {
      lv.adj[i].emplace_back(nb.node, nb.weight);
      lv.degree[i] += nb.weight;
    }
  }
  return lv;
}

// One round of local moving. Returns true if any node changed community.
inline bool local_moving(const LouvainLevel& lv, double two_m, std::vector<std::size_t>& comm, std::mt19937_64& rng) {
  std::size_t n = lv.adj.size();
  std::vector<double> tot(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) tot[comm[i]] += lv.degree[i];
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<double> link(n, 0.0);
  std::vector<std::size_t> touched;
  bool any = false;
  bool moved = true;
  while (moved) {
    moved = false;
    for (std::size_t u : order) {
      std::size_t own = comm[u];
      touched.clear();
      for (const auto& [v, w] : lv.adj[u]) {
        if (v == u) continue;
        if (link[comm[v]] == 0.0) touched.push_back(comm[v]);
        link[comm[v]] += w;
      }
      tot[own] -= lv.degree[u];
      double k = lv.degree[u];
      double best_gain = link[own] - tot[own] * k / two_m;
      std::size_t best = own;
      std::sort(touched.begin(), touched.end());
      for (std::size_t c : touched) {
        double gain = link[c] - tot[c] * k / two_m;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best = c;
        }
      }
      tot[best] += k;
      for (std::size_t c : touched) link[c] = 0.0;
      link[own] = 0.0;
      if (best != own) {
        comm[u] = best;
        moved = true;
        any = true;
      }
    }
  }
  return any;
}

inline LouvainLevel aggregate(const LouvainLevel& lv, const std::vector<std::size_t>& comm, std::size_t k) {
  LouvainLevel out;
  out.adj.resize(k);
  out.self_loop.assign(k, 0.0);
  out.degree.assign(k, 0.0);
  std::vector<std::map<std::size_t, double>> acc(k);
  for (std::size_t u = 0; u < lv.adj.size(); ++u) {
    std::size_t cu = comm[u];
    out.self_loop[cu] += lv.self_loop[u];
    out.degree[cu] += lv.degree[u];
    for (const auto& [v, w] : lv.adj[u]) {
      std::size_t cv = comm[v];
      if (cu == cv) {
        if (u < v) out.self_loop[cu] += w;
      } else {
        acc[cu][cv] += w;
      }
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (const auto& [d, w] : acc[c]) out.adj[c].emplace_back(d, w);
  }
  return out;
}

// One multi-level pass: local moving on the node graph starting from
// `node_comm`, then aggregation and local moving on the community graph
// until a level brings no move. Returns true if anything moved.
inline bool louvain_pass(const LouvainLevel& base, double two_m, std::vector<std::size_t>& node_comm,
                         std::mt19937_64& rng) {
  bool any = false;
  LouvainLevel level = base;
  std::vector<std::size_t> comm = node_comm;
  bool at_base = true;
  while (true) {
    std::size_t k = level.adj.size();
    bool moved = local_moving(level, two_m, comm, rng);
    any = any || moved;
    std::vector<std::size_t> remap(k, k);
    std::size_t next = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (remap[comm[i]] == k) remap[comm[i]] = next++;
      comm[i] = remap[comm[i]];
    }
    if (at_base) {
      node_comm = comm;
      at_base = false;
    } else {
      for (auto& c : node_comm) c = comm[c];
    }
    if (next == k) break;
    level = aggregate(level, comm, next);
    comm.resize(next);
    std::iota(comm.begin(), comm.end(), 0);
  }
  return any;
}

// Vertex-moving fine-tuning: every node is moved exactly once, each time
// to the move with the largest modularity change (losses allowed), and the
// best state seen along the sweep is kept. Repeats while a sweep improves.
inline void fine_tune(const LouvainLevel& lv, double two_m, std::vector<std::size_t>& comm) {
  const std::size_t n = lv.adj.size();
  const double m = two_m / 2.0;
  auto compact = [&](std::vector<std::size_t>& c) {
    std::vector<std::size_t> remap(n, n);
    std::size_t next = 0;
    for (auto& x : c) {
      if (remap[x] == n) remap[x] = next++;
      x = remap[x];
    }
  };
  compact(comm);
  while (true) {
    std::vector<std::size_t> state = comm;
    std::vector<double> tot(n + 1, 0.0);
    for (std::size_t u = 0; u < n; ++u) tot[state[u]] += lv.degree[u];
    std::vector<bool> done(n, false);
    std::vector<double> link(n, 0.0);
    double delta_sum = 0.0, best_sum = 0.0;
    std::vector<std::size_t> best_state = state;
    for (std::size_t step = 0; step < n; ++step) {
      double best_gain = -std::numeric_limits<double>::infinity();
      std::size_t best_u = n, best_c = n;
      for (std::size_t u = 0; u < n; ++u) {
        if (done[u]) continue;
        std::fill(link.begin(), link.end(), 0.0);
        for (const auto& [v, w] : lv.adj[u]) link[state[v]] += w;
        std::size_t a = state[u];
        double k = lv.degree[u];
        double stay = link[a] / m - k * (tot[a] - k) / (2.0 * m * m);
        // Candidate targets: every community plus one empty community.
        bool tried_empty = false;
        for (std::size_t c = 0; c < n; ++c) {
          if (c == a) continue;
          if (tot[c] == 0.0) {
            if (tried_empty) continue;
            tried_empty = true;
          }
          double gain = (link[c] / m - k * tot[c] / (2.0 * m * m)) - stay;
          if (gain > best_gain + 1e-15) {
            best_gain = gain;
            best_u = u;
            best_c = c;
          }
        }
      }
      if (best_u == n) break;
      tot[state[best_u]] -= lv.degree[best_u];
      tot[best_c] += lv.degree[best_u];
      state[best_u] = best_c;
      done[best_u] = true;
      delta_sum += best_gain;
      if (delta_sum > best_sum + 1e-12) {
        best_sum = delta_sum;
        best_state = state;
      }
    }
    if (best_sum <= 1e-12) break;
    comm = best_state;
    compact(comm);
  }
}

}  // namespace detail

// Greedy modularity maximization: local moving + aggregation until no gain.
// On graphs of at most 128 nodes each pass is followed by a vertex-moving
// fine-tuning sweep, passes repeat from the refined partition until neither
// step changes anything, and four visiting orders are tried with the best
// kept. The seed fixes the visiting orders, so equal seeds give equal
// partitions. Communities are numbered by their lowest node index.
inline Partition louvain_partition(const CoocGraph& g, std::uint64_t seed = 0) {
  if (g.empty()) throw ContractError("louvain_partition needs at least one node");
  constexpr std::size_t kFineTuneLimit = 128;
  constexpr int kSmallGraphStarts = 4;
  constexpr int kMaxPasses = 32;
  const std::size_t n = g.node_count();
  const double two_m = 2.0 * g.total_weight();
  std::vector<int> identity(n);
  std::iota(identity.begin(), identity.end(), 0);
  Partition best{canonical_communities(identity), 0.0};
  if (two_m <= 0.0) return best;

  const bool small = n <= kFineTuneLimit;
  const auto base = detail::level_from_graph(g);
  std::mt19937_64 seeder(seed);
  bool have = false;
  for (int start = 0; start < (small ? kSmallGraphStarts : 1); ++start) {
    std::mt19937_64 rng(seeder());
    std::vector<std::size_t> node_comm(n);
    std::iota(node_comm.begin(), node_comm.end(), 0);
    for (int pass = 0; pass < kMaxPasses; ++pass) {
      bool moved = detail::louvain_pass(base, two_m, node_comm, rng);
      if (small) {
        auto before = node_comm;
        detail::fine_tune(base, two_m, node_comm);
        moved = moved || before != node_comm;
      }
      if (!moved) break;
    }
    Partition p;
    p.community = canonical_communities(std::vector<int>(node_comm.begin(), node_comm.end()));
    p.modularity = modularity(g, p.community);
    if (!have || p.modularity > best.modularity + 1e-12) {
      best = std::move(p);
      have = true;
    }
  }
  return best;
}

}  // namespace bibliograph
