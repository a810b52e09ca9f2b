#pragma once

// Hierarchical topic trees: density-peak anchors on a weighted co-occurrence
// network, nearest-anchor membership, recursion into each community.

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bibliograph/errors.hpp"
#include "bibliograph/network.hpp"
#include "bibliograph/text.hpp"

namespace bibliograph::htt {

enum class DensityMode { weighted_degree };

struct HttParams {
  DensityMode density_mode = DensityMode::weighted_degree;
  double gamma_z = 2.0;  // anchor threshold in standard deviations above mean gamma
  std::size_t min_community_size = 5;
  std::size_t max_depth = 4;
  double degeneracy_epsilon = 1e-9;

  void validate() const {
    if (min_community_size < 2) throw ConfigError("htt.min_community_size must be >= 2");
    if (max_depth < 1) throw ConfigError("htt.max_depth must be >= 1");
    if (!(degeneracy_epsilon > 0.0)) throw ConfigError("htt.degeneracy_epsilon must be positive");
    if (!std::isfinite(gamma_z)) throw ConfigError("htt.gamma_z must be finite");
  }
};

inline json params_to_json(const HttParams& p) {
  return {{"density_mode", "weighted-degree"},
          {"gamma_z", p.gamma_z},
          {"min_community_size", p.min_community_size},
          {"max_depth", p.max_depth},
          {"degeneracy_epsilon", p.degeneracy_epsilon}};
}

inline HttParams params_from_json(const json& j) {
  HttParams p;
  if (j.contains("density_mode") && j["density_mode"] != "weighted-degree") {
    throw ConfigError("htt.density_mode must be 'weighted-degree'");
  }
  p.gamma_z = j.value("gamma_z", p.gamma_z);
  p.min_community_size = j.value("min_community_size", p.min_community_size);
  p.max_depth = j.value("max_depth", p.max_depth);
  p.degeneracy_epsilon = j.value("degeneracy_epsilon", p.degeneracy_epsilon);
  p.validate();
  return p;
}

// Per-node scores, indexed like the graph's nodes.
struct AnchorScores {
  std::vector<double> density;
  std::vector<double> delta;
  std::vector<double> gamma;  // min-max normalized density times normalized delta
};

// Weighted degree, summed in neighbor order.
inline std::vector<double> compute_density(const CoocGraph& g) {
  std::vector<double> rho(g.node_count(), 0.0);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    for (const auto& nb : g.neighbors(i)) rho[i] += nb.weight;
  }
  return rho;
}

// u is denser than v when its density is higher, or equal with a smaller
// label (node indices follow label order).
inline bool denser(std::span<const double> rho, std::size_t u, std::size_t v) {
  return rho[u] > rho[v] || (rho[u] == rho[v] && u < v);
}

// Distance to the nearest denser node. The global peak, and any node whose
// denser nodes are all unreachable, gets the largest finite delta of the
// other nodes (1 when there is none).
inline std::vector<double> compute_delta(const CoocGraph& g, std::span<const double> rho) {
  const std::size_t n = g.node_count();
  if (rho.size() != n) throw ContractError("density does not match graph");
  std::vector<double> delta(n, kUnreachable);
  std::vector<double> dist(n, kUnreachable);
  std::vector<std::size_t> touched;
  using Item = std::pair<double, std::size_t>;
  for (std::size_t v = 0; v < n; ++v) {
    // Dijkstra from v, stopping at the first denser node popped.
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    for (auto t : touched) dist[t] = kUnreachable;
    touched.clear();
    dist[v] = 0.0;
    touched.push_back(v);
    queue.push({0.0, v});
    while (!queue.empty()) {
      auto [d, u] = queue.top();
      queue.pop();
      if (d > dist[u]) continue;
      if (u != v && denser(rho, u, v)) {
        delta[v] = d;
        break;
      }
      for (const auto& nb : g.neighbors(u)) {
        double nd = d + 1.0 / nb.weight;
        if (nd < dist[nb.node]) {
          if (dist[nb.node] == kUnreachable) touched.push_back(nb.node);
          dist[nb.node] = nd;
          queue.push({nd, nb.node});
        }
      }
    }
  }
  double fill = -1.0;
  for (double d : delta) {
    if (d != kUnreachable) fill = std::max(fill, d);
  }
  if (fill < 0.0) fill = 1.0;
  for (double& d : delta) {
    if (d == kUnreachable) d = fill;
  }
  return delta;
}

namespace detail {

inline std::vector<double> min_max(std::span<const double> xs) {
  std::vector<double> out(xs.size(), 0.0);
  if (xs.empty()) return out;
  auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  double span = *hi - *lo;
  if (span <= 0.0) return out;
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (xs[i] - *lo) / span;
  return out;
}

}  // namespace detail

inline AnchorScores compute_anchor_scores(const CoocGraph& g) {
  AnchorScores s;
  s.density = compute_density(g);
  s.delta = compute_delta(g, s.density);
  auto rho_hat = detail::min_max(s.density);
  auto delta_hat = detail::min_max(s.delta);
  s.gamma.resize(g.node_count());
  for (std::size_t i = 0; i < s.gamma.size(); ++i) s.gamma[i] = rho_hat[i] * delta_hat[i];
  return s;
}

// Nodes whose gamma exceeds mean + z * stdev. Returns nothing when the
// community is below the size floor, gamma has no spread, or fewer than two
// nodes qualify.
inline std::vector<std::size_t> select_anchors(const AnchorScores& scores, const HttParams& params,
                                               std::size_t n_nodes) {
  const auto& gamma = scores.gamma;
  if (n_nodes < params.min_community_size || gamma.size() != n_nodes || n_nodes == 0) return {};
  double mean = std::accumulate(gamma.begin(), gamma.end(), 0.0) / static_cast<double>(n_nodes);
  double var = 0.0;
  for (double x : gamma) var += (x - mean) * (x - mean);
  double sd = std::sqrt(var / static_cast<double>(n_nodes));
  if (sd < params.degeneracy_epsilon) return {};
  double cut = mean + params.gamma_z * sd;
  std::vector<std::size_t> anchors;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (gamma[i] > cut) anchors.push_back(i);
  }
  if (anchors.size() < 2) return {};
  return anchors;
}

struct MemberAssignment {
  std::vector<std::optional<std::size_t>> anchor_of;  // per node; nullopt = unreachable from every anchor
  std::vector<std::size_t> unassigned;
};

// Each node joins the anchor at the shortest topological distance; ties go
// to the denser anchor, then the smaller label.
inline MemberAssignment assign_members(const CoocGraph& g, std::span<const std::size_t> anchors,
                                       std::span<const double> rho) {
  if (anchors.size() < 2) throw ContractError("assign_members needs at least two anchors");
  for (auto a : anchors) {
    if (a >= g.node_count()) throw ContractError("anchor outside graph");
  }
  const std::size_t n = g.node_count();
  MemberAssignment out;
  out.anchor_of.assign(n, std::nullopt);
  std::vector<double> best(n, kUnreachable);
  for (auto a : anchors) {
    auto dist = shortest_distances(g, a);
    for (std::size_t v = 0; v < n; ++v) {
      if (dist[v] == kUnreachable) continue;
      bool take = !out.anchor_of[v] || dist[v] < best[v] ||
                  (dist[v] == best[v] && denser(rho, a, *out.anchor_of[v]));
      if (take) {
        best[v] = dist[v];
        out.anchor_of[v] = a;
      }
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (!out.anchor_of[v]) out.unassigned.push_back(v);
  }
  return out;
}

inline MemberAssignment assign_members(const CoocGraph& g, std::span<const std::size_t> anchors) {
  return assign_members(g, anchors, compute_density(g));
}

// ---------------------------------------------------------------------------
// Tree

struct TreeNode {
  std::string anchor;
  std::vector<std::string> members;     // sorted
  std::size_t depth = 1;
  std::vector<TreeNode> children;       // ordered by anchor label
  std::vector<std::string> unassigned;  // members no child anchor could reach

  bool operator==(const TreeNode&) const = default;
};

struct TopicTree {
  std::vector<TreeNode> nodes;          // depth-1 communities
  std::vector<std::string> unassigned;  // graph nodes no depth-1 anchor could reach

  bool operator==(const TopicTree&) const = default;
};

namespace detail {

struct Split {
  std::vector<TreeNode> children;
  std::vector<std::string> unassigned;
};

inline Split split_community(const CoocGraph& sub, std::size_t depth, const HttParams& params) {
  Split out;
  if (depth > params.max_depth || sub.node_count() < params.min_community_size) return out;
  auto scores = compute_anchor_scores(sub);
  auto anchors = select_anchors(scores, params, sub.node_count());
  if (anchors.empty()) return out;
  auto assignment = assign_members(sub, anchors, scores.density);

  std::vector<std::vector<std::size_t>> groups(anchors.size());
  std::vector<std::size_t> slot(sub.node_count(), 0);
  for (std::size_t i = 0; i < anchors.size(); ++i) slot[anchors[i]] = i;
  for (std::size_t v = 0; v < sub.node_count(); ++v) {
    if (assignment.anchor_of[v]) groups[slot[*assignment.anchor_of[v]]].push_back(v);
  }
  for (auto v : assignment.unassigned) out.unassigned.push_back(sub.label(v));

  // Sibling communities are disjoint, so large ones recurse concurrently.
  constexpr std::size_t kParallelFloor = 256;
  std::vector<std::future<Split>> pending(anchors.size());
  out.children.resize(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    TreeNode& node = out.children[i];
    node.anchor = sub.label(anchors[i]);
    node.depth = depth;
    for (auto v : groups[i]) node.members.push_back(sub.label(v));
    if (depth < params.max_depth && groups[i].size() >= params.min_community_size) {
      auto child_graph = sub.induced(groups[i]);
      if (groups[i].size() >= kParallelFloor) {
        pending[i] = std::async(std::launch::async, [g = std::move(child_graph), depth, &params] {
          return split_community(g, depth + 1, params);
        });
      } else {
        auto s = split_community(child_graph, depth + 1, params);
        node.children = std::move(s.children);
        node.unassigned = std::move(s.unassigned);
      }
    }
  }
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (pending[i].valid()) {
      auto s = pending[i].get();
      out.children[i].children = std::move(s.children);
      out.children[i].unassigned = std::move(s.unassigned);
    }
  }
  return out;
}

}  // namespace detail

inline TopicTree build_topic_tree(const CoocGraph& g, const HttParams& params = {}) {
  params.validate();
  if (g.empty()) throw ContractError("build_topic_tree needs a non-empty graph");
  auto split = detail::split_community(g, 1, params);
  return {std::move(split.children), std::move(split.unassigned)};
}

// Flattens the nodes at `depth` into a per-graph-node label (-1 when the
// node has no community at that depth).
inline std::vector<int> labels_at_depth(const CoocGraph& g, const TopicTree& tree, std::size_t depth) {
  std::vector<int> out(g.node_count(), -1);
  int next = 0;
  auto visit = [&](auto&& self, const TreeNode& node) -> void {
    if (node.depth == depth) {
      for (const auto& m : node.members) out[g.index_of(m)] = next;
      ++next;
      return;
    }
    for (const auto& c : node.children) self(self, c);
  };
  for (const auto& n : tree.nodes) visit(visit, n);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline json tree_node_to_json(const TreeNode& n) {
  json children = json::array();
  for (const auto& c : n.children) children.push_back(tree_node_to_json(c));
  return {{"anchor", n.anchor},
          {"depth", n.depth},
          {"members", n.members},
          {"unassigned", n.unassigned},
          {"children", std::move(children)}};
}

inline TreeNode tree_node_from_json(const json& j) {
  TreeNode n;
  n.anchor = j.at("anchor").get<std::string>();
  n.depth = j.at("depth").get<std::size_t>();
  n.members = j.at("members").get<std::vector<std::string>>();
  n.unassigned = j.value("unassigned", std::vector<std::string>{});
  for (const auto& c : j.at("children")) n.children.push_back(tree_node_from_json(c));
  return n;
}

inline json tree_to_json(const TopicTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) nodes.push_back(tree_node_to_json(n));
  return {{"nodes", std::move(nodes)}, {"unassigned", t.unassigned}};
}

inline TopicTree tree_from_json(const json& j) {
  try {
    TopicTree t;
    for (const auto& n : j.at("nodes")) t.nodes.push_back(tree_node_from_json(n));
    t.unassigned = j.value("unassigned", std::vector<std::string>{});
    return t;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed topic tree JSON: ") + e.what());
  }
}

// One row per (member, community): node,anchor,depth,parent_anchor.
inline std::string tree_to_csv(const TopicTree& t) {
  std::string out = text::csv_line({"node", "anchor", "depth", "parent_anchor"});
  auto visit = [&](auto&& self, const TreeNode& n, const std::string& parent) -> void {
    for (const auto& m : n.members) out += text::csv_line({m, n.anchor, std::to_string(n.depth), parent});
    for (const auto& c : n.children) self(self, c, n.anchor);
  };
  for (const auto& n : t.nodes) visit(visit, n, "");
  return out;
}

}  // namespace bibliograph::htt
