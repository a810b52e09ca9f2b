#pragma once

// Independent reference computations used to check the library. Everything
// here works on dense matrices or brute-force enumeration and shares no code
// path with the implementations under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "bibliograph/network.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix dense(const bibliograph::CoocGraph& g) {
  std::size_t n = g.node_count();
  Matrix a(n, std::vector<double>(n, 0.0));
  for (const auto& e : g.edges()) {
    a[e.a][e.b] = e.weight;
    a[e.b][e.a] = e.weight;
  }
  return a;
}

// Weighted degree summed over the dense row in column order.
inline std::vector<double> weighted_degree(const Matrix& a) {
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (a[i][j] != 0.0) out[i] += a[i][j];
    }
  }
  return out;
}

inline Matrix floyd_warshall(const Matrix& a) {
  std::size_t n = a.size();
  const double inf = std::numeric_limits<double>::infinity();
  Matrix d(n, std::vector<double>(n, inf));
  for (std::size_t i = 0; i < n; ++i) {
    d[i][i] = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (a[i][j] > 0.0) d[i][j] = 1.0 / a[i][j];
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
      }
    }
  }
  return d;
}

// Delta from the all-pairs table: distance to the nearest denser node
// (density ties resolved by label order, i.e. lower index is denser); the
// global peak and nodes with no reachable denser node take the largest
// finite delta of the other nodes, or 1 when there is none.
inline std::vector<double> delta(const Matrix& a, const std::vector<double>& rho) {
  std::size_t n = a.size();
  auto d = floyd_warshall(a);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> out(n, inf);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t u = 0; u < n; ++u) {
      bool denser = rho[u] > rho[v] || (rho[u] == rho[v] && u < v);
      if (denser && d[v][u] < out[v]) out[v] = d[v][u];
    }
  }
  double fill = -1.0;
  for (double x : out) {
    if (x != inf) fill = std::max(fill, x);
  }
  if (fill < 0.0) fill = 1.0;
  for (double& x : out) {
    if (x == inf) x = fill;
  }
  return out;
}

// Q = 1/(2m) * sum_ij [A_ij - k_i k_j / (2m)] [c_i == c_j]
inline double modularity(const Matrix& a, const std::vector<int>& comm) {
  std::size_t n = a.size();
  auto k = weighted_degree(a);
  double two_m = 0.0;
  for (double x : k) two_m += x;
  if (two_m == 0.0) return 0.0;
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (comm[i] == comm[j]) q += a[i][j] - k[i] * k[j] / two_m;
    }
  }
  return q / two_m;
}

// Best modularity over every set partition (restricted growth strings).
inline double best_modularity(const Matrix& a) {
  std::size_t n = a.size();
  if (n == 0) return 0.0;
  std::vector<int> rgs(n, 0), maxv(n, 0);
  double best = -1.0;
  while (true) {
    best = std::max(best, modularity(a, rgs));
    std::size_t i = n - 1;
    while (i > 0 && rgs[i] == maxv[i - 1] + 1) --i;
    if (i == 0) break;
    ++rgs[i];
    maxv[i] = std::max(maxv[i - 1], rgs[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      rgs[j] = 0;
      maxv[j] = maxv[i];
    }
  }
  return best;
}

inline double adjusted_rand_index(const std::vector<int>& x, const std::vector<int>& y) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < x.size(); ++i) {
    joint[{x[i], y[i]}] += 1;
    rows[x[i]] += 1;
    cols[y[i]] += 1;
  }
  auto c2 = [](double v) { return v * (v - 1) / 2; };
  double index = 0, a = 0, b = 0;
  for (auto& [k, v] : joint) index += c2(v);
  for (auto& [k, v] : rows) a += c2(v);
  for (auto& [k, v] : cols) b += c2(v);
  double total = c2(static_cast<double>(x.size()));
  double expected = total > 0 ? a * b / total : 0;
  double max_index = (a + b) / 2;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

// Random graph with labels "n00".."nNN", edge probability p and weights
// drawn from [0.1, 5.0] (optionally rounded to integers).
inline bibliograph::CoocGraph random_graph(std::mt19937_64& rng, std::size_t n, double p, bool integer_weights = false) {
  std::map<std::string, std::size_t> nodes;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "n%02zu", i);
    labels.emplace_back(buf);
    nodes.emplace(buf, 1);
  }
  std::bernoulli_distribution edge(p);
  std::uniform_real_distribution<double> weight(0.1, 5.0);
  std::map<bibliograph::CoocGraph::LabelPair, double> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!edge(rng)) continue;
      double w = weight(rng);
      if (integer_weights) w = std::max(1.0, std::round(w));
      edges.emplace(bibliograph::CoocGraph::LabelPair{labels[i], labels[j]}, w);
    }
  }
  return bibliograph::CoocGraph::from_parts(bibliograph::EntityUnit::term, nodes, edges);
}

}  // namespace oracle
