#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <queue>
#include <string>
#include <vector>

#include "pollnet/graph.hpp"
#include "pollnet/rng.hpp"

namespace fixtures {

using pollnet::Edge;
using pollnet::NodeId;
using pollnet::SocialGraph;

inline SocialGraph make(std::size_t n, std::vector<Edge> edges) { return SocialGraph::from_edges(n, edges); }

inline SocialGraph path(std::size_t n) {
  std::vector<Edge> e;
  for (NodeId i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  return make(n, e);
}

inline SocialGraph complete(std::size_t n) {
  std::vector<Edge> e;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) e.push_back({i, j});
  return make(n, e);
}

inline SocialGraph star(std::size_t leaves) {
  std::vector<Edge> e;
  for (NodeId i = 1; i <= leaves; ++i) e.push_back({0, i});
  return make(leaves + 1, e);
}

inline SocialGraph triangle() { return complete(3); }

// Triangles {0,1,2} and {3,4,5} joined by the bridge 2-3.
inline SocialGraph bridge() { return make(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}, {2, 3}}); }

// Two K4 blocks {0..3}, {4..7} joined by the single edge 3-4.
inline SocialGraph twin_k4() {
  std::vector<Edge> e;
  for (NodeId base : {0u, 4u})
    for (NodeId i = 0; i < 4; ++i)
      for (NodeId j = i + 1; j < 4; ++j) e.push_back({base + i, base + j});
  e.push_back({3, 4});
  return make(8, e);
}

inline SocialGraph erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  pollnet::Rng rng(seed);
  std::vector<Edge> e;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j)
      if (rng.uniform() < p) e.push_back({i, j});
  return make(n, e);
}

// Betweenness by explicit enumeration of every shortest path between every
// unordered pair: each path contributes 1/(number of shortest paths) to its
// interior nodes.
inline std::vector<double> brute_force_betweenness(const SocialGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<double> bc(n, 0.0);
  for (NodeId s = 0; s < n; ++s) {
    std::vector<int> dist(n, -1);
    std::queue<NodeId> q;
    dist[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const NodeId v = q.front();
      q.pop();
      for (NodeId w : g.neighbors(v))
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
    }
    for (NodeId t = s + 1; t < n; ++t) {
      if (dist[t] < 0) continue;
      std::vector<std::vector<NodeId>> paths;
      std::vector<NodeId> current{s};
      std::function<void(NodeId)> walk = [&](NodeId v) {
        if (v == t) {
          paths.push_back(current);
          return;
        }
        for (NodeId w : g.neighbors(v)) {
          if (dist[w] == dist[v] + 1) {
            current.push_back(w);
            walk(w);
            current.pop_back();
          }
        }
      };
      walk(s);
      for (const auto& p : paths)
        for (std::size_t i = 1; i + 1 < p.size(); ++i) bc[p[i]] += 1.0 / static_cast<double>(paths.size());
    }
  }
  return bc;
}

// Newman-Girvan modularity from the pairwise definition.
inline double pairwise_modularity(const SocialGraph& g, const std::vector<NodeId>& c) {
  const double m2 = 2.0 * static_cast<double>(g.edge_count());
  double q = 0.0;
  for (NodeId i = 0; i < g.node_count(); ++i)
    for (NodeId j = 0; j < g.node_count(); ++j) {
      if (c[i] != c[j]) continue;
      const double a = g.has_edge(i, j) ? 1.0 : 0.0;
      q += a - static_cast<double>(g.degree(i) * g.degree(j)) / m2;
    }
  return q / m2;
}

// Visits every set partition of {0..n-1} as a restricted-growth string.
inline void for_each_partition(std::size_t n, const std::function<void(const std::vector<NodeId>&)>& visit) {
  std::vector<NodeId> a(n, 0);
  std::function<void(std::size_t, NodeId)> rec = [&](std::size_t i, NodeId max_label) {
    if (i == n) {
      visit(a);
      return;
    }
    for (NodeId l = 0; l <= max_label + 1; ++l) {
      a[i] = l;
      rec(i + 1, std::max(max_label, l));
    }
  };
  if (n == 0) return;
  a[0] = 0;
  rec(1, 0);
}

inline bool same_partition(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

// `floor` keeps vanishing gradients from turning round-off into large ratios.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({floor, std::abs(analytic), std::abs(numeric)});
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            ("pollnet-test-" + name + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
