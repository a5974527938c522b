#include "pollnet/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "pollnet/rng.hpp"

namespace pollnet::analytics {
namespace {

// Sources per reduction chunk. Partial sums are always formed per chunk and
// added in chunk order, which makes the result independent of thread count.
constexpr std::size_t kSourcesPerChunk = 32;

struct BrandesWorkspace {
  explicit BrandesWorkspace(std::size_t n) : sigma(n), delta(n), dist(n), order() { order.reserve(n); }

  std::vector<double> sigma;
  std::vector<double> delta;
  std::vector<std::int64_t> dist;
  std::vector<NodeId> order;
};

void accumulate_source(const SocialGraph& g, NodeId s, BrandesWorkspace& ws,
                       std::vector<double>& into) {
  std::fill(ws.sigma.begin(), ws.sigma.end(), 0.0);
  std::fill(ws.delta.begin(), ws.delta.end(), 0.0);
  std::fill(ws.dist.begin(), ws.dist.end(), -1);
  ws.order.clear();

  ws.sigma[s] = 1.0;
  ws.dist[s] = 0;
  ws.order.push_back(s);
  for (std::size_t head = 0; head < ws.order.size(); ++head) {
    const NodeId v = ws.order[head];
    for (const NodeId w : g.neighbors(v)) {
      if (ws.dist[w] < 0) {
        ws.dist[w] = ws.dist[v] + 1;
        ws.order.push_back(w);
      }
      if (ws.dist[w] == ws.dist[v] + 1) {
        ws.sigma[w] += ws.sigma[v];
      }
    }
  }
  for (std::size_t i = ws.order.size(); i-- > 0;) {
    const NodeId w = ws.order[i];
    for (const NodeId v : g.neighbors(w)) {
      if (ws.dist[v] == ws.dist[w] - 1) {
        ws.delta[v] += ws.sigma[v] / ws.sigma[w] * (1.0 + ws.delta[w]);
      }
    }
    if (w != s) {
      into[w] += ws.delta[w];
    }
  }
}

std::vector<double> accumulate_sources(const SocialGraph& g, const std::vector<NodeId>& sources,
                                       unsigned threads) {
  const std::size_t n = g.node_count();
  std::vector<double> total(n, 0.0);
  const std::size_t chunks = (sources.size() + kSourcesPerChunk - 1) / kSourcesPerChunk;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t wave = std::max<std::size_t>(1, threads);

  std::vector<std::vector<double>> partial(std::min(wave, chunks), std::vector<double>(n));
  for (std::size_t first = 0; first < chunks; first += wave) {
    const std::size_t count = std::min(wave, chunks - first);
    const auto run_chunk = [&](std::size_t slot) {
      BrandesWorkspace ws(n);
      auto& into = partial[slot];
      std::fill(into.begin(), into.end(), 0.0);
      const std::size_t c = first + slot;
      const std::size_t end = std::min(sources.size(), (c + 1) * kSourcesPerChunk);
      for (std::size_t i = c * kSourcesPerChunk; i < end; ++i) {
        accumulate_source(g, sources[i], ws, into);
      }
    };
    if (count == 1) {
      run_chunk(0);
    } else {
      std::vector<std::jthread> workers;
      workers.reserve(count);
      for (std::size_t slot = 0; slot < count; ++slot) {
        workers.emplace_back(run_chunk, slot);
      }
    }
    for (std::size_t slot = 0; slot < count; ++slot) {
      for (std::size_t v = 0; v < n; ++v) total[v] += partial[slot][v];
    }
  }
  return total;
}

struct WeightedGraph {
  std::vector<std::vector<std::pair<NodeId, double>>> adj;  // no self entries
  std::vector<double> self_loop;                            // weight of loop edges
  std::vector<double> strength;                             // incl. 2 * self_loop
  double total = 0.0;                                       // 2m

  std::size_t size() const { return adj.size(); }
};

WeightedGraph to_weighted(const SocialGraph& g) {
  WeightedGraph w;
  const std::size_t n = g.node_count();
  w.adj.resize(n);
  w.self_loop.assign(n, 0.0);
  w.strength.assign(n, 0.0);
  for (NodeId v = 0; v < n; ++v) {
    for (const NodeId u : g.neighbors(v)) w.adj[v].emplace_back(u, 1.0);
    w.strength[v] = static_cast<double>(g.degree(v));
    w.total += w.strength[v];
  }
  return w;
}

// One round of local moving. Returns true if any node changed community.
bool local_moving(const WeightedGraph& g, std::vector<NodeId>& comm, Rng& rng) {
  const std::size_t n = g.size();
  std::vector<double> tot(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) tot[comm[i]] += g.strength[i];

  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  rng.shuffle(std::span<NodeId>(order));

  std::vector<double> link(n, 0.0);
  std::vector<NodeId> touched;
  bool any_move = false;
  bool improved = true;
  const double m2 = g.total;
  while (improved) {
    improved = false;
    for (const NodeId i : order) {
      const NodeId own = comm[i];
      const double k = g.strength[i];
      touched.clear();
      for (const auto& [j, w] : g.adj[i]) {
        const NodeId c = comm[j];
        if (link[c] == 0.0) touched.push_back(c);
        link[c] += w;
      }
      tot[own] -= k;
      // Staying put is the baseline; another community must be strictly better.
      NodeId best = own;
      double best_gain = link[own] - tot[own] * k / m2;
      for (const NodeId c : touched) {
        const double gain = link[c] - tot[c] * k / m2;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best = c;
        }
      }
      tot[best] += k;
      for (const NodeId c : touched) link[c] = 0.0;
      link[own] = 0.0;
      if (best != own) {
        comm[i] = best;
        improved = true;
        any_move = true;
      }
    }
  }
  return any_move;
}

std::vector<NodeId> renumber(std::vector<NodeId>& comm) {
  std::vector<NodeId> map(comm.size(), static_cast<NodeId>(-1));
  NodeId next = 0;
  for (auto& c : comm) {
    if (map[c] == static_cast<NodeId>(-1)) map[c] = next++;
    c = map[c];
  }
  return map;
}

WeightedGraph aggregate(const WeightedGraph& g, const std::vector<NodeId>& comm, std::size_t k) {
  WeightedGraph out;
  out.adj.resize(k);
  out.self_loop.assign(k, 0.0);
  out.strength.assign(k, 0.0);
  out.total = g.total;
  std::vector<std::map<NodeId, double>> links(k);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const NodeId ci = comm[i];
    out.strength[ci] += g.strength[i];
    out.self_loop[ci] += g.self_loop[i];
    for (const auto& [j, w] : g.adj[i]) {
      const NodeId cj = comm[j];
      if (ci == cj) {
        // Each internal edge is seen from both ends.
        out.self_loop[ci] += w / 2.0;
      } else {
        links[ci][cj] += w;
      }
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    out.adj[c].assign(links[c].begin(), links[c].end());
  }
  return out;
}

}  // namespace

CentralityVector degree_centrality(const SocialGraph& graph) {
  CentralityVector out{CentralityKind::degree, std::vector<double>(graph.node_count())};
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    out.scores[v] = static_cast<double>(graph.degree(v));
  }
  return out;
}

CentralityVector betweenness(const SocialGraph& graph, const BetweennessOptions& options) {
  const std::size_t n = graph.node_count();
  std::vector<NodeId> sources(n);
  std::iota(sources.begin(), sources.end(), NodeId{0});
  double scale = 0.5;  // each unordered pair is reached from both endpoints
  CentralityKind kind = CentralityKind::betweenness_exact;
  if (options.mode == BetweennessMode::sampled) {
    if (options.pivots == 0) {
      throw std::invalid_argument("betweenness: pivots must be positive in sampled mode");
    }
    if (options.pivots > n) {
      throw std::invalid_argument("betweenness: more pivots than nodes");
    }
    Rng rng = Rng::derive(options.seed, "betweenness.pivots");
    // Partial Fisher-Yates: the first `pivots` slots are a uniform sample.
    for (std::size_t i = 0; i < options.pivots; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(sources[i], sources[j]);
    }
    sources.resize(options.pivots);
    std::sort(sources.begin(), sources.end());
    scale *= static_cast<double>(n) / static_cast<double>(options.pivots);
    kind = CentralityKind::betweenness_sampled;
  }
  CentralityVector out{kind, accumulate_sources(graph, sources, options.threads)};
  for (auto& s : out.scores) s *= scale;
  return out;
}

BetweennessOptions default_betweenness_options(const SocialGraph& graph, std::uint64_t seed,
                                               std::size_t sampling_threshold) {
  BetweennessOptions options;
  options.seed = seed;
  if (graph.node_count() > sampling_threshold) {
    options.mode = BetweennessMode::sampled;
    options.pivots = 256;
  }
  return options;
}

double local_clustering(const SocialGraph& graph, NodeId v) {
  const auto adj = graph.neighbors(v);
  const std::size_t d = adj.size();
  if (d < 2) return 0.0;
  std::size_t links = 0;
  for (std::size_t i = 0; i < d; ++i) {
    const auto other = graph.neighbors(adj[i]);
    // Count neighbors of adj[i] that are also neighbors of v and come after it.
    auto a = adj.begin() + static_cast<std::ptrdiff_t>(i) + 1;
    auto b = std::upper_bound(other.begin(), other.end(), adj[i]);
    while (a != adj.end() && b != other.end()) {
      if (*a < *b) {
        ++a;
      } else if (*b < *a) {
        ++b;
      } else {
        ++links;
        ++a;
        ++b;
      }
    }
  }
  return 2.0 * static_cast<double>(links) / (static_cast<double>(d) * static_cast<double>(d - 1));
}

double average_clustering(const SocialGraph& graph) {
  if (graph.empty()) return 0.0;
  double sum = 0.0;
  for (NodeId v = 0; v < graph.node_count(); ++v) sum += local_clustering(graph, v);
  return sum / static_cast<double>(graph.node_count());
}

std::optional<double> rich_club(const SocialGraph& graph, std::size_t k) {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    if (graph.degree(v) <= k) continue;
    ++nodes;
    for (const NodeId u : graph.neighbors(v)) {
      if (u > v && graph.degree(u) > k) ++edges;
    }
  }
  if (nodes < 2) return std::nullopt;
  return 2.0 * static_cast<double>(edges) /
         (static_cast<double>(nodes) * static_cast<double>(nodes - 1));
}

std::vector<std::optional<double>> rich_club_profile(const SocialGraph& graph) {
  std::size_t max_degree = 0;
  for (NodeId v = 0; v < graph.node_count(); ++v) max_degree = std::max(max_degree, graph.degree(v));
  // nodes_with[d] / edges_with[d]: nodes of degree d, edges whose smaller endpoint degree is d.
  std::vector<std::size_t> nodes_with(max_degree + 1, 0);
  std::vector<std::size_t> edges_with(max_degree + 1, 0);
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    ++nodes_with[graph.degree(v)];
    for (const NodeId u : graph.neighbors(v)) {
      if (u > v) ++edges_with[std::min(graph.degree(u), graph.degree(v))];
    }
  }
  std::vector<std::optional<double>> out(max_degree);
  std::size_t nodes_above = 0;
  std::size_t edges_above = 0;
  for (std::size_t k = max_degree; k-- > 0;) {
    nodes_above += nodes_with[k + 1];
    edges_above += edges_with[k + 1];
    if (nodes_above >= 2) {
      out[k] = 2.0 * static_cast<double>(edges_above) /
               (static_cast<double>(nodes_above) * static_cast<double>(nodes_above - 1));
    }
  }
  return out;
}

std::size_t Partition::community_count() const {
  return community.empty() ? 0 : *std::max_element(community.begin(), community.end()) + 1;
}

std::vector<std::size_t> Partition::community_sizes() const {
  std::vector<std::size_t> sizes(community_count(), 0);
  for (const NodeId c : community) ++sizes[c];
  return sizes;
}

double modularity(const SocialGraph& graph, const std::vector<NodeId>& community) {
  if (community.size() != graph.node_count()) {
    throw std::invalid_argument("modularity: assignment size mismatch");
  }
  const double m = static_cast<double>(graph.edge_count());
  if (m == 0.0) return 0.0;
  std::size_t k = 0;
  for (const NodeId c : community) k = std::max<std::size_t>(k, c + 1);
  std::vector<double> internal(k, 0.0);
  std::vector<double> degree_sum(k, 0.0);
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    degree_sum[community[v]] += static_cast<double>(graph.degree(v));
    for (const NodeId u : graph.neighbors(v)) {
      if (u > v && community[u] == community[v]) internal[community[v]] += 1.0;
    }
  }
  double q = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double share = degree_sum[c] / (2.0 * m);
    q += internal[c] / m - share * share;
  }
  return q;
}

Partition louvain_communities(const SocialGraph& graph, std::uint64_t seed) {
  const std::size_t n = graph.node_count();
  Partition result;
  result.community.resize(n);
  std::iota(result.community.begin(), result.community.end(), NodeId{0});
  if (graph.edge_count() == 0) {
    result.modularity = modularity(graph, result.community);
    return result;
  }

  WeightedGraph level = to_weighted(graph);
  for (std::size_t depth = 0;; ++depth) {
    std::vector<NodeId> comm(level.size());
    std::iota(comm.begin(), comm.end(), NodeId{0});
    Rng rng = Rng::derive(seed, "louvain.order", depth);
    const bool moved = local_moving(level, comm, rng);
    if (!moved) break;
    renumber(comm);
    const std::size_t k = *std::max_element(comm.begin(), comm.end()) + 1;
    for (auto& c : result.community) c = comm[c];
    ++result.levels;
    if (k == level.size()) break;
    level = aggregate(level, comm, k);
  }
  renumber(result.community);
  result.modularity = modularity(graph, result.community);
  return result;
}

StructureReport structure_report(const SocialGraph& graph, std::uint64_t seed) {
  StructureReport report;
  report.node_count = graph.node_count();
  report.edge_count = graph.edge_count();
  report.mean_degree = graph.mean_degree();
  report.average_clustering = average_clustering(graph);
  const auto profile = rich_club_profile(graph);
  for (std::size_t k = 0; k < profile.size(); ++k) report.rich_club[k] = profile[k];
  const Partition partition = louvain_communities(graph, seed);
  report.community_sizes = partition.community_sizes();
  std::sort(report.community_sizes.begin(), report.community_sizes.end(), std::greater<>());
  report.modularity = partition.modularity;
  return report;
}

}  // namespace pollnet::analytics
