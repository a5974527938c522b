#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "pollnet/graph.hpp"

namespace pollnet::analytics {

enum class CentralityKind { degree, betweenness_exact, betweenness_sampled };

struct CentralityVector {
  CentralityKind kind = CentralityKind::degree;
  std::vector<double> scores;
};

CentralityVector degree_centrality(const SocialGraph& graph);

enum class BetweennessMode { exact, sampled };

struct BetweennessOptions {
  BetweennessMode mode = BetweennessMode::exact;
  /// Number of distinct source nodes drawn in sampled mode.
  std::size_t pivots = 256;
  std::uint64_t seed = 0;
  /// Worker threads; 0 = hardware concurrency. The result does not depend
  /// on this value.
  unsigned threads = 1;
};

/// Unnormalized shortest-path betweenness on an unweighted undirected graph,
/// each unordered pair counted once. Sampled mode accumulates dependencies
/// from `pivots` sources drawn without replacement and scales by N/pivots.
CentralityVector betweenness(const SocialGraph& graph, const BetweennessOptions& options = {});

/// Exact below `sampling_threshold` nodes, sampled with 256 pivots above.
BetweennessOptions default_betweenness_options(const SocialGraph& graph, std::uint64_t seed,
                                               std::size_t sampling_threshold = 50'000);

double local_clustering(const SocialGraph& graph, NodeId v);
double average_clustering(const SocialGraph& graph);

/// Raw rich-club coefficient over nodes with degree > k; nullopt when fewer
/// than two nodes qualify.
std::optional<double> rich_club(const SocialGraph& graph, std::size_t k);

/// phi(k) for k = 0 .. max_degree-1 (entries may be nullopt).
std::vector<std::optional<double>> rich_club_profile(const SocialGraph& graph);

struct Partition {
  /// node -> community id, ids dense in order of first appearance by node id
  std::vector<NodeId> community;
  double modularity = 0.0;
  std::size_t levels = 0;

  std::size_t community_count() const;
  std::vector<std::size_t> community_sizes() const;
};

/// Newman-Girvan modularity of an assignment on an unweighted graph.
double modularity(const SocialGraph& graph, const std::vector<NodeId>& community);

/// Multi-level greedy modularity optimization (Louvain). Node visitation
/// order at each level is a seeded permutation.
Partition louvain_communities(const SocialGraph& graph, std::uint64_t seed);

struct StructureReport {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  double mean_degree = 0.0;
  double average_clustering = 0.0;
  std::map<std::size_t, std::optional<double>> rich_club;
  std::vector<std::size_t> community_sizes;
  double modularity = 0.0;
};

StructureReport structure_report(const SocialGraph& graph, std::uint64_t seed);

}  // namespace pollnet::analytics
