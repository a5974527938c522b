#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pollnet {

using NodeId = std::uint32_t;

struct Edge {
  NodeId u;
  NodeId v;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Undirected simple graph in compressed adjacency form, with an optional
/// numeric attribute per node and the original (pre-remapping) node labels.
///
/// Neighbor lists are sorted and deduplicated; self-loops are never stored.
/// Instances are immutable once built and safe to share across threads.
class SocialGraph {
 public:
  SocialGraph() = default;

  /// Builds a graph over nodes 0..node_count-1. Self-loops and duplicate
  /// edges (in either orientation) are dropped. `labels`, when given, must
  /// have node_count entries; otherwise labels default to the dense ids.
  static SocialGraph from_edges(std::size_t node_count, std::span<const Edge> edges,
                                std::vector<std::string> labels = {});

  std::size_t node_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t edge_count() const { return targets_.size() / 2; }
  bool empty() const { return node_count() == 0; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {targets_.data() + offsets_[v], targets_.data() + offsets_[v + 1]};
  }
  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(NodeId u, NodeId v) const;

  /// Edges with u < v, sorted lexicographically.
  std::vector<Edge> edges() const;

  const std::string& label(NodeId v) const { return labels_[v]; }
  const std::vector<std::string>& labels() const { return labels_; }

  bool has_attributes() const { return !attributes_.empty(); }
  double attribute(NodeId v) const { return attributes_[v]; }
  std::span<const double> attributes() const { return attributes_; }
  const std::string& attribute_name() const { return attribute_name_; }

  /// Returns a copy carrying the given attribute column (one value per node).
  SocialGraph with_attributes(std::vector<double> values, std::string name) const;

  /// Induced subgraph on `keep` (any order, no duplicates). Nodes are
  /// re-densified in ascending order of their current id; labels and
  /// attributes follow their nodes.
  SocialGraph induced_subgraph(std::span<const NodeId> keep) const;

  double mean_degree() const;

  friend bool operator==(const SocialGraph&, const SocialGraph&) = default;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> targets_;
  std::vector<std::string> labels_;
  std::vector<double> attributes_;
  std::string attribute_name_;
};

}  // namespace pollnet
