#include "pollnet/graph.hpp"

#include <algorithm>
#include <stdexcept>

namespace pollnet {

SocialGraph SocialGraph::from_edges(std::size_t node_count, std::span<const Edge> edges,
                                    std::vector<std::string> labels) {
  if (!labels.empty() && labels.size() != node_count) {
    throw std::invalid_argument("SocialGraph: label count does not match node count");
  }
  std::vector<Edge> canon;
  canon.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.u >= node_count || e.v >= node_count) {
      throw std::out_of_range("SocialGraph: edge endpoint out of range");
    }
    if (e.u == e.v) {
      continue;
    }
    canon.push_back(e.u < e.v ? e : Edge{e.v, e.u});
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

  SocialGraph g;
  g.offsets_.assign(node_count + 1, 0);
  for (const Edge& e : canon) {
    ++g.offsets_[e.u + 1];
    ++g.offsets_[e.v + 1];
  }
  for (std::size_t i = 0; i < node_count; ++i) {
    g.offsets_[i + 1] += g.offsets_[i];
  }
  g.targets_.resize(canon.size() * 2);
  std::vector<std::size_t> fill(g.offsets_.begin(), g.offsets_.end() - 1);
  for (const Edge& e : canon) {
    g.targets_[fill[e.u]++] = e.v;
    g.targets_[fill[e.v]++] = e.u;
  }
  for (std::size_t v = 0; v < node_count; ++v) {
    std::sort(g.targets_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[v]),
              g.targets_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[v + 1]));
  }
  if (labels.empty()) {
    labels.reserve(node_count);
    for (std::size_t v = 0; v < node_count; ++v) {
      labels.push_back(std::to_string(v));
    }
  }
  g.labels_ = std::move(labels);
  return g;
}

bool SocialGraph::has_edge(NodeId u, NodeId v) const {
  const auto adj = neighbors(u);
  return std::binary_search(adj.begin(), adj.end(), v);
}

std::vector<Edge> SocialGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count());
  for (NodeId u = 0; u < node_count(); ++u) {
    for (const NodeId v : neighbors(u)) {
      if (u < v) {
        out.push_back({u, v});
      }
    }
  }
  return out;
}

SocialGraph SocialGraph::with_attributes(std::vector<double> values, std::string name) const {
  if (values.size() != node_count()) {
    throw std::invalid_argument("SocialGraph: attribute count does not match node count");
  }
  SocialGraph g = *this;
  g.attributes_ = std::move(values);
  g.attribute_name_ = std::move(name);
  return g;
}

SocialGraph SocialGraph::induced_subgraph(std::span<const NodeId> keep) const {
  std::vector<NodeId> sorted(keep.begin(), keep.end());
  std::sort(sorted.begin(), sorted.end());
  constexpr NodeId kAbsent = static_cast<NodeId>(-1);
  std::vector<NodeId> remap(node_count(), kAbsent);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (remap[sorted[i]] != kAbsent) {
      throw std::invalid_argument("induced_subgraph: duplicate node");
    }
    remap[sorted[i]] = static_cast<NodeId>(i);
  }
  std::vector<Edge> sub;
  std::vector<std::string> labels;
  std::vector<double> attrs;
  labels.reserve(sorted.size());
  for (const NodeId u : sorted) {
    labels.push_back(labels_[u]);
    if (has_attributes()) {
      attrs.push_back(attributes_[u]);
    }
    for (const NodeId v : neighbors(u)) {
      if (u < v && remap[v] != kAbsent) {
        sub.push_back({remap[u], remap[v]});
      }
    }
  }
  SocialGraph g = from_edges(sorted.size(), sub, std::move(labels));
  if (has_attributes()) {
    g.attributes_ = std::move(attrs);
    g.attribute_name_ = attribute_name_;
  }
  return g;
}

double SocialGraph::mean_degree() const {
  return node_count() == 0 ? 0.0
                           : 2.0 * static_cast<double>(edge_count()) /
                                 static_cast<double>(node_count());
}

}  // namespace pollnet
