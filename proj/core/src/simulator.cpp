#include "pollnet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pollnet::sim {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void SimulationConfig::validate() const {
  require(honesty_ratio > 0.0 && honesty_ratio < 1.0, "honesty_ratio must be in (0,1)");
  require(root_ratio > 0.0 && root_ratio < 1.0, "root_ratio must be in (0,1)");
  require(ballot_capacity > 0, "ballot_capacity must be positive");
  require(fan_out > 0, "fan_out must be positive");
  require(dishonest_action_prob >= 0.0 && dishonest_action_prob <= 1.0,
          "dishonest_action_prob must be in [0,1]");
  require(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");
  require(beta > 0.0, "beta must be positive");
}

double participation_rate(std::size_t degree, double alpha, double beta) {
  if (degree == 0) {
    throw std::invalid_argument("participation budget undefined for degree 0");
  }
  return -std::log1p(-alpha) / (beta * static_cast<double>(degree));
}

double sample_raw_participation(std::size_t degree, double alpha, double beta, Rng& rng) {
  return rng.exponential(participation_rate(degree, alpha, beta));
}

std::uint32_t sample_participation_budget(std::size_t degree, double alpha, double beta, Rng& rng) {
  const double x = std::floor(sample_raw_participation(degree, alpha, beta, rng));
  constexpr double kCeiling = 1e9;
  return static_cast<std::uint32_t>(std::clamp(x, 1.0, kCeiling));
}

std::vector<NodeProfile> assign_roles(const SocialGraph& graph, const std::vector<bool>& eligible,
                                      const analytics::CentralityVector& centrality,
                                      const SimulationConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t n = graph.node_count();
  if (eligible.size() != n || centrality.scores.size() != n) {
    throw std::invalid_argument("assign_roles: labels and centrality must cover every node");
  }
  std::vector<NodeProfile> profiles(n);
  for (NodeId v = 0; v < n; ++v) profiles[v].eligible = eligible[v];

  const auto honest_count = static_cast<std::size_t>(std::llround(config.honesty_ratio * static_cast<double>(n)));
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  Rng honesty_rng = Rng::derive(seed, "roles.honesty");
  honesty_rng.shuffle(std::span<NodeId>(order));
  for (std::size_t i = 0; i < honest_count && i < n; ++i) profiles[order[i]].honest = true;

  // The epsilon keeps products like 0.01 * 1000 from rounding up to 11.
  const auto root_count = static_cast<std::size_t>(
      std::ceil(config.root_ratio * static_cast<double>(n) - 1e-9));
  std::vector<NodeId> candidates;
  for (NodeId v = 0; v < n; ++v) {
    if (profiles[v].honest && profiles[v].eligible) candidates.push_back(v);
  }
  if (candidates.size() < root_count) {
    throw std::runtime_error("assign_roles: " + std::to_string(root_count) +
                             " roots required but only " + std::to_string(candidates.size()) +
                             " honest and eligible nodes exist");
  }
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(root_count),
                    candidates.end(), [&](NodeId a, NodeId b) {
                      const double sa = centrality.scores[a];
                      const double sb = centrality.scores[b];
                      return sa != sb ? sa > sb : a < b;
                    });

  Rng budget_rng = Rng::derive(seed, "roles.budget");
  for (NodeId v = 0; v < n; ++v) {
    const std::size_t d = graph.degree(v);
    profiles[v].participation_budget =
        d == 0 ? 0 : sample_participation_budget(d, config.alpha, config.beta, budget_rng);
  }
  for (std::size_t i = 0; i < root_count; ++i) {
    auto& p = profiles[candidates[i]];
    p.is_root = true;
    p.participation_budget += config.root_bonus_participations;
  }
  return profiles;
}

bool BallotUnit::visited(NodeId v) const {
  return std::find(lineage.begin(), lineage.end(), v) != lineage.end();
}

std::vector<NodeId> select_forward_targets(NodeId node, const BallotUnit& ballot,
                                           std::vector<NodeProfile>& profiles,
                                           const SocialGraph& graph, const SimulationConfig& config,
                                           Rng& rng) {
  auto& self = profiles[node];
  const double draw = rng.uniform();
  const bool malicious = !self.honest && draw < config.dishonest_action_prob;
  const auto adj = graph.neighbors(node);
  std::vector<NodeId> picked;
  if (adj.empty()) return picked;

  // Pool: eligible neighbors, except for malicious actions. A malicious
  // ineligible node targets ineligible neighbors and falls back to eligible
  // ones only when no ineligible candidate is left.
  bool want_eligible = true;
  bool any_neighbor = false;
  if (malicious) {
    if (self.eligible) {
      any_neighbor = true;
    } else {
      const bool has_ineligible = std::any_of(adj.begin(), adj.end(), [&](NodeId x) {
        return !profiles[x].eligible && !ballot.visited(x);
      });
      want_eligible = !has_ineligible;
    }
  }
  const auto allowed = [&](NodeId x) {
    return (any_neighbor || profiles[x].eligible == want_eligible) && !ballot.visited(x);
  };

  const std::size_t d = adj.size();
  const std::size_t start = self.rr_cursor % d;
  std::size_t last = start;
  for (std::size_t i = 0; i < d && picked.size() < config.fan_out; ++i) {
    const std::size_t idx = (start + i) % d;
    if (allowed(adj[idx])) {
      picked.push_back(adj[idx]);
      last = idx;
    }
  }
  if (!picked.empty()) {
    self.rr_cursor = static_cast<std::uint32_t>((last + 1) % d);
  }
  return picked;
}

DisseminationTrace run_dissemination(const SocialGraph& graph, std::vector<NodeProfile> profiles,
                                     const SimulationConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t n = graph.node_count();
  if (profiles.size() != n) {
    throw std::invalid_argument("run_dissemination: profile count does not match graph");
  }
  struct Delivery {
    NodeId node;
    BallotUnit ballot;
  };

  DisseminationTrace trace;
  trace.node_count = n;
  trace.received.assign(n, 0);
  std::deque<Delivery> queue;
  for (NodeId v = 0; v < n; ++v) {
    if (!profiles[v].is_root) continue;
    trace.roots.push_back(v);
    for (std::uint32_t i = 0; i < config.ballots_per_root; ++i) {
      BallotUnit b;
      b.id = trace.ballot_parent.size();
      b.root_origin = v;
      b.remaining_capacity = config.ballot_capacity;
      trace.ballot_parent.push_back(b.id);
      queue.push_back({v, std::move(b)});
    }
  }

  Rng rng = Rng::derive(seed, "simulation.forwarding");
  std::uint64_t deliveries = 0;
  while (!queue.empty()) {
    Delivery current = std::move(queue.front());
    queue.pop_front();
    if (++deliveries > config.max_deliveries) {
      throw std::runtime_error("run_dissemination: delivery limit exceeded");
    }
    const NodeId v = current.node;
    BallotUnit& b = current.ballot;
    NodeProfile& self = profiles[v];
    ++trace.received[v];
    b.lineage.push_back(v);

    if (self.participations_used < self.participation_budget && b.remaining_capacity > 0) {
      ++self.participations_used;
      --b.remaining_capacity;
      trace.events.push_back({EventKind::participate, b.hop_count, v, v, b.id, b.id});
    }
    if (b.remaining_capacity == 0 || b.hop_count >= config.hop_cap) continue;
    if (config.forwarding_uses_budget && self.forwards_used >= self.participation_budget) continue;

    auto targets = select_forward_targets(v, b, profiles, graph, config, rng);
    if (targets.empty()) continue;
    ++self.forwards_used;
    std::sort(targets.begin(), targets.end());
    for (const NodeId t : targets) {
      BallotUnit child;
      child.id = trace.ballot_parent.size();
      child.root_origin = b.root_origin;
      child.remaining_capacity = b.remaining_capacity;
      child.hop_count = b.hop_count + 1;
      child.lineage = b.lineage;
      trace.ballot_parent.push_back(b.id);
      trace.events.push_back({EventKind::forward, b.hop_count, v, t, child.id, b.id});
      queue.push_back({t, std::move(child)});
    }
  }
  return trace;
}

std::uint64_t trace_hash(const DisseminationTrace& trace) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](std::uint64_t value) {
    for (int i = 0; i < 8; ++i) {
      h ^= (value >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(trace.node_count);
  for (const NodeId r : trace.roots) mix(r);
  for (const Event& e : trace.events) {
    mix(static_cast<std::uint64_t>(e.kind));
    mix(e.step);
    mix(e.node);
    mix(e.target);
    mix(e.ballot);
    mix(e.parent);
  }
  for (const auto r : trace.received) mix(r);
  return h;
}

double coverage(const DisseminationTrace& trace, const SocialGraph& graph) {
  if (graph.empty()) return 0.0;
  const auto reached = std::count_if(trace.received.begin(), trace.received.end(),
                                     [](std::uint32_t r) { return r > 0; });
  return static_cast<double>(reached) / static_cast<double>(graph.node_count());
}

ParticipationHistogram participation_histogram(const DisseminationTrace& trace) {
  std::vector<std::uint32_t> counts(trace.node_count, 0);
  for (const Event& e : trace.events) {
    if (e.kind == EventKind::participate) ++counts[e.node];
  }
  std::vector<bool> is_root(trace.node_count, false);
  for (const NodeId r : trace.roots) is_root[r] = true;
  ParticipationHistogram hist;
  for (NodeId v = 0; v < trace.node_count; ++v) {
    if (counts[v] == 0) continue;
    ++(is_root[v] ? hist.root : hist.non_root)[counts[v]];
  }
  return hist;
}

SocialGraph DisseminationGraph::undirected_view() const {
  std::vector<Edge> edges;
  edges.reserve(arcs.size());
  for (const auto& a : arcs) edges.push_back({a.from, a.to});
  std::vector<std::string> labels;
  labels.reserve(social_id.size());
  for (const NodeId s : social_id) labels.push_back(std::to_string(s));
  return SocialGraph::from_edges(social_id.size(), edges, std::move(labels));
}

DisseminationGraph build_dissemination_graph(const DisseminationTrace& trace,
                                             const std::vector<bool>& eligible) {
  if (trace.events.empty()) {
    throw std::invalid_argument("build_dissemination_graph: trace has no events");
  }
  if (eligible.size() != trace.node_count) {
    throw std::invalid_argument("build_dissemination_graph: label count does not match trace");
  }
  std::vector<bool> present(trace.node_count, false);
  for (const Event& e : trace.events) {
    present[e.node] = true;
    present[e.target] = true;
  }
  DisseminationGraph g;
  constexpr NodeId kAbsent = static_cast<NodeId>(-1);
  std::vector<NodeId> local(trace.node_count, kAbsent);
  for (NodeId v = 0; v < trace.node_count; ++v) {
    if (!present[v]) continue;
    local[v] = static_cast<NodeId>(g.social_id.size());
    g.social_id.push_back(v);
    g.eligible.push_back(eligible[v]);
  }
  const std::size_t n = g.social_id.size();
  g.participated.assign(n, false);
  g.participations.assign(n, 0);
  g.official_ballot.assign(n, std::nullopt);
  std::map<std::pair<NodeId, NodeId>, std::uint32_t> multiplicity;
  for (const Event& e : trace.events) {
    if (e.kind == EventKind::forward) {
      ++multiplicity[{local[e.node], local[e.target]}];
    } else {
      const NodeId v = local[e.node];
      g.participated[v] = true;
      ++g.participations[v];
      g.official_ballot[v] = e.ballot;
    }
  }
  g.arcs.reserve(multiplicity.size());
  for (const auto& [key, w] : multiplicity) g.arcs.push_back({key.first, key.second, w});
  return g;
}

}  // namespace pollnet::sim
