#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "pollnet/analytics.hpp"
#include "pollnet/graph.hpp"
#include "pollnet/rng.hpp"

namespace pollnet::sim {

struct SimulationConfig {
  double honesty_ratio = 0.8;
  double root_ratio = 0.05;
  std::uint32_t ballots_per_root = 30;
  std::uint32_t root_bonus_participations = 30;
  std::uint32_t ballot_capacity = 7;
  std::uint32_t fan_out = 2;
  /// Probability that a dishonest node acts maliciously on a given ballot.
  double dishonest_action_prob = 0.5;
  std::uint32_t hop_cap = 50;
  double alpha = 0.9;
  double beta = 0.1;
  /// When set, a node forwards on at most `participation_budget` deliveries
  /// (counted separately from participations). Without it, ballots whose
  /// capacity is never drawn down keep branching until hop_cap and the run
  /// grows exponentially.
  bool forwarding_uses_budget = true;
  /// Hard stop for runs with forwarding_uses_budget = false.
  std::uint64_t max_deliveries = 50'000'000;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

struct NodeProfile {
  bool eligible = false;
  bool honest = false;
  bool is_root = false;
  std::uint32_t participation_budget = 0;
  std::uint32_t rr_cursor = 0;
  std::uint32_t participations_used = 0;
  std::uint32_t forwards_used = 0;
};

/// Rate of the degree-parameterized exponential: -ln(1 - alpha) / (beta * d).
double participation_rate(std::size_t degree, double alpha, double beta);

/// Unfloored exponential draw; exposed for checking the sampling law.
double sample_raw_participation(std::size_t degree, double alpha, double beta, Rng& rng);

/// max(floor(X), 1) with X ~ Exp(participation_rate(d)). Throws for d == 0.
std::uint32_t sample_participation_budget(std::size_t degree, double alpha, double beta, Rng& rng);

/// Honesty by uniform shuffle (round(honesty_ratio * N) honest nodes), roots
/// as the ceil(root_ratio * N) most central honest-and-eligible nodes (ties
/// by lower id), budgets from the participation law plus the root bonus.
/// Isolated nodes get a zero budget.
std::vector<NodeProfile> assign_roles(const SocialGraph& graph, const std::vector<bool>& eligible,
                                      const analytics::CentralityVector& centrality,
                                      const SimulationConfig& config, std::uint64_t seed);

struct BallotUnit {
  std::uint64_t id = 0;
  NodeId root_origin = 0;
  std::uint32_t remaining_capacity = 0;
  std::uint32_t hop_count = 0;
  std::vector<NodeId> lineage;

  bool visited(NodeId v) const;
};

/// Round-robin pick of up to fan_out targets for `node` holding `ballot`.
/// Advances profiles[node].rr_cursor past the last neighbor taken. Always
/// consumes exactly one uniform draw from `rng`.
std::vector<NodeId> select_forward_targets(NodeId node, const BallotUnit& ballot,
                                           std::vector<NodeProfile>& profiles,
                                           const SocialGraph& graph, const SimulationConfig& config,
                                           Rng& rng);

enum class EventKind : std::uint8_t { forward, participate };

struct Event {
  EventKind kind = EventKind::forward;
  std::uint32_t step = 0;
  /// sender (forward) or participant (participate)
  NodeId node = 0;
  /// receiver; equals `node` for participate events
  NodeId target = 0;
  /// forward: id of the child copy sent; participate: ballot acted on
  std::uint64_t ballot = 0;
  /// forward: ballot the sender held; participate: same as `ballot`
  std::uint64_t parent = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

struct DisseminationTrace {
  std::size_t node_count = 0;
  std::vector<NodeId> roots;
  std::vector<Event> events;
  std::vector<std::uint32_t> received;
  /// ballot id -> parent id for every copy (roots' initial ballots map to themselves)
  std::vector<std::uint64_t> ballot_parent;

  friend bool operator==(const DisseminationTrace&, const DisseminationTrace&) = default;
};

/// FIFO event-queue execution of the dissemination protocol.
DisseminationTrace run_dissemination(const SocialGraph& graph, std::vector<NodeProfile> profiles,
                                     const SimulationConfig& config, std::uint64_t seed);

/// FNV-1a over the event log and received counts.
std::uint64_t trace_hash(const DisseminationTrace& trace);

double coverage(const DisseminationTrace& trace, const SocialGraph& graph);

struct ParticipationHistogram {
  /// participation count -> number of nodes, nodes with zero participations omitted
  std::map<std::uint32_t, std::size_t> non_root;
  std::map<std::uint32_t, std::size_t> root;
};

ParticipationHistogram participation_histogram(const DisseminationTrace& trace);

struct WeightedArc {
  NodeId from = 0;
  NodeId to = 0;
  std::uint32_t weight = 0;

  friend bool operator==(const WeightedArc&, const WeightedArc&) = default;
};

/// Directed, weighted graph reconstructed from a trace. Local ids are dense
/// in ascending social-id order.
struct DisseminationGraph {
  std::vector<NodeId> social_id;
  std::vector<WeightedArc> arcs;  // sorted by (from, to), local ids
  std::vector<bool> eligible;
  std::vector<bool> participated;
  std::vector<std::uint32_t> participations;
  /// ballot of the last participation, the node's official response
  std::vector<std::optional<std::uint64_t>> official_ballot;

  std::size_t node_count() const { return social_id.size(); }
  /// Simple undirected view; labels are social ids.
  SocialGraph undirected_view() const;
};

DisseminationGraph build_dissemination_graph(const DisseminationTrace& trace,
                                             const std::vector<bool>& eligible);

// Persistence (line-delimited event log, CSV edge and node tables).
void write_trace(const DisseminationTrace& trace, std::ostream& out);
DisseminationTrace read_trace(std::istream& in);
void write_dissemination_edges(const DisseminationGraph& dgraph, std::ostream& out);
void write_dissemination_nodes(const DisseminationGraph& dgraph, const SocialGraph& social,
                               std::ostream& out);
DisseminationGraph read_dissemination_graph(std::istream& nodes, std::istream& edges);
void write_histogram(const ParticipationHistogram& histogram, std::ostream& out);

}  // namespace pollnet::sim
