#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pollnet/graph.hpp"
#include "pollnet/rng.hpp"

namespace pollnet::io {

/// Malformed input. `line` is 1-based; 0 when the error is not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class EdgeFormat { csv, tsv, whitespace };
enum class HeaderMode { automatic, present, absent };

EdgeFormat parse_edge_format(std::string_view name);

struct EdgeListOptions {
  EdgeFormat format = EdgeFormat::whitespace;
  HeaderMode header = HeaderMode::automatic;
};

/// Reads a two-column edge list. Node tokens are remapped to dense ids in
/// order of first appearance; the original token becomes the node label.
/// Lines starting with '#' and blank lines are skipped. Extra columns are
/// ignored.
SocialGraph load_edge_list(const std::filesystem::path& path, const EdgeListOptions& options = {});
SocialGraph parse_edge_list(std::istream& in, const EdgeListOptions& options,
                            const std::string& source_name = "<stream>");

struct AttributeOptions {
  /// Column holding node labels; empty selects the first column.
  std::string id_column;
  /// Abort when more than this fraction of nodes lacks a value.
  double max_missing_fraction = 0.5;
};

struct AttachResult {
  SocialGraph graph;
  std::size_t dropped = 0;
};

/// Attaches one numeric column from a headed CSV/TSV table keyed by node
/// label. Nodes without a value are removed together with their edges.
AttachResult attach_attributes(const SocialGraph& graph, const std::filesystem::path& path,
                               const std::string& attribute_name,
                               const AttributeOptions& options = {});
AttachResult attach_attributes(const SocialGraph& graph, std::istream& in,
                               const std::string& attribute_name,
                               const AttributeOptions& options = {},
                               const std::string& source_name = "<stream>");

struct ComponentResult {
  SocialGraph graph;
  /// component size -> number of components with that size
  std::map<std::size_t, std::size_t> size_histogram;
  /// all component sizes, descending
  std::vector<std::size_t> sizes;
};

/// Induced subgraph on the largest connected component (ties: the component
/// containing the smallest node id).
ComponentResult largest_connected_component(const SocialGraph& graph);

/// Threshold or interval predicate over the node attribute. Bounds are
/// inclusive.
struct EligibilityCriterion {
  enum class Kind { at_least, at_most, between };

  Kind kind = Kind::at_least;
  double low = 0.0;
  double high = 0.0;

  static EligibilityCriterion at_least(double cutoff) { return {Kind::at_least, cutoff, cutoff}; }
  static EligibilityCriterion at_most(double cutoff) { return {Kind::at_most, cutoff, cutoff}; }
  static EligibilityCriterion between(double lo, double hi) { return {Kind::between, lo, hi}; }

  bool admits(double value) const;
  std::string describe() const;
};

struct EligibilityResult {
  std::vector<bool> eligible;
  double fraction = 0.0;
  /// Set when every node or no node is eligible.
  std::string warning;
};

EligibilityResult apply_eligibility(const SocialGraph& graph, const EligibilityCriterion& criterion);

/// Picks the cutoff whose inclusive threshold comes closest to `target`
/// eligible fraction. `kind` must be at_least or at_most.
EligibilityCriterion criterion_for_fraction(std::span<const double> attributes, double target,
                                            EligibilityCriterion::Kind kind);

/// Distribution for synthetic node attributes.
struct AttributeLaw {
  enum class Kind { uniform, normal, lognormal, exponential };

  Kind kind = Kind::lognormal;
  /// uniform: [a, b); normal/lognormal: mean a, stddev b; exponential: rate a
  double a = 0.0;
  double b = 1.0;

  double sample(Rng& rng) const;
  static AttributeLaw parse(std::string_view kind, double a, double b);
  std::string_view kind_name() const;
};

/// Preferential-attachment graph with round(target_avg_degree / 2) edges per
/// arriving node, grown from a clique on the first m+1 nodes.
SocialGraph generate_synthetic_graph(std::size_t node_count, double target_avg_degree,
                                     const AttributeLaw& law, std::uint64_t seed);

/// Canonical text form: header, one `node` line per node (dense id, label,
/// attribute) and one `edge` line per edge with u < v in sorted order.
void write_canonical(const SocialGraph& graph, std::ostream& out);
SocialGraph read_canonical(std::istream& in, const std::string& source_name = "<stream>");
void save_canonical(const SocialGraph& graph, const std::filesystem::path& path);
SocialGraph load_canonical(const std::filesystem::path& path);

/// dense_id,original_id
void write_id_map(const SocialGraph& graph, std::ostream& out);
/// component_size,count (descending by size)
void write_component_histogram(const std::map<std::size_t, std::size_t>& histogram,
                               std::ostream& out);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace pollnet::io
