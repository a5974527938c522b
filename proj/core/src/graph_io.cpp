#include "pollnet/graph_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace pollnet::io {
namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, EdgeFormat format) {
  std::vector<std::string_view> out;
  if (format == EdgeFormat::whitespace) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
      if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
  }
  const char delim = format == EdgeFormat::csv ? ',' : '\t';
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_number(std::string_view token, double& value) {
  token = trim(token);
  if (token.empty()) return false;
  if (token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  return ec == std::errc() && ptr == token.data() + token.size() && std::isfinite(value);
}

bool is_blank_or_comment(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  return in;
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " +
                         what),
      line_(line) {}

EdgeFormat parse_edge_format(std::string_view name) {
  if (name == "csv") return EdgeFormat::csv;
  if (name == "tsv") return EdgeFormat::tsv;
  if (name == "whitespace" || name == "ws" || name == "txt") return EdgeFormat::whitespace;
  throw std::invalid_argument("unknown edge-list format '" + std::string(name) + "'");
}

SocialGraph load_edge_list(const std::filesystem::path& path, const EdgeListOptions& options) {
  auto in = open_input(path);
  return parse_edge_list(in, options, path.string());
}

SocialGraph parse_edge_list(std::istream& in, const EdgeListOptions& options,
                            const std::string& source_name) {
  struct Row {
    std::size_t line;
    std::string a;
    std::string b;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto fields = split_fields(line, options.format);
    if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
      throw ParseError(source_name, line_no, "expected two node tokens");
    }
    rows.push_back({line_no, std::string(fields[0]), std::string(fields[1])});
  }
  if (rows.empty()) {
    throw ParseError(source_name, 0, "edge list is empty");
  }

  bool skip_first = options.header == HeaderMode::present;
  if (options.header == HeaderMode::automatic && rows.size() >= 2) {
    double x = 0.0;
    const bool first_textual = !parse_number(rows[0].a, x) && !parse_number(rows[0].b, x);
    const bool second_numeric = parse_number(rows[1].a, x) && parse_number(rows[1].b, x);
    skip_first = first_textual && second_numeric;
  }

  std::unordered_map<std::string, NodeId> ids;
  std::vector<std::string> labels;
  std::vector<Edge> edges;
  edges.reserve(rows.size());
  const auto intern = [&](const std::string& token) {
    const auto [it, inserted] = ids.try_emplace(token, static_cast<NodeId>(labels.size()));
    if (inserted) labels.push_back(token);
    return it->second;
  };
  for (std::size_t i = skip_first ? 1 : 0; i < rows.size(); ++i) {
    const NodeId u = intern(rows[i].a);
    const NodeId v = intern(rows[i].b);
    edges.push_back({u, v});
  }
  if (labels.empty()) {
    throw ParseError(source_name, 0, "edge list has a header but no edges");
  }
  const std::size_t n = labels.size();
  return SocialGraph::from_edges(n, edges, std::move(labels));
}

AttachResult attach_attributes(const SocialGraph& graph, const std::filesystem::path& path,
                               const std::string& attribute_name,
                               const AttributeOptions& options) {
  auto in = open_input(path);
  return attach_attributes(graph, in, attribute_name, options, path.string());
}

AttachResult attach_attributes(const SocialGraph& graph, std::istream& in,
                               const std::string& attribute_name,
                               const AttributeOptions& options, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  EdgeFormat format = EdgeFormat::csv;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    header_line = line;
    format = header_line.find(',') == std::string::npos && header_line.find('\t') != std::string::npos
                 ? EdgeFormat::tsv
                 : EdgeFormat::csv;
    header = split_fields(header_line, format);
    break;
  }
  if (header.empty()) {
    throw ParseError(source_name, 0, "attribute table is empty");
  }
  const auto column_of = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ParseError(source_name, line_no, "no column named '" + name + "'");
  };
  const std::size_t id_col = options.id_column.empty() ? 0 : column_of(options.id_column);
  const std::size_t value_col = column_of(attribute_name);

  std::unordered_map<std::string_view, NodeId> index;
  index.reserve(graph.node_count());
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    index.emplace(graph.label(v), v);
  }
  std::vector<double> values(graph.node_count(), std::nan(""));
  std::vector<bool> present(graph.node_count(), false);
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto fields = split_fields(line, format);
    if (fields.size() <= std::max(id_col, value_col)) {
      throw ParseError(source_name, line_no, "row has too few columns");
    }
    const auto it = index.find(fields[id_col]);
    if (it == index.end()) continue;
    const auto raw = trim(fields[value_col]);
    if (raw.empty()) continue;  // missing value
    double value = 0.0;
    if (!parse_number(raw, value)) {
      throw ParseError(source_name, line_no,
                       "non-numeric value '" + std::string(raw) + "' for node '" +
                           std::string(fields[id_col]) + "'");
    }
    if (present[it->second] && values[it->second] != value) {
      throw ParseError(source_name, line_no,
                       "conflicting values for node '" + std::string(fields[id_col]) + "'");
    }
    values[it->second] = value;
    present[it->second] = true;
  }

  std::vector<NodeId> keep;
  keep.reserve(graph.node_count());
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    if (present[v]) keep.push_back(v);
  }
  const std::size_t dropped = graph.node_count() - keep.size();
  if (graph.node_count() > 0 &&
      static_cast<double>(dropped) > options.max_missing_fraction * static_cast<double>(graph.node_count())) {
    std::ostringstream msg;
    msg << "attribute '" << attribute_name << "' missing for " << dropped << " of "
        << graph.node_count() << " nodes (limit " << options.max_missing_fraction * 100.0 << "%)";
    throw std::runtime_error(msg.str());
  }
  std::vector<double> kept_values;
  kept_values.reserve(keep.size());
  for (const NodeId v : keep) kept_values.push_back(values[v]);

  AttachResult result;
  result.graph = graph.induced_subgraph(keep).with_attributes(std::move(kept_values), attribute_name);
  result.dropped = dropped;
  return result;
}

ComponentResult largest_connected_component(const SocialGraph& graph) {
  const std::size_t n = graph.node_count();
  constexpr NodeId kUnseen = static_cast<NodeId>(-1);
  std::vector<NodeId> component(n, kUnseen);
  std::vector<std::size_t> sizes_by_id;
  std::vector<NodeId> queue;
  queue.reserve(n);
  for (NodeId s = 0; s < n; ++s) {
    if (component[s] != kUnseen) continue;
    const auto cid = static_cast<NodeId>(sizes_by_id.size());
    queue.clear();
    queue.push_back(s);
    component[s] = cid;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      for (const NodeId w : graph.neighbors(queue[head])) {
        if (component[w] == kUnseen) {
          component[w] = cid;
          queue.push_back(w);
        }
      }
    }
    sizes_by_id.push_back(queue.size());
  }

  ComponentResult result;
  if (n == 0) return result;
  // First maximum: the component discovered earliest, i.e. holding the smallest id.
  const auto best = static_cast<NodeId>(
      std::max_element(sizes_by_id.begin(), sizes_by_id.end()) - sizes_by_id.begin());
  std::vector<NodeId> keep;
  keep.reserve(sizes_by_id[best]);
  for (NodeId v = 0; v < n; ++v) {
    if (component[v] == best) keep.push_back(v);
  }
  result.graph = graph.induced_subgraph(keep);
  for (const auto size : sizes_by_id) ++result.size_histogram[size];
  result.sizes = sizes_by_id;
  std::sort(result.sizes.begin(), result.sizes.end(), std::greater<>());
  return result;
}

bool EligibilityCriterion::admits(double value) const {
  switch (kind) {
    case Kind::at_least:
      return value >= low;
    case Kind::at_most:
      return value <= high;
    case Kind::between:
      return value >= low && value <= high;
  }
  return false;
}

std::string EligibilityCriterion::describe() const {
  switch (kind) {
    case Kind::at_least:
      return ">= " + format_double(low);
    case Kind::at_most:
      return "<= " + format_double(high);
    case Kind::between:
      return "in [" + format_double(low) + ", " + format_double(high) + "]";
  }
  return {};
}

EligibilityResult apply_eligibility(const SocialGraph& graph, const EligibilityCriterion& criterion) {
  if (!graph.has_attributes()) {
    throw std::invalid_argument("apply_eligibility: graph has no attribute column");
  }
  EligibilityResult result;
  result.eligible.resize(graph.node_count());
  std::size_t count = 0;
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    const bool ok = criterion.admits(graph.attribute(v));
    result.eligible[v] = ok;
    count += ok ? 1 : 0;
  }
  result.fraction = graph.node_count() == 0
                        ? 0.0
                        : static_cast<double>(count) / static_cast<double>(graph.node_count());
  if (count == 0 || count == graph.node_count()) {
    result.warning = "degenerate eligibility: criterion " + criterion.describe() + " admits " +
                     std::to_string(count) + " of " + std::to_string(graph.node_count()) +
                     " nodes";
  }
  return result;
}

EligibilityCriterion criterion_for_fraction(std::span<const double> attributes, double target,
                                            EligibilityCriterion::Kind kind) {
  if (attributes.empty()) {
    throw std::invalid_argument("criterion_for_fraction: no attributes");
  }
  if (kind == EligibilityCriterion::Kind::between) {
    throw std::invalid_argument("criterion_for_fraction: interval criteria are not tunable");
  }
  std::vector<double> sorted(attributes.begin(), attributes.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  // Candidate cutoffs are the distinct attribute values; pick the one whose
  // inclusive fraction is closest to the target (ties: the smaller fraction).
  double best_cutoff = sorted.front();
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i] == sorted[i - 1]) continue;
    double fraction = 0.0;
    if (kind == EligibilityCriterion::Kind::at_least) {
      fraction = static_cast<double>(sorted.size() - i) / n;
    } else {
      const auto upper = std::upper_bound(sorted.begin(), sorted.end(), sorted[i]);
      fraction = static_cast<double>(upper - sorted.begin()) / n;
    }
    const double gap = std::abs(fraction - target);
    if (gap < best_gap) {
      best_gap = gap;
      best_cutoff = sorted[i];
    }
  }
  return kind == EligibilityCriterion::Kind::at_least ? EligibilityCriterion::at_least(best_cutoff)
                                                      : EligibilityCriterion::at_most(best_cutoff);
}

double AttributeLaw::sample(Rng& rng) const {
  switch (kind) {
    case Kind::uniform:
      return rng.uniform(a, b);
    case Kind::normal:
      return a + b * rng.normal();
    case Kind::lognormal:
      return std::exp(a + b * rng.normal());
    case Kind::exponential:
      return rng.exponential(a);
  }
  return 0.0;
}

AttributeLaw AttributeLaw::parse(std::string_view kind, double a, double b) {
  if (kind == "uniform") {
    if (!(b > a)) throw std::invalid_argument("uniform attribute law needs a < b");
    return {Kind::uniform, a, b};
  }
  if (kind == "normal") return {Kind::normal, a, b};
  if (kind == "lognormal") return {Kind::lognormal, a, b};
  if (kind == "exponential") {
    if (!(a > 0.0)) throw std::invalid_argument("exponential attribute law needs rate > 0");
    return {Kind::exponential, a, b};
  }
  throw std::invalid_argument("unknown attribute law '" + std::string(kind) + "'");
}

std::string_view AttributeLaw::kind_name() const {
  switch (kind) {
    case Kind::uniform:
      return "uniform";
    case Kind::normal:
      return "normal";
    case Kind::lognormal:
      return "lognormal";
    case Kind::exponential:
      return "exponential";
  }
  return "";
}

SocialGraph generate_synthetic_graph(std::size_t node_count, double target_avg_degree,
                                     const AttributeLaw& law, std::uint64_t seed) {
  if (node_count < 10) {
    throw std::invalid_argument("generate_synthetic_graph: need at least 10 nodes");
  }
  if (!(target_avg_degree > 0.0) || target_avg_degree >= static_cast<double>(node_count)) {
    throw std::invalid_argument("generate_synthetic_graph: average degree must be in (0, n)");
  }
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(target_avg_degree / 2.0)));
  const std::size_t core = std::min(node_count, m + 1);

  Rng topology = Rng::derive(seed, "synthetic.topology");
  std::vector<Edge> edges;
  edges.reserve(node_count * m);
  // Every edge endpoint is appended, so a uniform pick is degree-proportional.
  std::vector<NodeId> endpoints;
  endpoints.reserve(2 * node_count * m);
  for (NodeId u = 0; u < core; ++u) {
    for (NodeId v = u + 1; v < core; ++v) {
      edges.push_back({u, v});
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  }
  std::vector<NodeId> picked;
  for (auto t = static_cast<NodeId>(core); t < node_count; ++t) {
    picked.clear();
    while (picked.size() < m) {
      const NodeId target = endpoints[topology.below(endpoints.size())];
      if (std::find(picked.begin(), picked.end(), target) == picked.end()) {
        picked.push_back(target);
      }
    }
    std::sort(picked.begin(), picked.end());
    for (const NodeId target : picked) {
      edges.push_back({target, t});
      endpoints.push_back(target);
      endpoints.push_back(t);
    }
  }

  Rng attr_rng = Rng::derive(seed, "synthetic.attributes");
  std::vector<double> attrs(node_count);
  for (auto& a : attrs) a = law.sample(attr_rng);
  return SocialGraph::from_edges(node_count, edges).with_attributes(std::move(attrs), "synthetic");
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

void write_canonical(const SocialGraph& graph, std::ostream& out) {
  out << "# pollnet canonical graph v1\n";
  out << "nodes " << graph.node_count() << '\n';
  out << "edges " << graph.edge_count() << '\n';
  out << "attribute " << (graph.has_attributes() ? graph.attribute_name() : std::string("-"))
      << '\n';
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    const auto& label = graph.label(v);
    if (label.empty() || label.find_first_of(" \t\r\n") != std::string::npos) {
      throw std::invalid_argument("write_canonical: label '" + label + "' contains whitespace");
    }
    out << "node " << v << ' ' << label << ' '
        << (graph.has_attributes() ? format_double(graph.attribute(v)) : std::string("-"))
        << '\n';
  }
  for (const Edge& e : graph.edges()) {
    out << "edge " << e.u << ' ' << e.v << '\n';
  }
}

SocialGraph read_canonical(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t nodes = 0;
  std::size_t edges_expected = 0;
  std::string attribute_name;
  bool has_nodes = false;
  bool has_edges = false;
  bool has_attribute = false;
  std::vector<std::string> labels;
  std::vector<double> attrs;
  std::vector<Edge> edges;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto f = split_fields(line, EdgeFormat::whitespace);
    const auto bad = [&](const std::string& what) { return ParseError(source_name, line_no, what); };
    const auto to_index = [&](std::string_view token) {
      std::size_t value = 0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
      if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw bad("expected an integer, got '" + std::string(token) + "'");
      }
      return value;
    };
    if (f[0] == "nodes" && f.size() == 2) {
      nodes = to_index(f[1]);
      has_nodes = true;
      labels.reserve(nodes);
    } else if (f[0] == "edges" && f.size() == 2) {
      edges_expected = to_index(f[1]);
      has_edges = true;
      edges.reserve(edges_expected);
    } else if (f[0] == "attribute" && f.size() == 2) {
      has_attribute = f[1] != "-";
      attribute_name = has_attribute ? std::string(f[1]) : std::string();
    } else if (f[0] == "node" && f.size() == 4) {
      if (to_index(f[1]) != labels.size()) throw bad("node lines must be in dense id order");
      labels.emplace_back(f[2]);
      if (has_attribute) {
        double value = 0.0;
        if (!parse_number(f[3], value)) throw bad("bad attribute value '" + std::string(f[3]) + "'");
        attrs.push_back(value);
      }
    } else if (f[0] == "edge" && f.size() == 3) {
      const auto u = to_index(f[1]);
      const auto v = to_index(f[2]);
      if (u >= nodes || v >= nodes) throw bad("edge endpoint out of range");
      edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
    } else {
      throw bad("unrecognized line");
    }
  }
  if (!has_nodes || !has_edges) {
    throw ParseError(source_name, 0, "missing 'nodes' or 'edges' header");
  }
  if (labels.size() != nodes) {
    throw ParseError(source_name, 0, "node count does not match header");
  }
  SocialGraph g = SocialGraph::from_edges(nodes, edges, std::move(labels));
  if (g.edge_count() != edges_expected) {
    throw ParseError(source_name, 0, "edge count does not match header");
  }
  if (has_attribute) {
    g = g.with_attributes(std::move(attrs), attribute_name);
  }
  return g;
}

void save_canonical(const SocialGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_canonical(graph, out);
}

SocialGraph load_canonical(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_canonical(in, path.string());
}

void write_id_map(const SocialGraph& graph, std::ostream& out) {
  out << "dense_id,original_id\n";
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    out << v << ',' << graph.label(v) << '\n';
  }
}

void write_component_histogram(const std::map<std::size_t, std::size_t>& histogram,
                               std::ostream& out) {
  out << "component_size,count\n";
  for (auto it = histogram.rbegin(); it != histogram.rend(); ++it) {
    out << it->first << ',' << it->second << '\n';
  }
}

}  // namespace pollnet::io
