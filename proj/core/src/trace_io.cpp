#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "pollnet/simulator.hpp"

namespace pollnet::sim {
namespace {

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim)) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(field);
  }
  return out;
}

template <class T>
T parse_int(const std::string& token, const char* context) {
  T value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw std::runtime_error(std::string(context) + ": bad integer '" + token + "'");
  }
  return value;
}

}  // namespace

void write_trace(const DisseminationTrace& trace, std::ostream& out) {
  out << "# pollnet trace v1\n";
  out << "nodes " << trace.node_count << '\n';
  out << "ballots " << trace.ballot_parent.size() << '\n';
  for (const NodeId r : trace.roots) out << "root " << r << '\n';
  for (const Event& e : trace.events) {
    if (e.kind == EventKind::forward) {
      out << "F " << e.step << ' ' << e.node << ' ' << e.target << ' ' << e.ballot << ' '
          << e.parent << '\n';
    } else {
      out << "P " << e.step << ' ' << e.node << ' ' << e.ballot << '\n';
    }
  }
  for (NodeId v = 0; v < trace.received.size(); ++v) {
    if (trace.received[v] > 0) out << "received " << v << ' ' << trace.received[v] << '\n';
  }
}

DisseminationTrace read_trace(std::istream& in) {
  DisseminationTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line, ' ');
    const auto ctx = "trace line " + std::to_string(line_no);
    const auto u32 = [&](std::size_t i) { return parse_int<std::uint32_t>(f.at(i), ctx.c_str()); };
    const auto u64 = [&](std::size_t i) { return parse_int<std::uint64_t>(f.at(i), ctx.c_str()); };
    if (f[0] == "nodes" && f.size() == 2) {
      trace.node_count = u64(1);
      trace.received.assign(trace.node_count, 0);
    } else if (f[0] == "ballots" && f.size() == 2) {
      trace.ballot_parent.resize(u64(1));
      for (std::size_t i = 0; i < trace.ballot_parent.size(); ++i) trace.ballot_parent[i] = i;
    } else if (f[0] == "root" && f.size() == 2) {
      trace.roots.push_back(u32(1));
    } else if (f[0] == "F" && f.size() == 6) {
      const Event e{EventKind::forward, u32(1), u32(2), u32(3), u64(4), u64(5)};
      if (e.ballot >= trace.ballot_parent.size()) throw std::runtime_error(ctx + ": ballot id out of range");
      trace.ballot_parent[e.ballot] = e.parent;
      trace.events.push_back(e);
    } else if (f[0] == "P" && f.size() == 4) {
      const NodeId v = u32(2);
      trace.events.push_back({EventKind::participate, u32(1), v, v, u64(3), u64(3)});
    } else if (f[0] == "received" && f.size() == 3) {
      trace.received.at(u32(1)) = u32(2);
    } else {
      throw std::runtime_error(ctx + ": unrecognized record");
    }
  }
  return trace;
}

void write_dissemination_edges(const DisseminationGraph& dgraph, std::ostream& out) {
  out << "from,to,weight\n";
  for (const auto& a : dgraph.arcs) out << a.from << ',' << a.to << ',' << a.weight << '\n';
}

void write_dissemination_nodes(const DisseminationGraph& dgraph, const SocialGraph& social,
                               std::ostream& out) {
  out << "local_id,social_id,original_id,eligible,participated,participations,official_ballot\n";
  for (NodeId v = 0; v < dgraph.node_count(); ++v) {
    const NodeId s = dgraph.social_id[v];
    out << v << ',' << s << ',' << (s < social.node_count() ? social.label(s) : std::to_string(s))
        << ',' << (dgraph.eligible[v] ? 1 : 0) << ',' << (dgraph.participated[v] ? 1 : 0) << ','
        << dgraph.participations[v] << ',';
    if (dgraph.official_ballot[v]) out << *dgraph.official_ballot[v];
    out << '\n';
  }
}

DisseminationGraph read_dissemination_graph(std::istream& nodes, std::istream& edges) {
  DisseminationGraph g;
  std::string line;
  bool header = true;
  while (std::getline(nodes, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() < 6) throw std::runtime_error("dissemination nodes: short row");
    if (parse_int<std::size_t>(f[0], "dissemination nodes") != g.social_id.size()) {
      throw std::runtime_error("dissemination nodes: rows out of order");
    }
    g.social_id.push_back(parse_int<NodeId>(f[1], "dissemination nodes"));
    g.eligible.push_back(f[3] == "1");
    g.participated.push_back(f[4] == "1");
    g.participations.push_back(parse_int<std::uint32_t>(f[5], "dissemination nodes"));
    if (f.size() > 6 && !f[6].empty()) {
      g.official_ballot.emplace_back(parse_int<std::uint64_t>(f[6], "dissemination nodes"));
    } else {
      g.official_ballot.emplace_back(std::nullopt);
    }
  }
  header = true;
  while (std::getline(edges, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 3) throw std::runtime_error("dissemination edges: expected from,to,weight");
    const WeightedArc arc{parse_int<NodeId>(f[0], "dissemination edges"),
                          parse_int<NodeId>(f[1], "dissemination edges"),
                          parse_int<std::uint32_t>(f[2], "dissemination edges")};
    if (arc.from >= g.node_count() || arc.to >= g.node_count()) {
      throw std::runtime_error("dissemination edges: endpoint out of range");
    }
    g.arcs.push_back(arc);
  }
  return g;
}

void write_histogram(const ParticipationHistogram& histogram, std::ostream& out) {
  out << "group,participations,nodes\n";
  for (const auto& [count, nodes] : histogram.non_root) out << "non_root," << count << ',' << nodes << '\n';
  for (const auto& [count, nodes] : histogram.root) out << "root," << count << ',' << nodes << '\n';
}

}  // namespace pollnet::sim
