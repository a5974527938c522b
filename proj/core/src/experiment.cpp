#include "pollnet/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace pollnet::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

StageError::StageError(std::string stage, const std::string& detail)
    : std::runtime_error(stage + ": " + detail), stage_(std::move(stage)), detail_(detail) {}

namespace {

template <class F>
auto staged(const char* stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

// ---- JSON helpers ----------------------------------------------------------

void check_keys(const json& object, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!object.is_object()) {
    throw std::invalid_argument(std::string(where) + ": expected an object");
  }
  for (const auto& item : object.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw std::invalid_argument(std::string(where) + ": unknown key '" + item.key() + "'");
    }
  }
}

template <class T>
void read(const json& object, const char* key, T& target, std::string_view where) {
  const auto it = object.find(key);
  if (it == object.end()) return;
  try {
    target = it->get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string(where) + "." + key + ": wrong type");
  }
}

std::string_view kind_name(io::EligibilityCriterion::Kind kind) {
  switch (kind) {
    case io::EligibilityCriterion::Kind::at_least: return "at_least";
    case io::EligibilityCriterion::Kind::at_most: return "at_most";
    case io::EligibilityCriterion::Kind::between: return "between";
  }
  return "at_least";
}

io::EligibilityCriterion::Kind parse_kind(const std::string& name) {
  if (name == "at_least") return io::EligibilityCriterion::Kind::at_least;
  if (name == "at_most") return io::EligibilityCriterion::Kind::at_most;
  if (name == "between") return io::EligibilityCriterion::Kind::between;
  throw std::invalid_argument("eligibility: unknown kind '" + name + "'");
}

std::string_view format_name(io::EdgeFormat f) {
  switch (f) {
    case io::EdgeFormat::csv: return "csv";
    case io::EdgeFormat::tsv: return "tsv";
    case io::EdgeFormat::whitespace: return "whitespace";
  }
  return "whitespace";
}

std::string_view header_name(io::HeaderMode h) {
  switch (h) {
    case io::HeaderMode::automatic: return "auto";
    case io::HeaderMode::present: return "present";
    case io::HeaderMode::absent: return "absent";
  }
  return "auto";
}

io::HeaderMode parse_header(const std::string& name) {
  if (name == "auto") return io::HeaderMode::automatic;
  if (name == "present") return io::HeaderMode::present;
  if (name == "absent") return io::HeaderMode::absent;
  throw std::invalid_argument("dataset.header: expected auto, present or absent");
}

json spec_to_json(const ExperimentSpec& s) {
  json dataset = {{"name", s.dataset.name},
                  {"attribute_name", s.dataset.attribute_name},
                  {"format", format_name(s.dataset.format)},
                  {"header", header_name(s.dataset.header)},
                  {"id_column", s.dataset.id_column},
                  {"largest_component", s.dataset.largest_component}};
  if (s.dataset.edges) dataset["edges"] = s.dataset.edges->string();
  if (s.dataset.attributes) dataset["attributes"] = s.dataset.attributes->string();
  dataset["synthetic"] = {{"nodes", s.dataset.synthetic_nodes},
                          {"mean_degree", s.dataset.synthetic_degree},
                          {"attribute_law",
                           {{"kind", s.dataset.synthetic_law.kind_name()},
                            {"a", s.dataset.synthetic_law.a},
                            {"b", s.dataset.synthetic_law.b}}},
                          {"seed", s.dataset.synthetic_seed}};

  json eligibility = {{"kind", kind_name(s.eligibility.fraction_kind)}};
  if (s.eligibility.target_fraction) eligibility["target_fraction"] = *s.eligibility.target_fraction;
  if (s.eligibility.criterion) {
    eligibility["criterion"] = {{"kind", kind_name(s.eligibility.criterion->kind)},
                                {"low", s.eligibility.criterion->low},
                                {"high", s.eligibility.criterion->high}};
  }

  const auto& c = s.simulation;
  json simulation = {{"honesty_ratio", c.honesty_ratio},
                     {"root_ratio", c.root_ratio},
                     {"ballots_per_root", c.ballots_per_root},
                     {"root_bonus_participations", c.root_bonus_participations},
                     {"ballot_capacity", c.ballot_capacity},
                     {"fan_out", c.fan_out},
                     {"dishonest_action_prob", c.dishonest_action_prob},
                     {"hop_cap", c.hop_cap},
                     {"alpha", c.alpha},
                     {"beta", c.beta},
                     {"forwarding_uses_budget", c.forwarding_uses_budget},
                     {"max_deliveries", c.max_deliveries}};

  json embedding = {{"walk_length", s.walks.walk_length},
                    {"walks_per_node", s.walks.walks_per_node},
                    {"p", s.walks.p},
                    {"q", s.walks.q},
                    {"dim", s.skipgram.dim},
                    {"window", s.skipgram.window},
                    {"negatives", s.skipgram.negatives},
                    {"epochs", s.skipgram.epochs},
                    {"learning_rate", s.skipgram.learning_rate},
                    {"shrink_window", s.skipgram.shrink_window}};

  json classifier = {{"epochs", s.classifier.epochs},
                     {"learning_rate", s.classifier.learning_rate},
                     {"weight_decay", s.classifier.weight_decay},
                     {"class_weighting", s.classifier.class_weighting},
                     {"hidden_dim", s.classifier.hidden_dim}};

  json output = {{"directory", s.output.directory.string()},
                 {"write_walks", s.output.write_walks},
                 {"write_trace", s.output.write_trace},
                 {"structure_report", s.output.structure_report}};

  return {{"dataset", dataset},         {"eligibility", eligibility}, {"simulation", simulation},
          {"embedding", embedding},     {"classifier", classifier},   {"output", output},
          {"seeds", s.seeds},           {"threads", s.threads}};
}

void spec_from_json(const json& j, ExperimentSpec& s, bool allow_grid) {
  if (allow_grid) {
    check_keys(j, "spec", {"dataset", "eligibility", "simulation", "embedding", "classifier", "output",
                           "seeds", "threads", "grid"});
  } else {
    check_keys(j, "spec", {"dataset", "eligibility", "simulation", "embedding", "classifier", "output",
                           "seeds", "threads"});
  }

  if (const auto it = j.find("dataset"); it != j.end()) {
    const json& d = *it;
    check_keys(d, "dataset", {"name", "edges", "attributes", "attribute_name", "format", "header",
                              "id_column", "largest_component", "synthetic"});
    read(d, "name", s.dataset.name, "dataset");
    if (d.contains("edges")) s.dataset.edges = fs::path(d.at("edges").get<std::string>());
    if (d.contains("attributes")) s.dataset.attributes = fs::path(d.at("attributes").get<std::string>());
    read(d, "attribute_name", s.dataset.attribute_name, "dataset");
    if (d.contains("format")) s.dataset.format = io::parse_edge_format(d.at("format").get<std::string>());
    if (d.contains("header")) s.dataset.header = parse_header(d.at("header").get<std::string>());
    read(d, "id_column", s.dataset.id_column, "dataset");
    read(d, "largest_component", s.dataset.largest_component, "dataset");
    if (const auto syn = d.find("synthetic"); syn != d.end()) {
      check_keys(*syn, "dataset.synthetic", {"nodes", "mean_degree", "attribute_law", "seed"});
      read(*syn, "nodes", s.dataset.synthetic_nodes, "dataset.synthetic");
      read(*syn, "mean_degree", s.dataset.synthetic_degree, "dataset.synthetic");
      read(*syn, "seed", s.dataset.synthetic_seed, "dataset.synthetic");
      if (const auto law = syn->find("attribute_law"); law != syn->end()) {
        check_keys(*law, "dataset.synthetic.attribute_law", {"kind", "a", "b"});
        std::string kind(s.dataset.synthetic_law.kind_name());
        double a = s.dataset.synthetic_law.a;
        double b = s.dataset.synthetic_law.b;
        read(*law, "kind", kind, "dataset.synthetic.attribute_law");
        read(*law, "a", a, "dataset.synthetic.attribute_law");
        read(*law, "b", b, "dataset.synthetic.attribute_law");
        s.dataset.synthetic_law = io::AttributeLaw::parse(kind, a, b);
      }
    }
  }

  if (const auto it = j.find("eligibility"); it != j.end()) {
    const json& e = *it;
    check_keys(e, "eligibility", {"target_fraction", "kind", "criterion"});
    s.eligibility.target_fraction.reset();
    if (e.contains("target_fraction")) s.eligibility.target_fraction = e.at("target_fraction").get<double>();
    if (e.contains("kind")) s.eligibility.fraction_kind = parse_kind(e.at("kind").get<std::string>());
    if (const auto c = e.find("criterion"); c != e.end()) {
      check_keys(*c, "eligibility.criterion", {"kind", "low", "high"});
      io::EligibilityCriterion crit;
      crit.kind = parse_kind(c->value("kind", std::string("at_least")));
      read(*c, "low", crit.low, "eligibility.criterion");
      crit.high = crit.low;
      read(*c, "high", crit.high, "eligibility.criterion");
      s.eligibility.criterion = crit;
    }
  }

  if (const auto it = j.find("simulation"); it != j.end()) {
    const json& c = *it;
    auto& t = s.simulation;
    check_keys(c, "simulation", {"honesty_ratio", "root_ratio", "ballots_per_root",
                                 "root_bonus_participations", "ballot_capacity", "fan_out",
                                 "dishonest_action_prob", "hop_cap", "alpha", "beta",
                                 "forwarding_uses_budget", "max_deliveries"});
    read(c, "honesty_ratio", t.honesty_ratio, "simulation");
    read(c, "root_ratio", t.root_ratio, "simulation");
    read(c, "ballots_per_root", t.ballots_per_root, "simulation");
    read(c, "root_bonus_participations", t.root_bonus_participations, "simulation");
    read(c, "ballot_capacity", t.ballot_capacity, "simulation");
    read(c, "fan_out", t.fan_out, "simulation");
    read(c, "dishonest_action_prob", t.dishonest_action_prob, "simulation");
    read(c, "hop_cap", t.hop_cap, "simulation");
    read(c, "alpha", t.alpha, "simulation");
    read(c, "beta", t.beta, "simulation");
    read(c, "forwarding_uses_budget", t.forwarding_uses_budget, "simulation");
    read(c, "max_deliveries", t.max_deliveries, "simulation");
  }

  if (const auto it = j.find("embedding"); it != j.end()) {
    const json& e = *it;
    check_keys(e, "embedding", {"walk_length", "walks_per_node", "p", "q", "dim", "window", "negatives",
                                "epochs", "learning_rate", "shrink_window"});
    read(e, "walk_length", s.walks.walk_length, "embedding");
    read(e, "walks_per_node", s.walks.walks_per_node, "embedding");
    read(e, "p", s.walks.p, "embedding");
    read(e, "q", s.walks.q, "embedding");
    read(e, "dim", s.skipgram.dim, "embedding");
    read(e, "window", s.skipgram.window, "embedding");
    read(e, "negatives", s.skipgram.negatives, "embedding");
    read(e, "epochs", s.skipgram.epochs, "embedding");
    read(e, "learning_rate", s.skipgram.learning_rate, "embedding");
    read(e, "shrink_window", s.skipgram.shrink_window, "embedding");
  }

  if (const auto it = j.find("classifier"); it != j.end()) {
    const json& c = *it;
    check_keys(c, "classifier", {"epochs", "learning_rate", "weight_decay", "class_weighting", "hidden_dim"});
    read(c, "epochs", s.classifier.epochs, "classifier");
    read(c, "learning_rate", s.classifier.learning_rate, "classifier");
    read(c, "weight_decay", s.classifier.weight_decay, "classifier");
    read(c, "class_weighting", s.classifier.class_weighting, "classifier");
    read(c, "hidden_dim", s.classifier.hidden_dim, "classifier");
  }

  if (const auto it = j.find("output"); it != j.end()) {
    const json& o = *it;
    check_keys(o, "output", {"directory", "write_walks", "write_trace", "structure_report"});
    if (o.contains("directory")) s.output.directory = o.at("directory").get<std::string>();
    read(o, "write_walks", s.output.write_walks, "output");
    read(o, "write_trace", s.output.write_trace, "output");
    read(o, "structure_report", s.output.structure_report, "output");
  }

  read(j, "seeds", s.seeds, "spec");
  read(j, "threads", s.threads, "spec");
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("spec is not valid JSON: ") + e.what());
  }
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// ---- CSV helpers -----------------------------------------------------------

std::string csv_escape(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (const char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

// ---- pipeline --------------------------------------------------------------

class ArtifactLog {
 public:
  explicit ArtifactLog(std::vector<fs::path>& files) : files_(files) {}

  template <class Writer>
  void text(const fs::path& path, Writer&& writer) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    writer(out);
    out.close();
    if (!out) throw std::runtime_error("write failed for " + path.string());
    record(path);
  }

  void record(const fs::path& path) {
    const std::lock_guard lock(mutex_);
    files_.push_back(path);
  }

 private:
  std::vector<fs::path>& files_;
  std::mutex mutex_;
};

struct SeedContext {
  const ExperimentSpec& spec;
  const PreparedDataset& data;
  const io::EligibilityResult& eligibility;
  double eligibility_target;
};

double fraction_below(const std::map<std::uint32_t, std::size_t>& counts, std::uint32_t limit) {
  std::size_t below = 0;
  std::size_t total = 0;
  for (const auto& [participations, nodes] : counts) {
    total += nodes;
    if (participations < limit) below += nodes;
  }
  return total == 0 ? 1.0 : static_cast<double>(below) / static_cast<double>(total);
}

SeedResult run_seed(const SeedContext& ctx, std::uint64_t seed, const fs::path& dir, ArtifactLog& log) {
  const ExperimentSpec& spec = ctx.spec;
  const SocialGraph& graph = ctx.data.graph;
  SeedResult result;
  SummaryRow& row = result.row;
  row.dataset = spec.dataset.name;
  row.eligibility_target = ctx.eligibility_target;
  row.eligibility = ctx.eligibility.fraction;
  row.honesty = spec.simulation.honesty_ratio;
  row.root_ratio = spec.simulation.root_ratio;
  row.seed = seed;

  fs::create_directories(dir);

  sim::SimulationConfig config = spec.simulation;
  config.seed = seed;
  const auto trace = staged("simulate", [&] {
    auto profiles = sim::assign_roles(graph, ctx.eligibility.eligible, ctx.data.centrality, config, seed);
    return sim::run_dissemination(graph, std::move(profiles), config, seed);
  });
  row.coverage = sim::coverage(trace, graph);
  row.trace_hash = hex64(sim::trace_hash(trace));
  result.histogram = sim::participation_histogram(trace);
  row.non_root_below_30 = fraction_below(result.histogram.non_root, 30);

  const auto dgraph = staged("simulate", [&] {
    if (spec.output.write_trace) {
      log.text(dir / "trace.txt", [&](std::ostream& out) { sim::write_trace(trace, out); });
    }
    log.text(dir / "participation_histogram.csv",
             [&](std::ostream& out) { sim::write_histogram(result.histogram, out); });
    auto built = sim::build_dissemination_graph(trace, ctx.eligibility.eligible);
    log.text(dir / "dissemination_nodes.csv",
             [&](std::ostream& out) { sim::write_dissemination_nodes(built, graph, out); });
    log.text(dir / "dissemination_edges.csv",
             [&](std::ostream& out) { sim::write_dissemination_edges(built, out); });
    return built;
  });
  row.dgraph_nodes = static_cast<double>(dgraph.node_count());
  row.dgraph_arcs = static_cast<double>(dgraph.arcs.size());

  const auto embedding = staged("embed", [&] {
    embed::WalkOptions walks = spec.walks;
    walks.seed = seed;
    walks.threads = spec.threads;
    const auto corpus = embed::generate_walks(dgraph.undirected_view(), walks);
    if (spec.output.write_walks) {
      log.text(dir / "walks.txt", [&](std::ostream& out) { embed::write_corpus(corpus, out); });
    }
    embed::SkipGramOptions options = spec.skipgram;
    options.seed = seed;
    auto matrix = embed::train_skipgram(corpus, options);
    embed::save_embeddings(matrix, dir / "embeddings.bin");
    log.record(dir / "embeddings.bin");
    return matrix;
  });
  result.embedding_loss = embedding.epoch_loss;

  const auto labels = gnn::ineligible_labels(dgraph);
  row.positives = static_cast<double>(std::count(labels.begin(), labels.end(), true));
  const auto split = staged("train", [&] { return gnn::stratified_split(labels, seed); });
  const auto input = staged("train", [&] { return gnn::make_graph_input(dgraph, embedding); });
  const auto trained = staged("train", [&] {
    gnn::TrainOptions options = spec.classifier;
    options.seed = seed;
    auto out = gnn::train_classifier(input, labels, split, options);
    json header = {{"seed", seed},
                   {"input_dim", embedding.dim},
                   {"hidden_dim", options.hidden_dim},
                   {"epochs", options.epochs},
                   {"learning_rate", options.learning_rate},
                   {"weight_decay", options.weight_decay},
                   {"class_weighting", options.class_weighting},
                   {"best_epoch", out.best_epoch},
                   {"positive_weight", out.positive_weight}};
    gnn::save_model(out.model, dir / "model.bin", header.dump());
    log.record(dir / "model.bin");
    log.text(dir / "training.json", [&](std::ostream& o) {
      o << json{{"train_loss", out.train_loss}, {"validation_f1", out.validation_f1},
                {"embedding_loss", embedding.epoch_loss}}
               .dump(2)
        << '\n';
    });
    return out;
  });
  result.train_loss = trained.train_loss;
  row.best_epoch = trained.best_epoch;

  staged("evaluate", [&] {
    result.test_metrics = gnn::evaluate(trained.model, input, labels, split.test);
    log.text(dir / "metrics.json", [&](std::ostream& o) { o << metrics_json(result.test_metrics) << '\n'; });
  });
  row.accuracy = result.test_metrics.accuracy;
  row.precision = result.test_metrics.precision;
  row.recall = result.test_metrics.recall;
  row.f1 = result.test_metrics.f1;
  return result;
}

io::EligibilityResult resolve_eligibility(const ExperimentSpec& spec, const SocialGraph& graph,
                                          io::EligibilityCriterion& rule) {
  return staged("eligibility", [&] {
    if (!graph.has_attributes()) throw std::invalid_argument("graph has no node attribute");
    if (spec.eligibility.target_fraction) {
      rule = io::criterion_for_fraction(graph.attributes(), *spec.eligibility.target_fraction,
                                        spec.eligibility.fraction_kind);
    } else if (spec.eligibility.criterion) {
      rule = *spec.eligibility.criterion;
    } else {
      throw std::invalid_argument("no eligibility rule given");
    }
    return io::apply_eligibility(graph, rule);
  });
}

}  // namespace

// ---- spec ------------------------------------------------------------------

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw std::invalid_argument("seeds: at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw std::invalid_argument("seeds: duplicate seed");
  }
  if (!eligibility.target_fraction && !eligibility.criterion) {
    throw std::invalid_argument("eligibility: target_fraction or criterion is required");
  }
  if (eligibility.target_fraction && (*eligibility.target_fraction <= 0.0 || *eligibility.target_fraction > 1.0)) {
    throw std::invalid_argument("eligibility.target_fraction: must lie in (0, 1]");
  }
  if (dataset.synthetic() && dataset.attributes) {
    throw std::invalid_argument("dataset.attributes: requires dataset.edges");
  }
  if (skipgram.dim == 0) throw std::invalid_argument("embedding.dim: must be positive");
  if (classifier.hidden_dim == 0) throw std::invalid_argument("classifier.hidden_dim: must be positive");
  simulation.validate();
}

std::size_t SweepSpec::cell_count() const {
  const auto axis = [](const std::vector<double>& v) { return v.empty() ? std::size_t{1} : v.size(); };
  return axis(eligibility) * axis(honesty) * axis(root_ratio);
}

std::string to_json(const ExperimentSpec& spec) { return spec_to_json(spec).dump(2); }

ExperimentSpec experiment_from_json(const std::string& text) {
  ExperimentSpec spec;
  spec_from_json(parse_text(text), spec, false);
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment(const fs::path& path) { return experiment_from_json(slurp(path)); }

std::string to_json(const SweepSpec& spec) {
  json j = spec_to_json(spec.base);
  j["grid"] = {{"eligibility", spec.eligibility}, {"honesty", spec.honesty}, {"root_ratio", spec.root_ratio}};
  return j.dump(2);
}

SweepSpec sweep_from_json(const std::string& text) {
  const json j = parse_text(text);
  SweepSpec spec;
  spec_from_json(j, spec.base, true);
  if (const auto grid = j.find("grid"); grid != j.end()) {
    check_keys(*grid, "grid", {"eligibility", "honesty", "root_ratio"});
    read(*grid, "eligibility", spec.eligibility, "grid");
    read(*grid, "honesty", spec.honesty, "grid");
    read(*grid, "root_ratio", spec.root_ratio, "grid");
  }
  spec.base.validate();
  return spec;
}

SweepSpec load_sweep(const fs::path& path) { return sweep_from_json(slurp(path)); }

// ---- summary CSV -----------------------------------------------------------

const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> columns = {
      "kind",          "dataset",  "eligibility_target", "eligibility", "honesty",    "root_ratio",
      "seed",          "runs",     "status",             "coverage",    "coverage_std", "dgraph_nodes",
      "dgraph_arcs",   "positives", "accuracy",          "accuracy_std", "precision", "precision_std",
      "recall",        "recall_std", "f1",               "f1_std",      "non_root_below_30",
      "best_epoch",    "trace_hash", "error"};
  return columns;
}

void write_summary_header(std::ostream& out) {
  const auto& cols = summary_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

void write_summary_row(const SummaryRow& r, std::ostream& out) {
  const auto d = io::format_double;
  out << csv_escape(r.kind) << ',' << csv_escape(r.dataset) << ',' << d(r.eligibility_target) << ','
      << d(r.eligibility) << ',' << d(r.honesty) << ',' << d(r.root_ratio) << ','
      << (r.seed ? std::to_string(*r.seed) : std::string()) << ',' << r.runs << ',' << csv_escape(r.status)
      << ',' << d(r.coverage) << ',' << d(r.coverage_std) << ',' << d(r.dgraph_nodes) << ','
      << d(r.dgraph_arcs) << ',' << d(r.positives) << ',' << d(r.accuracy) << ',' << d(r.accuracy_std) << ','
      << d(r.precision) << ',' << d(r.precision_std) << ',' << d(r.recall) << ',' << d(r.recall_std) << ','
      << d(r.f1) << ',' << d(r.f1_std) << ',' << d(r.non_root_below_30) << ',' << r.best_epoch << ','
      << r.trace_hash << ',' << csv_escape(r.error) << '\n';
}

std::vector<SummaryRow> read_summary(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw io::ParseError("<summary>", 1, "missing header");
  const auto header = csv_split(line);
  if (header != summary_columns()) throw io::ParseError("<summary>", 1, "unexpected columns");
  std::vector<SummaryRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != header.size()) throw io::ParseError("<summary>", number, "wrong field count");
    try {
      SummaryRow r;
      std::size_t i = 0;
      r.kind = f[i++];
      r.dataset = f[i++];
      r.eligibility_target = std::stod(f[i++]);
      r.eligibility = std::stod(f[i++]);
      r.honesty = std::stod(f[i++]);
      r.root_ratio = std::stod(f[i++]);
      if (!f[i].empty()) r.seed = std::stoull(f[i]);
      ++i;
      r.runs = std::stoull(f[i++]);
      r.status = f[i++];
      for (double* target : {&r.coverage, &r.coverage_std, &r.dgraph_nodes, &r.dgraph_arcs, &r.positives,
                             &r.accuracy, &r.accuracy_std, &r.precision, &r.precision_std, &r.recall,
                             &r.recall_std, &r.f1, &r.f1_std, &r.non_root_below_30}) {
        *target = std::stod(f[i++]);
      }
      r.best_epoch = std::stoull(f[i++]);
      r.trace_hash = f[i++];
      r.error = f[i++];
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw io::ParseError("<summary>", number, "malformed number");
    }
  }
  return rows;
}

SummaryRow aggregate(const std::vector<SummaryRow>& runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate: no rows");
  SummaryRow a;
  a.kind = "aggregate";
  a.dataset = runs.front().dataset;
  a.eligibility_target = runs.front().eligibility_target;
  a.eligibility = runs.front().eligibility;
  a.honesty = runs.front().honesty;
  a.root_ratio = runs.front().root_ratio;
  std::vector<const SummaryRow*> ok;
  for (const auto& r : runs) {
    if (r.status == "ok") ok.push_back(&r);
  }
  a.runs = ok.size();
  if (ok.empty()) {
    a.status = "error";
    a.error = "no successful seed";
    return a;
  }
  a.status = ok.size() == runs.size() ? "ok" : "partial";
  const double n = static_cast<double>(ok.size());
  const auto mean_std = [&](double SummaryRow::*field, double* std_out) {
    double sum = 0.0;
    for (const auto* r : ok) sum += r->*field;
    const double mean = sum / n;
    if (std_out) {
      double sq = 0.0;
      for (const auto* r : ok) sq += (r->*field - mean) * (r->*field - mean);
      *std_out = std::sqrt(sq / n);
    }
    return mean;
  };
  a.coverage = mean_std(&SummaryRow::coverage, &a.coverage_std);
  a.dgraph_nodes = mean_std(&SummaryRow::dgraph_nodes, nullptr);
  a.dgraph_arcs = mean_std(&SummaryRow::dgraph_arcs, nullptr);
  a.positives = mean_std(&SummaryRow::positives, nullptr);
  a.accuracy = mean_std(&SummaryRow::accuracy, &a.accuracy_std);
  a.precision = mean_std(&SummaryRow::precision, &a.precision_std);
  a.recall = mean_std(&SummaryRow::recall, &a.recall_std);
  a.f1 = mean_std(&SummaryRow::f1, &a.f1_std);
  a.non_root_below_30 = mean_std(&SummaryRow::non_root_below_30, nullptr);
  return a;
}

// ---- reports ---------------------------------------------------------------

std::string structure_json(const analytics::StructureReport& r) {
  json rich = json::array();
  for (const auto& [k, phi] : r.rich_club) {
    rich.push_back({{"k", k}, {"phi", phi ? json(*phi) : json(nullptr)}});
  }
  return json{{"nodes", r.node_count},
              {"edges", r.edge_count},
              {"mean_degree", r.mean_degree},
              {"average_clustering", r.average_clustering},
              {"rich_club", rich},
              {"communities", r.community_sizes.size()},
              {"community_sizes", r.community_sizes},
              {"modularity", r.modularity}}
      .dump(2);
}

void write_structure_csv(const analytics::StructureReport& r, std::ostream& out) {
  const auto d = io::format_double;
  out << "metric,key,value\n";
  out << "nodes,," << r.node_count << '\n';
  out << "edges,," << r.edge_count << '\n';
  out << "mean_degree,," << d(r.mean_degree) << '\n';
  out << "average_clustering,," << d(r.average_clustering) << '\n';
  out << "modularity,," << d(r.modularity) << '\n';
  out << "communities,," << r.community_sizes.size() << '\n';
  for (std::size_t i = 0; i < r.community_sizes.size(); ++i) {
    out << "community_size," << i << ',' << r.community_sizes[i] << '\n';
  }
  for (const auto& [k, phi] : r.rich_club) {
    out << "rich_club," << k << ',' << (phi ? d(*phi) : std::string()) << '\n';
  }
}

std::string metrics_json(const gnn::Metrics& m) {
  return json{{"tp", m.tp},
              {"fp", m.fp},
              {"fn", m.fn},
              {"tn", m.tn},
              {"accuracy", m.accuracy},
              {"precision", m.precision},
              {"recall", m.recall},
              {"f1", m.f1}}
      .dump(2);
}

// ---- orchestration ---------------------------------------------------------

PreparedDataset prepare_dataset(const DatasetSpec& dataset, std::uint64_t seed, unsigned threads) {
  PreparedDataset out;
  out.graph = staged("ingest", [&] {
    SocialGraph g;
    if (dataset.synthetic()) {
      g = io::generate_synthetic_graph(dataset.synthetic_nodes, dataset.synthetic_degree, dataset.synthetic_law,
                                       dataset.synthetic_seed);
    } else {
      if (!fs::exists(*dataset.edges)) {
        throw std::runtime_error("edge list not found: " + dataset.edges->string());
      }
      g = io::load_edge_list(*dataset.edges, {dataset.format, dataset.header});
      if (dataset.attributes) {
        if (!fs::exists(*dataset.attributes)) {
          throw std::runtime_error("attribute table not found: " + dataset.attributes->string());
        }
        io::AttributeOptions options;
        options.id_column = dataset.id_column;
        g = io::attach_attributes(g, *dataset.attributes, dataset.attribute_name, options).graph;
      }
    }
    if (dataset.largest_component) {
      auto component = io::largest_connected_component(g);
      out.component_histogram = std::move(component.size_histogram);
      return std::move(component.graph);
    }
    return g;
  });
  out.centrality = staged("roles", [&] {
    auto options = analytics::default_betweenness_options(out.graph, seed);
    options.threads = threads;
    return analytics::betweenness(out.graph, options);
  });
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  staged("config", [&] { spec.validate(); });
  const PreparedDataset data = prepare_dataset(spec.dataset, spec.dataset.synthetic_seed, spec.threads);
  return run_experiment(spec, data);
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const PreparedDataset& data) {
  staged("config", [&] { spec.validate(); });
  ExperimentResult result;
  ArtifactLog log(result.files);
  const fs::path& root = spec.output.directory;
  staged("report", [&] {
    fs::create_directories(root);
    log.text(root / "spec.json", [&](std::ostream& out) { out << to_json(spec) << '\n'; });
    log.text(root / "graph.txt", [&](std::ostream& out) { io::write_canonical(data.graph, out); });
    log.text(root / "id_map.csv", [&](std::ostream& out) { io::write_id_map(data.graph, out); });
    if (!data.component_histogram.empty()) {
      log.text(root / "components.csv",
               [&](std::ostream& out) { io::write_component_histogram(data.component_histogram, out); });
    }
  });

  io::EligibilityCriterion rule;
  const auto eligibility = resolve_eligibility(spec, data.graph, rule);
  result.eligible_fraction = eligibility.fraction;
  result.eligibility_rule = rule.describe();

  if (spec.output.structure_report) {
    result.structure = staged("stats", [&] { return analytics::structure_report(data.graph, spec.seeds.front()); });
    staged("report", [&] {
      log.text(root / "structure.json", [&](std::ostream& out) { out << structure_json(*result.structure) << '\n'; });
      log.text(root / "structure.csv", [&](std::ostream& out) { write_structure_csv(*result.structure, out); });
    });
  }

  const SeedContext ctx{spec, data, eligibility,
                        spec.eligibility.target_fraction.value_or(eligibility.fraction)};
  const auto write_summary = [&] {
    log.text(root / "summary.csv", [&](std::ostream& out) {
      write_summary_header(out);
      for (const auto& s : result.seeds) write_summary_row(s.row, out);
    });
  };
  for (const std::uint64_t seed : spec.seeds) {
    try {
      result.seeds.push_back(run_seed(ctx, seed, root / ("seed-" + std::to_string(seed)), log));
    } catch (const StageError&) {
      write_summary();
      throw;
    }
  }
  staged("report", write_summary);
  return result;
}

SweepResult sweep(const SweepSpec& spec) {
  staged("config", [&] { spec.base.validate(); });
  if (spec.cell_count() == 0) throw StageError("config", "empty grid");

  struct Cell {
    double eligibility;
    double honesty;
    double root_ratio;
  };
  const auto axis = [](const std::vector<double>& v, double fallback) {
    return v.empty() ? std::vector<double>{fallback} : v;
  };
  std::vector<Cell> cells;
  for (const double e : axis(spec.eligibility, spec.base.eligibility.target_fraction.value_or(0.0))) {
    for (const double h : axis(spec.honesty, spec.base.simulation.honesty_ratio)) {
      for (const double r : axis(spec.root_ratio, spec.base.simulation.root_ratio)) {
        cells.push_back({e, h, r});
      }
    }
  }

  const PreparedDataset data = prepare_dataset(spec.base.dataset, spec.base.dataset.synthetic_seed, spec.base.threads);

  struct Job {
    std::size_t cell;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (const auto seed : spec.base.seeds) jobs.push_back({c, seed});
  }
  std::vector<SummaryRow> rows(jobs.size());
  std::vector<std::vector<fs::path>> files(jobs.size());

  const fs::path root = spec.base.output.directory;
  const auto run_job = [&](std::size_t j) {
    const Cell& cell = cells[jobs[j].cell];
    ExperimentSpec one = spec.base;
    // grid fractions take precedence over an explicit criterion
    if (!spec.eligibility.empty()) one.eligibility.target_fraction = cell.eligibility;
    one.simulation.honesty_ratio = cell.honesty;
    one.simulation.root_ratio = cell.root_ratio;
    one.seeds = {jobs[j].seed};
    one.threads = 1;
    one.output.structure_report = false;
    std::ostringstream name;
    name << "cell-" << std::setw(3) << std::setfill('0') << jobs[j].cell << "/seed-" << jobs[j].seed;
    one.output.directory = root / name.str();
    SummaryRow& row = rows[j];
    row.dataset = one.dataset.name;
    row.eligibility_target = cell.eligibility;
    row.honesty = cell.honesty;
    row.root_ratio = cell.root_ratio;
    row.seed = jobs[j].seed;
    try {
      auto result = run_experiment(one, data);
      row = result.seeds.front().row;
      files[j] = std::move(result.files);
    } catch (const std::exception& e) {
      row.status = "error";
      row.error = e.what();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(spec.base.threads, static_cast<unsigned>(jobs.size())));
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) run_job(j);
      });
    }
  }

  SweepResult result;
  for (auto& f : files) result.files.insert(result.files.end(), f.begin(), f.end());
  result.rows = rows;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<SummaryRow> cell_rows;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      if (jobs[j].cell == c) cell_rows.push_back(rows[j]);
    }
    result.rows.push_back(aggregate(cell_rows));
  }
  staged("report", [&] {
    fs::create_directories(root);
    const fs::path path = root / "sweep.csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_summary_header(out);
    for (const auto& row : result.rows) write_summary_row(row, out);
    out.close();
    result.files.push_back(path);
  });
  return result;
}

}  // namespace pollnet::experiment
