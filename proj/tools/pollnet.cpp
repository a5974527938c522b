// pollnet: command-line driver for the dissemination / detection pipeline.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "pollnet/analytics.hpp"
#include "pollnet/classifier.hpp"
#include "pollnet/embeddings.hpp"
#include "pollnet/experiment.hpp"
#include "pollnet/graph_io.hpp"
#include "pollnet/simulator.hpp"

namespace fs = std::filesystem;
using namespace pollnet;
using experiment::StageError;
using nlohmann::json;

namespace {

struct Globals {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::optional<unsigned> threads;
};

template <class F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

template <class T>
void override_with(const std::optional<T>& value, T& target) {
  if (value) target = *value;
}

// Options shared by the stage subcommands; every one is optional so that a
// --config file supplies the defaults.
struct SimulationFlags {
  std::optional<double> honesty, roots, p_mal, alpha, beta;
  std::optional<std::uint32_t> fan_out, hop_cap, capacity, ballots, bonus;
  std::optional<bool> forwarding_uses_budget;

  void add(CLI::App* app) {
    app->add_option("--honesty", honesty, "Fraction of honest nodes");
    app->add_option("--roots", roots, "Fraction of nodes acting as roots");
    app->add_option("--p-mal", p_mal, "Probability that a dishonest node acts maliciously");
    app->add_option("--alpha", alpha, "Participation law quantile");
    app->add_option("--beta", beta, "Participation law degree fraction");
    app->add_option("--fan-out", fan_out, "Targets per forward");
    app->add_option("--hop-cap", hop_cap, "Maximum hops per ballot lineage");
    app->add_option("--capacity", capacity, "Participations per ballot lineage");
    app->add_option("--ballots-per-root", ballots, "Initial ballots per root");
    app->add_option("--root-bonus", bonus, "Extra participations granted to roots");
    app->add_option("--forwarding-uses-budget", forwarding_uses_budget,
                    "Cap forwarding deliveries by the participation budget");
  }
  void apply_to(sim::SimulationConfig& c) const {
    override_with(honesty, c.honesty_ratio);
    override_with(roots, c.root_ratio);
    override_with(p_mal, c.dishonest_action_prob);
    override_with(alpha, c.alpha);
    override_with(beta, c.beta);
    override_with(fan_out, c.fan_out);
    override_with(hop_cap, c.hop_cap);
    override_with(capacity, c.ballot_capacity);
    override_with(ballots, c.ballots_per_root);
    override_with(bonus, c.root_bonus_participations);
    override_with(forwarding_uses_budget, c.forwarding_uses_budget);
  }
};

struct EmbeddingFlags {
  std::optional<std::size_t> walk_length, walks, dim, window, negatives, epochs;
  std::optional<double> p, q, lr;

  void add(CLI::App* app) {
    app->add_option("--walk-length", walk_length);
    app->add_option("--walks-per-node", walks);
    app->add_option("--p", p, "Return bias");
    app->add_option("--q", q, "In-out bias");
    app->add_option("--dim", dim);
    app->add_option("--window", window);
    app->add_option("--negatives", negatives);
    app->add_option("--epochs", epochs);
    app->add_option("--lr", lr);
  }
  void apply_to(experiment::ExperimentSpec& s) const {
    override_with(walk_length, s.walks.walk_length);
    override_with(walks, s.walks.walks_per_node);
    override_with(p, s.walks.p);
    override_with(q, s.walks.q);
    override_with(dim, s.skipgram.dim);
    override_with(window, s.skipgram.window);
    override_with(negatives, s.skipgram.negatives);
    override_with(epochs, s.skipgram.epochs);
    override_with(lr, s.skipgram.learning_rate);
  }
};

struct ClassifierFlags {
  std::optional<std::size_t> epochs;
  std::optional<double> lr, weight_decay;
  std::optional<bool> class_weighting;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs);
    app->add_option("--lr", lr);
    app->add_option("--weight-decay", weight_decay);
    app->add_option("--class-weighting", class_weighting);
  }
  void apply_to(gnn::TrainOptions& t) const {
    override_with(epochs, t.epochs);
    override_with(lr, t.learning_rate);
    override_with(weight_decay, t.weight_decay);
    override_with(class_weighting, t.class_weighting);
  }
};

experiment::ExperimentSpec base_spec(const Globals& g) {
  experiment::ExperimentSpec spec =
      g.config ? stage("config", [&] { return experiment::load_experiment(*g.config); }) : experiment::ExperimentSpec{};
  if (g.seed) spec.seeds = {*g.seed};
  if (g.out) spec.output.directory = *g.out;
  if (g.threads) spec.threads = *g.threads;
  return spec;
}

sim::DisseminationGraph load_dgraph(const fs::path& dir) {
  auto nodes = open_in(dir / "dissemination_nodes.csv");
  auto edges = open_in(dir / "dissemination_edges.csv");
  return sim::read_dissemination_graph(nodes, edges);
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pollnet: poll dissemination simulation and ineligible-participant detection"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Experiment spec (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed; replaces the spec's seed list");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load or generate a social graph and write its canonical form");
  std::optional<fs::path> edges, attributes;
  std::optional<std::string> attribute_name, id_column, format, header;
  bool keep_all = false;
  std::optional<std::size_t> syn_nodes;
  std::optional<double> syn_degree, law_a, law_b;
  std::optional<std::string> law_kind;
  ingest->add_option("--edges", edges, "Edge list path");
  ingest->add_option("--attributes", attributes, "Attribute table (CSV/TSV with header)");
  ingest->add_option("--attribute-name", attribute_name, "Numeric column used for eligibility");
  ingest->add_option("--id-column", id_column, "Column with node labels");
  ingest->add_option("--format", format, "csv, tsv or whitespace");
  ingest->add_option("--header", header, "auto, present or absent");
  ingest->add_flag("--keep-all-components", keep_all, "Skip the largest-component filter");
  ingest->add_option("--nodes", syn_nodes, "Synthetic graph size");
  ingest->add_option("--mean-degree", syn_degree, "Synthetic graph mean degree");
  ingest->add_option("--law", law_kind, "Synthetic attribute law: uniform, normal, lognormal, exponential");
  ingest->add_option("--law-a", law_a);
  ingest->add_option("--law-b", law_b);

  // stats
  auto* stats = app.add_subcommand("stats", "Structural report (clustering, rich-club, communities)");
  std::optional<fs::path> stats_graph, stats_dgraph;
  bool with_betweenness = false;
  stats->add_option("--graph", stats_graph, "Canonical graph file")->check(CLI::ExistingFile);
  stats->add_option("--dissemination", stats_dgraph, "Directory with dissemination_nodes/edges.csv")
      ->check(CLI::ExistingDirectory);
  stats->add_flag("--betweenness", with_betweenness, "Also write betweenness.csv");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Assign roles and run the dissemination protocol");
  std::optional<fs::path> sim_graph;
  std::optional<double> eligible_fraction, cutoff;
  SimulationFlags sim_flags;
  simulate->add_option("--graph", sim_graph, "Canonical graph file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--eligible-fraction", eligible_fraction, "Target eligible fraction");
  simulate->add_option("--cutoff", cutoff, "Eligible when attribute >= cutoff");
  sim_flags.add(simulate);

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "Random walks and skip-gram on a dissemination graph");
  std::optional<fs::path> embed_dir;
  EmbeddingFlags embed_flags;
  bool no_walks = false;
  embed_cmd->add_option("--dissemination", embed_dir, "Directory with dissemination_nodes/edges.csv")
      ->required()
      ->check(CLI::ExistingDirectory);
  embed_cmd->add_flag("--no-walk-file", no_walks, "Do not write walks.txt");
  embed_flags.add(embed_cmd);

  // train
  auto* train = app.add_subcommand("train", "Train the message-passing classifier");
  std::optional<fs::path> train_dir, train_emb;
  ClassifierFlags train_flags;
  train->add_option("--dissemination", train_dir)->required()->check(CLI::ExistingDirectory);
  train->add_option("--embeddings", train_emb, "embeddings.bin")->required()->check(CLI::ExistingFile);
  train_flags.add(train);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a trained model");
  std::optional<fs::path> eval_dir, eval_emb, eval_model;
  std::string subset = "test";
  evaluate->add_option("--dissemination", eval_dir)->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--embeddings", eval_emb)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--model", eval_model)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--subset", subset, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));

  // run / sweep
  auto* run = app.add_subcommand("run", "Run every stage for each seed of a spec");
  app.add_subcommand("sweep", "Run a spec over an eligibility x honesty x roots grid");
  bool print_spec = false;
  run->add_flag("--print-spec", print_spec, "Print the effective spec and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // help and version exit 0; every usage error exits 1
    return app.exit(e) == 0 ? 0 : 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    experiment::ExperimentSpec spec = command == "sweep" ? experiment::ExperimentSpec{} : base_spec(g);
    const fs::path out = g.out.value_or(spec.output.directory);
    const std::uint64_t seed = spec.seeds.front();

    if (command == "ingest") {
      auto& d = spec.dataset;
      if (edges) d.edges = *edges;
      if (attributes) d.attributes = *attributes;
      override_with(attribute_name, d.attribute_name);
      override_with(id_column, d.id_column);
      if (format) d.format = stage("ingest", [&] { return io::parse_edge_format(*format); });
      if (header) {
        d.header = *header == "present" ? io::HeaderMode::present
                   : *header == "absent" ? io::HeaderMode::absent
                                         : io::HeaderMode::automatic;
      }
      if (keep_all) d.largest_component = false;
      override_with(syn_nodes, d.synthetic_nodes);
      override_with(syn_degree, d.synthetic_degree);
      if (law_kind || law_a || law_b) {
        d.synthetic_law = stage("ingest", [&] {
          return io::AttributeLaw::parse(law_kind.value_or(std::string(d.synthetic_law.kind_name())),
                                         law_a.value_or(d.synthetic_law.a), law_b.value_or(d.synthetic_law.b));
        });
      }
      if (g.seed) d.synthetic_seed = *g.seed;
      const auto data = experiment::prepare_dataset(d, seed, spec.threads);
      stage("ingest", [&] {
        fs::create_directories(out);
        io::save_canonical(data.graph, out / "graph.txt");
        auto ids = open_out(out / "id_map.csv");
        io::write_id_map(data.graph, ids);
        if (!data.component_histogram.empty()) {
          auto comp = open_out(out / "components.csv");
          io::write_component_histogram(data.component_histogram, comp);
        }
      });
      std::cout << "nodes " << data.graph.node_count() << " edges " << data.graph.edge_count() << " mean_degree "
                << io::format_double(data.graph.mean_degree()) << '\n';
    } else if (command == "stats") {
      if (!stats_graph == !stats_dgraph) throw StageError("stats", "give exactly one of --graph or --dissemination");
      const SocialGraph graph = stage("stats", [&] {
        return stats_graph ? io::load_canonical(*stats_graph) : load_dgraph(*stats_dgraph).undirected_view();
      });
      const auto report = stage("stats", [&] { return analytics::structure_report(graph, seed); });
      stage("stats", [&] {
        fs::create_directories(out);
        write_text(out / "stats.json", experiment::structure_json(report));
        auto csv = open_out(out / "stats.csv");
        experiment::write_structure_csv(report, csv);
        if (with_betweenness) {
          auto options = analytics::default_betweenness_options(graph, seed);
          options.threads = spec.threads;
          const auto bc = analytics::betweenness(graph, options);
          auto f = open_out(out / "betweenness.csv");
          f << "node,label,betweenness\n";
          for (NodeId v = 0; v < graph.node_count(); ++v) {
            f << v << ',' << graph.label(v) << ',' << io::format_double(bc.scores[v]) << '\n';
          }
        }
      });
      std::cout << experiment::structure_json(report) << '\n';
    } else if (command == "simulate") {
      sim_flags.apply_to(spec.simulation);
      const SocialGraph graph = stage("ingest", [&] { return io::load_canonical(*sim_graph); });
      const auto eligibility = stage("eligibility", [&] {
        if (!graph.has_attributes()) throw std::invalid_argument("graph has no node attribute");
        io::EligibilityCriterion rule;
        if (cutoff) {
          rule = io::EligibilityCriterion::at_least(*cutoff);
        } else {
          const double target = eligible_fraction.value_or(spec.eligibility.target_fraction.value_or(0.387));
          rule = spec.eligibility.criterion && !eligible_fraction
                     ? *spec.eligibility.criterion
                     : io::criterion_for_fraction(graph.attributes(), target, spec.eligibility.fraction_kind);
        }
        return io::apply_eligibility(graph, rule);
      });
      if (!eligibility.warning.empty()) std::cerr << "warning: " << eligibility.warning << '\n';
      const auto trace = stage("simulate", [&] {
        auto options = analytics::default_betweenness_options(graph, seed);
        options.threads = spec.threads;
        const auto bc = analytics::betweenness(graph, options);
        auto profiles = sim::assign_roles(graph, eligibility.eligible, bc, spec.simulation, seed);
        return sim::run_dissemination(graph, std::move(profiles), spec.simulation, seed);
      });
      const auto dgraph = stage("simulate", [&] {
        fs::create_directories(out);
        auto t = open_out(out / "trace.txt");
        sim::write_trace(trace, t);
        auto h = open_out(out / "participation_histogram.csv");
        sim::write_histogram(sim::participation_histogram(trace), h);
        auto built = sim::build_dissemination_graph(trace, eligibility.eligible);
        auto n = open_out(out / "dissemination_nodes.csv");
        sim::write_dissemination_nodes(built, graph, n);
        auto e = open_out(out / "dissemination_edges.csv");
        sim::write_dissemination_edges(built, e);
        return built;
      });
      const json summary = {{"seed", seed},
                            {"eligible_fraction", eligibility.fraction},
                            {"coverage", sim::coverage(trace, graph)},
                            {"events", trace.events.size()},
                            {"dissemination_nodes", dgraph.node_count()},
                            {"dissemination_arcs", dgraph.arcs.size()},
                            {"trace_hash", sim::trace_hash(trace)}};
      write_text(out / "simulation.json", summary.dump(2));
      std::cout << summary.dump(2) << '\n';
    } else if (command == "embed") {
      embed_flags.apply_to(spec);
      const auto dgraph = stage("embed", [&] { return load_dgraph(*embed_dir); });
      const auto matrix = stage("embed", [&] {
        embed::WalkOptions walks = spec.walks;
        walks.seed = seed;
        walks.threads = spec.threads;
        const auto corpus = embed::generate_walks(dgraph.undirected_view(), walks);
        fs::create_directories(out);
        if (!no_walks) {
          auto w = open_out(out / "walks.txt");
          embed::write_corpus(corpus, w);
        }
        embed::SkipGramOptions options = spec.skipgram;
        options.seed = seed;
        auto m = embed::train_skipgram(corpus, options);
        embed::save_embeddings(m, out / "embeddings.bin");
        auto csv = open_out(out / "embeddings.csv");
        embed::write_embeddings_csv(m, csv);
        return m;
      });
      std::cout << "rows " << matrix.rows << " dim " << matrix.dim << " final_loss "
                << io::format_double(matrix.epoch_loss.back()) << '\n';
    } else if (command == "train") {
      train_flags.apply_to(spec.classifier);
      const auto dgraph = stage("train", [&] { return load_dgraph(*train_dir); });
      const auto emb = stage("train", [&] { return embed::load_embeddings(*train_emb); });
      const auto result = stage("train", [&] {
        const auto labels = gnn::ineligible_labels(dgraph);
        const auto split = gnn::stratified_split(labels, seed);
        gnn::TrainOptions options = spec.classifier;
        options.seed = seed;
        auto r = gnn::train_classifier(gnn::make_graph_input(dgraph, emb), labels, split, options);
        fs::create_directories(out);
        const json header = {{"seed", seed},
                             {"input_dim", emb.dim},
                             {"hidden_dim", options.hidden_dim},
                             {"epochs", options.epochs},
                             {"learning_rate", options.learning_rate},
                             {"weight_decay", options.weight_decay},
                             {"class_weighting", options.class_weighting},
                             {"best_epoch", r.best_epoch},
                             {"positive_weight", r.positive_weight}};
        gnn::save_model(r.model, out / "model.bin", header.dump());
        write_text(out / "training.json",
                   json{{"train_loss", r.train_loss}, {"validation_f1", r.validation_f1}}.dump(2));
        return r;
      });
      std::cout << "best_epoch " << result.best_epoch << " validation_f1 "
                << io::format_double(result.validation_f1.at(result.best_epoch)) << '\n';
    } else if (command == "evaluate") {
      const auto metrics = stage("evaluate", [&] {
        const auto dgraph = load_dgraph(*eval_dir);
        const auto emb = embed::load_embeddings(*eval_emb);
        const auto model = gnn::load_model(*eval_model);
        const auto labels = gnn::ineligible_labels(dgraph);
        std::vector<NodeId> nodes;
        if (subset == "all") {
          nodes.resize(dgraph.node_count());
          for (NodeId v = 0; v < nodes.size(); ++v) nodes[v] = v;
        } else {
          const auto split = gnn::stratified_split(labels, seed);
          nodes = subset == "train" ? split.train : subset == "validation" ? split.validation : split.test;
        }
        return gnn::evaluate(model, gnn::make_graph_input(dgraph, emb), labels, nodes);
      });
      const std::string text = experiment::metrics_json(metrics);
      stage("evaluate", [&] {
        fs::create_directories(out);
        write_text(out / "metrics.json", text);
      });
      std::cout << text << '\n';
    } else if (command == "run") {
      if (print_spec) {
        std::cout << experiment::to_json(spec) << '\n';
        return EXIT_SUCCESS;
      }
      const auto result = experiment::run_experiment(spec);
      experiment::write_summary_header(std::cout);
      for (const auto& s : result.seeds) experiment::write_summary_row(s.row, std::cout);
    } else if (command == "sweep") {
      experiment::SweepSpec sweep_spec =
          g.config ? stage("config", [&] { return experiment::load_sweep(*g.config); }) : experiment::SweepSpec{};
      if (g.seed) sweep_spec.base.seeds = {*g.seed};
      if (g.out) sweep_spec.base.output.directory = *g.out;
      if (g.threads) sweep_spec.base.threads = *g.threads;
      const auto result = experiment::sweep(sweep_spec);
      std::size_t failed = 0;
      for (const auto& row : result.rows) failed += row.kind == "run" && row.status != "ok";
      std::cout << "rows " << result.rows.size() << " failed " << failed << " table "
                << (sweep_spec.base.output.directory / "sweep.csv").string() << '\n';
      if (failed > 0) return 3;
    }
  } catch (const StageError& e) {
    std::cerr << "pollnet " << command << " failed [" << e.stage() << "]: " << e.detail() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pollnet " << command << " failed [" << command << "]: " << e.what() << '\n';
    return 2;
  }
  return EXIT_SUCCESS;
}
