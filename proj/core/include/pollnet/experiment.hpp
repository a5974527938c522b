#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pollnet/analytics.hpp"
#include "pollnet/classifier.hpp"
#include "pollnet/embeddings.hpp"
#include "pollnet/graph_io.hpp"
#include "pollnet/simulator.hpp"

namespace pollnet::experiment {

/// Error raised by a pipeline stage. what() is "<stage>: <detail>".
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& detail);
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string stage_;
  std::string detail_;
};

/// Either a file-backed dataset (edges plus optional attributes) or a
/// synthetic preferential-attachment twin.
struct DatasetSpec {
  std::string name = "synthetic";
  std::optional<std::filesystem::path> edges;
  std::optional<std::filesystem::path> attributes;
  std::string attribute_name = "attribute";
  io::EdgeFormat format = io::EdgeFormat::whitespace;
  io::HeaderMode header = io::HeaderMode::automatic;
  std::string id_column;
  bool largest_component = true;

  std::size_t synthetic_nodes = 9500;
  double synthetic_degree = 32.0;
  io::AttributeLaw synthetic_law{io::AttributeLaw::Kind::lognormal, 8.0, 2.0};
  std::uint64_t synthetic_seed = 1;

  bool synthetic() const { return !edges.has_value(); }
};

/// Exactly one of target_fraction / criterion is used; the fraction wins
/// when both are set.
struct EligibilitySpec {
  std::optional<double> target_fraction = 0.387;
  std::optional<io::EligibilityCriterion> criterion;
  io::EligibilityCriterion::Kind fraction_kind = io::EligibilityCriterion::Kind::at_least;
};

struct OutputSpec {
  std::filesystem::path directory = "pollnet-out";
  bool write_walks = true;
  bool write_trace = true;
  bool structure_report = true;
};

struct ExperimentSpec {
  DatasetSpec dataset;
  EligibilitySpec eligibility;
  sim::SimulationConfig simulation;
  embed::WalkOptions walks;
  embed::SkipGramOptions skipgram;
  gnn::TrainOptions classifier;
  OutputSpec output;
  std::vector<std::uint64_t> seeds{1};
  unsigned threads = 1;

  /// Throws std::invalid_argument with the offending key.
  void validate() const;
};

/// Grid axes; an empty axis means "the base spec's value".
struct SweepSpec {
  ExperimentSpec base;
  std::vector<double> eligibility;
  std::vector<double> honesty;
  std::vector<double> root_ratio;

  std::size_t cell_count() const;
};

// JSON schema: unknown keys are rejected.
std::string to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_from_json(const std::string& text);
ExperimentSpec load_experiment(const std::filesystem::path& path);
std::string to_json(const SweepSpec& spec);
SweepSpec sweep_from_json(const std::string& text);
SweepSpec load_sweep(const std::filesystem::path& path);

/// One line of the summary CSV. `kind` is "run" for a single seed or
/// "aggregate" for the mean over the successful seeds of a cell, in which
/// case the *_std columns hold the population standard deviation.
struct SummaryRow {
  std::string kind = "run";
  std::string dataset;
  double eligibility_target = 0.0;
  double eligibility = 0.0;
  double honesty = 0.0;
  double root_ratio = 0.0;
  std::optional<std::uint64_t> seed;
  std::size_t runs = 1;
  std::string status = "ok";
  double coverage = 0.0;
  double coverage_std = 0.0;
  double dgraph_nodes = 0.0;
  double dgraph_arcs = 0.0;
  double positives = 0.0;
  double accuracy = 0.0;
  double accuracy_std = 0.0;
  double precision = 0.0;
  double precision_std = 0.0;
  double recall = 0.0;
  double recall_std = 0.0;
  double f1 = 0.0;
  double f1_std = 0.0;
  double non_root_below_30 = 0.0;
  std::size_t best_epoch = 0;
  std::string trace_hash;
  std::string error;

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

const std::vector<std::string>& summary_columns();
void write_summary_header(std::ostream& out);
void write_summary_row(const SummaryRow& row, std::ostream& out);
std::vector<SummaryRow> read_summary(std::istream& in);

struct SeedResult {
  SummaryRow row;
  sim::ParticipationHistogram histogram;
  gnn::Metrics test_metrics;
  std::vector<double> train_loss;
  std::vector<double> embedding_loss;
};

struct ExperimentResult {
  std::vector<SeedResult> seeds;
  std::optional<analytics::StructureReport> structure;
  double eligible_fraction = 0.0;
  std::string eligibility_rule;
  /// Every file written by the run, in creation order.
  std::vector<std::filesystem::path> files;
};

/// Social graph after ingest, shared by all seeds and sweep cells.
struct PreparedDataset {
  SocialGraph graph;
  analytics::CentralityVector centrality;
  std::map<std::size_t, std::size_t> component_histogram;
};

PreparedDataset prepare_dataset(const DatasetSpec& dataset, std::uint64_t seed, unsigned threads);

/// Runs every stage for every seed. A failing seed aborts the run with a
/// StageError after its partial artifacts are flushed.
ExperimentResult run_experiment(const ExperimentSpec& spec);
ExperimentResult run_experiment(const ExperimentSpec& spec, const PreparedDataset& dataset);

struct SweepResult {
  std::vector<SummaryRow> rows;  // per-seed rows, then one aggregate row per cell
  std::vector<std::filesystem::path> files;
};

/// Cartesian grid over eligibility x honesty x root_ratio x seeds on a pool of
/// `base.threads` workers. A failing cell is recorded with status "error" and
/// does not stop the others.
SweepResult sweep(const SweepSpec& spec);

std::string structure_json(const analytics::StructureReport& report);
/// Long format: metric,key,value.
void write_structure_csv(const analytics::StructureReport& report, std::ostream& out);
std::string metrics_json(const gnn::Metrics& metrics);

/// Mean and population standard deviation of the "ok" rows.
SummaryRow aggregate(const std::vector<SummaryRow>& runs);

}  // namespace pollnet::experiment
