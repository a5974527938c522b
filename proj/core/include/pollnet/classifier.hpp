#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pollnet/embeddings.hpp"
#include "pollnet/simulator.hpp"

namespace pollnet::gnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Two mean-aggregator SAGE layers plus a linear head over
/// concat(static input, second-layer output).
///
///   h1 = relu([x, mean_N(x)] * w1 + b1)
///   h2 = relu([h1, mean_N(h1)] * w2 + b2)
///   logit = [x, h2] * head + head_bias
struct SageModel {
  Matrix w1;  // 2*input x hidden
  Vector b1;
  Matrix w2;  // 2*hidden x hidden
  Vector b2;
  Vector head;  // input + hidden
  double head_bias = 0.0;

  static SageModel zeros(std::size_t input_dim = 64, std::size_t hidden_dim = 32);
  /// Glorot-uniform weights, zero biases.
  static SageModel glorot(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.rows() / 2); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t parameter_count() const;
  /// Parameters in the order w1, b1, w2, b2, head, head_bias (column-major).
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  bool finite() const;
};

/// Dissemination-graph structure and node features in the form the model
/// consumes. `mean` is the row-normalized undirected adjacency with arc
/// multiplicities as weights (all-zero row for isolated nodes).
struct GraphInput {
  SparseRowMatrix mean;
  Matrix features;

  std::size_t node_count() const { return static_cast<std::size_t>(features.rows()); }
};

GraphInput make_graph_input(const sim::DisseminationGraph& dgraph,
                            const embed::EmbeddingMatrix& static_embeddings);
GraphInput make_graph_input(std::size_t node_count, std::span<const sim::WeightedArc> arcs,
                            Matrix features);

/// Positive class = ineligible.
std::vector<bool> ineligible_labels(const sim::DisseminationGraph& dgraph);

/// Logits for `nodes` (all nodes when empty).
Vector sage_forward(const SageModel& model, const GraphInput& input, std::span<const NodeId> nodes = {});
Vector sage_forward(const SageModel& model, const sim::DisseminationGraph& dgraph,
                    const embed::EmbeddingMatrix& static_embeddings, std::span<const NodeId> nodes = {});

/// Class-weighted binary cross-entropy averaged over `nodes`; positives are
/// weighted by `positive_weight`. Fills `gradient` (same shape as model)
/// when non-null.
double loss_and_gradient(const SageModel& model, const GraphInput& input,
                         const std::vector<bool>& positive, std::span<const NodeId> nodes,
                         double positive_weight, SageModel* gradient);

struct Split {
  std::vector<NodeId> train;
  std::vector<NodeId> validation;
  std::vector<NodeId> test;
};

struct SplitRatios {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

/// Per-class shuffled partition. Requires at least 10 nodes in each class.
Split stratified_split(const std::vector<bool>& positive, std::uint64_t seed, SplitRatios ratios = {});

struct Metrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static Metrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);
};

/// Predicted positive when sigmoid(logit) > 0.5.
Metrics evaluate(const SageModel& model, const GraphInput& input, const std::vector<bool>& positive,
                 std::span<const NodeId> nodes);
Metrics evaluate(const SageModel& model, const sim::DisseminationGraph& dgraph,
                 const embed::EmbeddingMatrix& static_embeddings, std::span<const NodeId> nodes);

struct TrainOptions {
  std::size_t epochs = 300;
  double learning_rate = 0.01;
  /// Decoupled (AdamW-style) decay applied to every parameter each step.
  double weight_decay = 0.0;
  bool class_weighting = true;
  std::size_t hidden_dim = 32;
  std::uint64_t seed = 1;
};

struct TrainResult {
  SageModel model;
  std::vector<double> train_loss;
  std::vector<double> validation_f1;
  std::size_t best_epoch = 0;
  double positive_weight = 1.0;
};

/// Full-batch Adam on the train nodes; keeps the parameters of the epoch
/// with the best validation F1 (ties: lower validation loss, then earlier).
TrainResult train_classifier(const GraphInput& input, const std::vector<bool>& positive,
                             const Split& split, const TrainOptions& options);
TrainResult train_classifier(const sim::DisseminationGraph& dgraph,
                             const embed::EmbeddingMatrix& static_embeddings, const Split& split,
                             const TrainOptions& options);

/// Binary layout: "PNSAGE1\n", u32 LE JSON header length, JSON header,
/// float64 LE parameters in flatten() order.
void save_model(const SageModel& model, const std::filesystem::path& path,
                const std::string& header_json = "{}");
SageModel load_model(const std::filesystem::path& path);

}  // namespace pollnet::gnn
