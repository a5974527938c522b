#include "pollnet/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "pollnet/rng.hpp"

namespace pollnet::gnn {
namespace {

struct ForwardCache {
  Matrix agg_x;
  Matrix z1;
  Matrix h1;
  Matrix agg_h1;
  Matrix z2;
  Matrix h2;
  Vector logits;
};

void check_shapes(const SageModel& model, const GraphInput& input) {
  const auto in = static_cast<Eigen::Index>(model.input_dim());
  const auto hidden = static_cast<Eigen::Index>(model.hidden_dim());
  if (input.features.cols() != in) {
    throw std::invalid_argument("sage: feature width " + std::to_string(input.features.cols()) +
                                " does not match model input " + std::to_string(in));
  }
  if (input.mean.rows() != input.features.rows() || input.mean.cols() != input.features.rows()) {
    throw std::invalid_argument("sage: aggregation operator does not match node count");
  }
  if (model.w1.rows() != 2 * in || model.b1.size() != hidden || model.w2.rows() != 2 * hidden ||
      model.w2.cols() != hidden || model.b2.size() != hidden || model.head.size() != in + hidden) {
    throw std::invalid_argument("sage: inconsistent parameter shapes");
  }
}

ForwardCache forward_full(const SageModel& m, const GraphInput& input) {
  check_shapes(m, input);
  const auto in = static_cast<Eigen::Index>(m.input_dim());
  const auto hidden = static_cast<Eigen::Index>(m.hidden_dim());
  const Matrix& x = input.features;
  ForwardCache c;
  c.agg_x = input.mean * x;
  c.z1 = x * m.w1.topRows(in) + c.agg_x * m.w1.bottomRows(in);
  c.z1.rowwise() += m.b1.transpose();
  c.h1 = c.z1.cwiseMax(0.0);
  c.agg_h1 = input.mean * c.h1;
  c.z2 = c.h1 * m.w2.topRows(hidden) + c.agg_h1 * m.w2.bottomRows(hidden);
  c.z2.rowwise() += m.b2.transpose();
  c.h2 = c.z2.cwiseMax(0.0);
  c.logits = x * m.head.head(in) + c.h2 * m.head.tail(hidden);
  c.logits.array() += m.head_bias;
  return c;
}

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Binary cross-entropy with logits, stable for large |z|.
double bce(double z, bool y) {
  return std::max(z, 0.0) - (y ? z : 0.0) + std::log1p(std::exp(-std::abs(z)));
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
};

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffU));
}

constexpr char kMagic[] = "PNSAGE1\n";

}  // namespace

SageModel SageModel::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  const auto in = static_cast<Eigen::Index>(input_dim);
  const auto h = static_cast<Eigen::Index>(hidden_dim);
  SageModel m;
  m.w1 = Matrix::Zero(2 * in, h);
  m.b1 = Vector::Zero(h);
  m.w2 = Matrix::Zero(2 * h, h);
  m.b2 = Vector::Zero(h);
  m.head = Vector::Zero(in + h);
  m.head_bias = 0.0;
  return m;
}

SageModel SageModel::glorot(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed) {
  SageModel m = zeros(input_dim, hidden_dim);
  Rng rng = Rng::derive(seed, "sage.init");
  const auto fill = [&rng](auto& w, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-limit, limit);
    }
  };
  fill(m.w1, static_cast<double>(m.w1.rows()), static_cast<double>(m.w1.cols()));
  fill(m.w2, static_cast<double>(m.w2.rows()), static_cast<double>(m.w2.cols()));
  fill(m.head, static_cast<double>(m.head.size()), 1.0);
  return m;
}

std::size_t SageModel::parameter_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() + head.size() + 1);
}

std::vector<double> SageModel::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  const auto append = [&out](const auto& block) {
    out.insert(out.end(), block.data(), block.data() + block.size());
  };
  append(w1);
  append(b1);
  append(w2);
  append(b2);
  append(head);
  out.push_back(head_bias);
  return out;
}

void SageModel::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("SageModel::assign: parameter count mismatch");
  }
  std::size_t pos = 0;
  const auto take = [&](auto& block) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), block.size(), block.data());
    pos += static_cast<std::size_t>(block.size());
  };
  take(w1);
  take(b1);
  take(w2);
  take(b2);
  take(head);
  head_bias = flat[pos];
}

bool SageModel::finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() && head.allFinite() &&
         std::isfinite(head_bias);
}

GraphInput make_graph_input(std::size_t node_count, std::span<const sim::WeightedArc> arcs,
                            Matrix features) {
  if (static_cast<std::size_t>(features.rows()) != node_count) {
    throw std::invalid_argument("make_graph_input: feature rows do not match node count");
  }
  // Undirected view: an arc contributes its multiplicity to both endpoints.
  std::map<std::pair<NodeId, NodeId>, double> weight;
  std::vector<double> row_sum(node_count, 0.0);
  for (const auto& a : arcs) {
    if (a.from >= node_count || a.to >= node_count) {
      throw std::invalid_argument("make_graph_input: arc endpoint out of range");
    }
    if (a.from == a.to) continue;
    weight[{a.from, a.to}] += a.weight;
    weight[{a.to, a.from}] += a.weight;
    row_sum[a.from] += a.weight;
    row_sum[a.to] += a.weight;
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(weight.size());
  for (const auto& [key, w] : weight) {
    triplets.emplace_back(static_cast<int>(key.first), static_cast<int>(key.second), w / row_sum[key.first]);
  }
  GraphInput input;
  const auto n = static_cast<Eigen::Index>(node_count);
  input.mean.resize(n, n);
  input.mean.setFromTriplets(triplets.begin(), triplets.end());
  input.features = std::move(features);
  return input;
}

GraphInput make_graph_input(const sim::DisseminationGraph& dgraph,
                            const embed::EmbeddingMatrix& static_embeddings) {
  if (static_embeddings.rows != dgraph.node_count()) {
    throw std::invalid_argument("make_graph_input: embeddings do not cover the dissemination graph");
  }
  Matrix features(static_cast<Eigen::Index>(static_embeddings.rows),
                  static_cast<Eigen::Index>(static_embeddings.dim));
  for (std::size_t i = 0; i < static_embeddings.rows; ++i) {
    const auto row = static_embeddings.row(i);
    for (std::size_t k = 0; k < static_embeddings.dim; ++k) {
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
    }
  }
  return make_graph_input(dgraph.node_count(), dgraph.arcs, std::move(features));
}

std::vector<bool> ineligible_labels(const sim::DisseminationGraph& dgraph) {
  std::vector<bool> out(dgraph.node_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = !dgraph.eligible[i];
  return out;
}

Vector sage_forward(const SageModel& model, const GraphInput& input, std::span<const NodeId> nodes) {
  const ForwardCache c = forward_full(model, input);
  if (nodes.empty()) return c.logits;
  Vector out(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) out(static_cast<Eigen::Index>(i)) = c.logits(nodes[i]);
  return out;
}

Vector sage_forward(const SageModel& model, const sim::DisseminationGraph& dgraph,
                    const embed::EmbeddingMatrix& static_embeddings, std::span<const NodeId> nodes) {
  return sage_forward(model, make_graph_input(dgraph, static_embeddings), nodes);
}

double loss_and_gradient(const SageModel& model, const GraphInput& input,
                         const std::vector<bool>& positive, std::span<const NodeId> nodes,
                         double positive_weight, SageModel* gradient) {
  if (nodes.empty()) throw std::invalid_argument("loss_and_gradient: empty node set");
  if (positive.size() != input.node_count()) {
    throw std::invalid_argument("loss_and_gradient: label count does not match node count");
  }
  const ForwardCache c = forward_full(model, input);
  const double scale = 1.0 / static_cast<double>(nodes.size());
  Vector dz = Vector::Zero(c.logits.size());
  double loss = 0.0;
  for (const NodeId v : nodes) {
    const double w = positive[v] ? positive_weight : 1.0;
    const double z = c.logits(v);
    loss += w * bce(z, positive[v]) * scale;
    dz(v) += w * (sigmoid(z) - (positive[v] ? 1.0 : 0.0)) * scale;
  }
  if (!gradient) return loss;

  const auto in = static_cast<Eigen::Index>(model.input_dim());
  const auto hidden = static_cast<Eigen::Index>(model.hidden_dim());
  const Matrix& x = input.features;
  SageModel& g = *gradient;
  g = SageModel::zeros(model.input_dim(), model.hidden_dim());

  g.head.head(in) = x.transpose() * dz;
  g.head.tail(hidden) = c.h2.transpose() * dz;
  g.head_bias = dz.sum();

  const Matrix dh2 = dz * model.head.tail(hidden).transpose();
  const Matrix dz2 = dh2.cwiseProduct((c.z2.array() > 0.0).cast<double>().matrix());
  g.w2.topRows(hidden) = c.h1.transpose() * dz2;
  g.w2.bottomRows(hidden) = c.agg_h1.transpose() * dz2;
  g.b2 = dz2.colwise().sum().transpose();

  const Matrix d_agg_h1 = dz2 * model.w2.bottomRows(hidden).transpose();
  const Matrix dh1 = dz2 * model.w2.topRows(hidden).transpose() + input.mean.transpose() * d_agg_h1;
  const Matrix dz1 = dh1.cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());
  g.w1.topRows(in) = x.transpose() * dz1;
  g.w1.bottomRows(in) = c.agg_x.transpose() * dz1;
  g.b1 = dz1.colwise().sum().transpose();
  return loss;
}

Split stratified_split(const std::vector<bool>& positive, std::uint64_t seed, SplitRatios ratios) {
  if (ratios.train <= 0.0 || ratios.validation < 0.0 || ratios.test < 0.0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("stratified_split: ratios must be non-negative and sum to 1");
  }
  Split split;
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<NodeId> members;
    for (std::size_t v = 0; v < positive.size(); ++v) {
      if (positive[v] == (cls == 1)) members.push_back(static_cast<NodeId>(v));
    }
    const char* name = cls == 1 ? "positive" : "negative";
    if (members.empty()) {
      throw std::invalid_argument(std::string("stratified_split: no ") + name + " nodes");
    }
    if (members.size() < 10) {
      throw std::invalid_argument(std::string("stratified_split: only ") +
                                  std::to_string(members.size()) + " " + name +
                                  " nodes (need at least 10)");
    }
    Rng rng = Rng::derive(seed, "split", static_cast<std::uint64_t>(cls));
    rng.shuffle(std::span<NodeId>(members));
    const auto count = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * count));
    const auto n_val = std::min(members.size() - n_train,
                                static_cast<std::size_t>(std::llround(ratios.validation * count)));
    const auto mid = members.begin() + static_cast<std::ptrdiff_t>(n_train);
    const auto end_val = mid + static_cast<std::ptrdiff_t>(n_val);
    split.train.insert(split.train.end(), members.begin(), mid);
    split.validation.insert(split.validation.end(), mid, end_val);
    split.test.insert(split.test.end(), end_val, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Metrics Metrics::from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  const auto total = static_cast<double>(tp + fp + fn + tn);
  m.accuracy = total > 0 ? static_cast<double>(tp + tn) / total : 0.0;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

Metrics evaluate(const SageModel& model, const GraphInput& input, const std::vector<bool>& positive,
                 std::span<const NodeId> nodes) {
  if (nodes.empty()) throw std::invalid_argument("evaluate: empty node set");
  const Vector logits = sage_forward(model, input, nodes);
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const bool predicted = sigmoid(logits(static_cast<Eigen::Index>(i))) > 0.5;
    const bool actual = positive[nodes[i]];
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  return Metrics::from_counts(tp, fp, fn, tn);
}

Metrics evaluate(const SageModel& model, const sim::DisseminationGraph& dgraph,
                 const embed::EmbeddingMatrix& static_embeddings, std::span<const NodeId> nodes) {
  return evaluate(model, make_graph_input(dgraph, static_embeddings), ineligible_labels(dgraph), nodes);
}

TrainResult train_classifier(const GraphInput& input, const std::vector<bool>& positive,
                             const Split& split, const TrainOptions& options) {
  if (split.train.empty() || split.validation.empty()) {
    throw std::invalid_argument("train_classifier: split needs train and validation nodes");
  }
  TrainResult result;
  result.model = SageModel::glorot(static_cast<std::size_t>(input.features.cols()), options.hidden_dim,
                                   options.seed);
  std::size_t pos = 0;
  for (const NodeId v : split.train) pos += positive[v] ? 1 : 0;
  const std::size_t neg = split.train.size() - pos;
  result.positive_weight =
      options.class_weighting && pos > 0 ? static_cast<double>(neg) / static_cast<double>(pos) : 1.0;

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  std::vector<double> params = result.model.flatten();
  AdamState adam{std::vector<double>(params.size(), 0.0), std::vector<double>(params.size(), 0.0), 0};

  SageModel current = result.model;
  SageModel grad;
  double best_f1 = -1.0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const double loss =
        loss_and_gradient(current, input, positive, split.train, result.positive_weight, &grad);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("train_classifier: loss diverged at epoch " + std::to_string(epoch));
    }
    result.train_loss.push_back(loss);

    const Metrics val = evaluate(current, input, positive, split.validation);
    const double val_loss =
        loss_and_gradient(current, input, positive, split.validation, result.positive_weight, nullptr);
    result.validation_f1.push_back(val.f1);
    if (val.f1 > best_f1 || (val.f1 == best_f1 && val_loss < best_val_loss)) {
      best_f1 = val.f1;
      best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.model = current;
    }

    const std::vector<double> g = grad.flatten();
    ++adam.t;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      adam.m[i] = kBeta1 * adam.m[i] + (1.0 - kBeta1) * g[i];
      adam.v[i] = kBeta2 * adam.v[i] + (1.0 - kBeta2) * g[i] * g[i];
      params[i] -= options.learning_rate *
                   ((adam.m[i] / c1) / (std::sqrt(adam.v[i] / c2) + kEps) + options.weight_decay * params[i]);
    }
    current.assign(params);
    if (!current.finite()) {
      throw std::runtime_error("train_classifier: parameters diverged at epoch " + std::to_string(epoch));
    }
  }
  return result;
}

TrainResult train_classifier(const sim::DisseminationGraph& dgraph,
                             const embed::EmbeddingMatrix& static_embeddings, const Split& split,
                             const TrainOptions& options) {
  return train_classifier(make_graph_input(dgraph, static_embeddings), ineligible_labels(dgraph), split,
                          options);
}

void save_model(const SageModel& model, const std::filesystem::path& path,
                const std::string& header_json) {
  nlohmann::json header = nlohmann::json::parse(header_json);
  header["input_dim"] = model.input_dim();
  header["hidden_dim"] = model.hidden_dim();
  header["parameter_count"] = model.parameter_count();
  header["dtype"] = "float64-le";
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic) - 1);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const double p : model.flatten()) {
    const auto bits = std::bit_cast<std::uint64_t>(p);
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xffU));
  }
}

SageModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[sizeof(kMagic) - 1] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw std::runtime_error(path.string() + ": not a model file");
  }
  unsigned char len_bytes[4] = {};
  in.read(reinterpret_cast<char*>(len_bytes), 4);
  const std::uint32_t len = len_bytes[0] | (len_bytes[1] << 8) | (len_bytes[2] << 16) |
                            (static_cast<std::uint32_t>(len_bytes[3]) << 24);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  const auto header = nlohmann::json::parse(text);
  SageModel model = SageModel::zeros(header.at("input_dim").get<std::size_t>(),
                                     header.at("hidden_dim").get<std::size_t>());
  std::vector<double> flat(model.parameter_count());
  for (auto& p : flat) {
    unsigned char b[8] = {};
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error(path.string() + ": truncated parameters");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    p = std::bit_cast<double>(bits);
  }
  model.assign(flat);
  return model;
}

}  // namespace pollnet::gnn
