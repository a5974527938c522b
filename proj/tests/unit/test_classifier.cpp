#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "pollnet/classifier.hpp"

using namespace pollnet;
using namespace pollnet::gnn;
using sim::WeightedArc;

namespace {

std::vector<WeightedArc> random_arcs(std::size_t n, std::size_t count, Rng& rng) {
  std::set<std::pair<NodeId, NodeId>> seen;
  std::vector<WeightedArc> arcs;
  while (arcs.size() < count) {
    const auto a = static_cast<NodeId>(rng.below(n));
    const auto b = static_cast<NodeId>(rng.below(n));
    if (a == b || !seen.insert({a, b}).second) continue;
    arcs.push_back({a, b, static_cast<std::uint32_t>(1 + rng.below(3))});
  }
  std::sort(arcs.begin(), arcs.end(), [](const auto& x, const auto& y) {
    return std::pair(x.from, x.to) < std::pair(y.from, y.to);
  });
  return arcs;
}

Matrix random_features(std::size_t n, std::size_t d, Rng& rng) {
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform(-1.0, 1.0);
  return x;
}

std::vector<NodeId> iota(std::size_t n) {
  std::vector<NodeId> v(n);
  std::iota(v.begin(), v.end(), NodeId{0});
  return v;
}

// Central differences over every parameter, or over `sample` of them.
// Differences of a loss near 0.7 at step 1e-6 carry ~1e-11 of round-off, so
// gradients below `floor` are compared on an absolute scale.
double worst_gradient_error(const SageModel& model, const GraphInput& input, const std::vector<bool>& y,
                            double pos_weight, std::size_t sample, Rng& rng, double floor = 1e-7) {
  const auto nodes = iota(input.node_count());
  SageModel grad;
  loss_and_gradient(model, input, y, nodes, pos_weight, &grad);
  const auto analytic = grad.flatten();
  auto params = model.flatten();
  SageModel probe = model;
  const double h = 1e-6;
  double worst = 0.0;
  const std::size_t total = params.size();
  const std::size_t checks = sample == 0 ? total : sample;
  for (std::size_t c = 0; c < checks; ++c) {
    const std::size_t i = sample == 0 ? c : rng.below(total);
    const double keep = params[i];
    params[i] = keep + h;
    probe.assign(params);
    const double up = loss_and_gradient(probe, input, y, nodes, pos_weight, nullptr);
    params[i] = keep - h;
    probe.assign(params);
    const double down = loss_and_gradient(probe, input, y, nodes, pos_weight, nullptr);
    params[i] = keep;
    worst = std::max(worst, fixtures::relative_error(analytic[i], (up - down) / (2 * h), floor));
  }
  return worst;
}

}  // namespace

TEST_CASE("model shapes and flattening") {
  const auto m = SageModel::glorot(64, 32, 1);
  CHECK(m.w1.rows() == 128);
  CHECK(m.w1.cols() == 32);
  CHECK(m.w2.rows() == 64);
  CHECK(m.w2.cols() == 32);
  CHECK(m.head.size() == 96);
  CHECK(m.parameter_count() == 128 * 32 + 32 + 64 * 32 + 32 + 96 + 1);
  auto copy = SageModel::zeros(64, 32);
  copy.assign(m.flatten());
  CHECK(copy.flatten() == m.flatten());
  CHECK(m.finite());
}

TEST_CASE("forward: all-zero weights give probability one half") {
  Rng rng(1);
  const auto input = make_graph_input(10, random_arcs(10, 15, rng), random_features(10, 64, rng));
  const auto logits = sage_forward(SageModel::zeros(), input);
  for (Eigen::Index i = 0; i < logits.size(); ++i) CHECK(logits(i) == 0.0);
}

TEST_CASE("forward: hand-computed three-node path") {
  // x0 = (1,0), x1 = (0,1), x2 = (1,1); arcs 0->1 and 1->2.
  Matrix x(3, 2);
  x << 1, 0, 0, 1, 1, 1;
  SageModel m = SageModel::zeros(2, 2);
  m.w1.topRows(2) = Matrix::Identity(2, 2);
  m.w1.bottomRows(2) = Matrix::Identity(2, 2);
  m.w2.topRows(2) = Matrix::Identity(2, 2);
  m.head.setOnes();
  m.head_bias = 0.5;

  SUBCASE("unit weights") {
    const std::vector<WeightedArc> arcs{{0, 1, 1}, {1, 2, 1}};
    const auto logits = sage_forward(m, make_graph_input(3, arcs, x));
    // h1 = x + mean(neighbors): (1,1), (1,1.5), (1,2); h2 = h1
    CHECK(std::abs(logits(0) - 3.5) < 1e-9);
    CHECK(std::abs(logits(1) - 4.0) < 1e-9);
    CHECK(std::abs(logits(2) - 5.5) < 1e-9);
  }
  SUBCASE("multiplicity weights the mean") {
    const std::vector<WeightedArc> arcs{{0, 1, 1}, {1, 2, 3}};
    const auto logits = sage_forward(m, make_graph_input(3, arcs, x));
    // node 1: mean = (1*x0 + 3*x2) / 4 = (1, 0.75); h1 = (1, 1.75)
    CHECK(std::abs(logits(1) - (0 + 1 + 1 + 1.75 + 0.5)) < 1e-9);
  }
}

TEST_CASE("forward: isolated node depends only on its own vector") {
  Rng rng(2);
  auto arcs = random_arcs(9, 12, rng);
  Matrix x = random_features(10, 8, rng);
  const auto m = SageModel::glorot(8, 4, 3);
  const double before = sage_forward(m, make_graph_input(10, arcs, x))(9);
  for (Eigen::Index i = 0; i < 9; ++i) x.row(i).setRandom();
  const double after = sage_forward(m, make_graph_input(10, arcs, x))(9);
  CHECK(before == after);
}

TEST_CASE("forward: dimension mismatch is an error") {
  Rng rng(3);
  const auto input = make_graph_input(5, random_arcs(5, 4, rng), random_features(5, 16, rng));
  CHECK_THROWS(sage_forward(SageModel::zeros(64, 32), input));
  CHECK_THROWS(make_graph_input(5, random_arcs(5, 4, rng), random_features(4, 16, rng)));
}

TEST_CASE("full-model gradient matches central differences") {
  Rng rng(5);
  std::vector<bool> y(10);
  for (std::size_t i = 0; i < 10; ++i) y[i] = i % 3 == 0;
  SUBCASE("every parameter of a small model at 20 random points") {
    for (int point = 0; point < 20; ++point) {
      const auto input = make_graph_input(10, random_arcs(10, 18, rng), random_features(10, 6, rng));
      auto m = SageModel::glorot(6, 5, 100 + point);
      m.b1.setConstant(0.1);
      m.b2.setConstant(0.1);
      m.head_bias = rng.uniform(-0.5, 0.5);
      CHECK(worst_gradient_error(m, input, y, 2.0, 0, rng) < 1e-4);
    }
  }
  SUBCASE("sampled parameters of the full-size model") {
    for (int point = 0; point < 20; ++point) {
      const auto input = make_graph_input(10, random_arcs(10, 18, rng), random_features(10, 64, rng));
      auto m = SageModel::glorot(64, 32, 200 + point);
      m.b1.setConstant(0.05);
      m.b2.setConstant(0.05);
      CHECK(worst_gradient_error(m, input, y, 1.5, 300, rng, 1e-6) < 1e-4);
    }
  }
}

TEST_CASE("permutation equivariance") {
  Rng rng(7);
  const std::size_t n = 12;
  const auto arcs = random_arcs(n, 25, rng);
  const Matrix x = random_features(n, 8, rng);
  std::vector<NodeId> perm = iota(n);
  rng.shuffle(std::span<NodeId>(perm));
  std::vector<WeightedArc> parcs;
  for (const auto& a : arcs) parcs.push_back({perm[a.from], perm[a.to], a.weight});
  Matrix px(x.rows(), x.cols());
  for (std::size_t i = 0; i < n; ++i) px.row(perm[i]) = x.row(static_cast<Eigen::Index>(i));
  const auto m = SageModel::glorot(8, 6, 1);
  const auto a = sage_forward(m, make_graph_input(n, arcs, x));
  const auto b = sage_forward(m, make_graph_input(n, parcs, px));
  for (std::size_t i = 0; i < n; ++i) CHECK(a(static_cast<Eigen::Index>(i)) == doctest::Approx(b(perm[i])).epsilon(1e-12));
}

TEST_CASE("stratified split") {
  std::vector<bool> y(100, false);
  for (std::size_t i = 0; i < 30; ++i) y[i * 3] = true;
  const auto s = stratified_split(y, 4);
  const auto count = [&](const std::vector<NodeId>& set) {
    return std::count_if(set.begin(), set.end(), [&](NodeId v) { return y[v]; });
  };
  CHECK(count(s.train) == 21);
  CHECK(s.train.size() - count(s.train) == 49);
  std::vector<NodeId> all;
  for (const auto* part : {&s.train, &s.validation, &s.test}) all.insert(all.end(), part->begin(), part->end());
  std::sort(all.begin(), all.end());
  CHECK(all == iota(100));
  const auto again = stratified_split(y, 4);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK(stratified_split(y, 5).train != s.train);

  std::vector<bool> few(50, false);
  for (std::size_t i = 0; i < 5; ++i) few[i] = true;
  CHECK_THROWS(stratified_split(few, 1));
  CHECK_THROWS(stratified_split(std::vector<bool>(50, false), 1));
}

TEST_CASE("metrics") {
  const auto m = Metrics::from_counts(8, 2, 2, 88);
  CHECK(m.precision == doctest::Approx(0.8));
  CHECK(m.recall == doctest::Approx(0.8));
  CHECK(m.f1 == doctest::Approx(0.8));
  CHECK(m.accuracy == doctest::Approx(0.96));
  const auto none = Metrics::from_counts(0, 0, 5, 95);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  for (std::size_t tp : {0u, 3u, 10u})
    for (std::size_t fp : {0u, 4u})
      for (std::size_t fn : {0u, 7u}) {
        const auto x = Metrics::from_counts(tp, fp, fn, 20);
        CHECK(x.accuracy == static_cast<double>(tp + 20) / static_cast<double>(tp + fp + fn + 20));
        if (x.precision + x.recall > 0) {
          CHECK(x.f1 == doctest::Approx(2 * x.precision * x.recall / (x.precision + x.recall)));
        }
        for (double v : {x.accuracy, x.precision, x.recall, x.f1}) {
          CHECK(v >= 0.0);
          CHECK(v <= 1.0);
        }
      }
  Rng rng(1);
  const auto input = make_graph_input(5, random_arcs(5, 4, rng), random_features(5, 64, rng));
  CHECK_THROWS(evaluate(SageModel::zeros(), input, std::vector<bool>(5), {}));
}

namespace {

// Positives carry a shifted first feature; graph edges are random.
struct Toy {
  GraphInput input;
  std::vector<bool> y;
};

Toy separable(std::size_t n, std::size_t positives, std::uint64_t seed, double shift = 3.0) {
  Rng rng(seed);
  Toy t;
  t.y.assign(n, false);
  for (std::size_t i = 0; i < positives; ++i) t.y[i] = true;
  Matrix x = random_features(n, 8, rng);
  for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i), 0) += t.y[i] ? shift : 0.0;
  t.input = make_graph_input(n, random_arcs(n, 2 * n, rng), std::move(x));
  return t;
}

}  // namespace

TEST_CASE("training: separable features reach train F1 of 1") {
  const auto t = separable(200, 60, 1);
  const auto split = stratified_split(t.y, 1);
  TrainOptions o;
  o.epochs = 200;
  o.hidden_dim = 8;
  const auto r = train_classifier(t.input, t.y, split, o);
  CHECK(evaluate(r.model, t.input, t.y, split.train).f1 == 1.0);
  CHECK(r.train_loss.size() == 200);
  CHECK(r.train_loss[10] < r.train_loss[0]);
  CHECK(r.positive_weight == doctest::Approx(98.0 / 42.0));
}

TEST_CASE("training: zero learning rate leaves the parameters alone") {
  const auto t = separable(100, 30, 2);
  const auto split = stratified_split(t.y, 2);
  TrainOptions o;
  o.epochs = 5;
  o.learning_rate = 0.0;
  o.hidden_dim = 4;
  const auto r = train_classifier(t.input, t.y, split, o);
  CHECK(r.model.flatten() == SageModel::glorot(8, 4, o.seed).flatten());
}

TEST_CASE("training: class weighting does not lower recall on imbalanced data") {
  double with = 0.0, without = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto t = separable(400, 20, seed, 1.0);
    const auto split = stratified_split(t.y, seed);
    TrainOptions o;
    o.epochs = 60;
    o.hidden_dim = 8;
    o.seed = seed;
    with += evaluate(train_classifier(t.input, t.y, split, o).model, t.input, t.y, split.test).recall;
    o.class_weighting = false;
    without += evaluate(train_classifier(t.input, t.y, split, o).model, t.input, t.y, split.test).recall;
  }
  CHECK(without <= with);
}

TEST_CASE("training: divergence aborts") {
  const auto t = separable(100, 30, 3);
  const auto split = stratified_split(t.y, 3);
  TrainOptions o;
  o.epochs = 50;
  o.learning_rate = 1e300;
  o.hidden_dim = 4;
  CHECK_THROWS_WITH(train_classifier(t.input, t.y, split, o), doctest::Contains("diverged"));
}

TEST_CASE("model persistence") {
  const auto m = SageModel::glorot(64, 32, 9);
  fixtures::TempDir dir("model");
  save_model(m, dir / "m.bin", R"({"seed":9})");
  CHECK(load_model(dir / "m.bin").flatten() == m.flatten());
}
