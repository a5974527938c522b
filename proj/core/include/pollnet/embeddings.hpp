#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "pollnet/graph.hpp"

namespace pollnet::embed {

struct WalkOptions {
  std::size_t walk_length = 32;
  std::size_t walks_per_node = 50;
  /// return bias: weight 1/p for stepping back to the previous node
  double p = 1.0;
  /// in-out bias: weight 1/q for moving away from the previous node
  double q = 1.0;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct WalkCorpus {
  std::vector<std::vector<NodeId>> walks;
  std::size_t node_count = 0;
  std::size_t walk_length = 0;
  std::size_t walks_per_node = 0;
  double p = 1.0;
  double q = 1.0;

  std::size_t token_count() const;
};

/// Second-order biased random walks. Walk r of source s is stored at index
/// r * node_count + s and generated from a per-source generator, so the
/// corpus does not depend on the thread count.
WalkCorpus generate_walks(const SocialGraph& graph, const WalkOptions& options);

struct SkipGramOptions {
  std::size_t dim = 64;
  std::size_t window = 10;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  /// Draw the effective window per center uniformly from [1, window].
  bool shrink_window = true;
  std::uint64_t seed = 1;
};

struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> values;  // row-major
  std::vector<double> epoch_loss;
  std::uint64_t seed = 0;

  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  std::span<float> row(std::size_t i) { return {values.data() + i * dim, dim}; }
  double cosine(std::size_t i, std::size_t j) const;
};

/// Skip-gram with negative sampling (noise ∝ frequency^0.75), linear
/// learning-rate decay, single worker. Returns the input-side vectors.
EmbeddingMatrix train_skipgram(const WalkCorpus& corpus, const SkipGramOptions& options);

namespace detail {

// Eight independent partial sums let the compiler vectorize without
// reassociating a single accumulator.
template <class T>
T dot(const T* a, const T* b, std::size_t d) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= d; i += 8) {
    for (std::size_t k = 0; k < 8; ++k) acc[k] += a[i + k] * b[i + k];
  }
  for (; i < d; ++i) acc[0] += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

// Returns log σ(x) and stores σ(x), sharing one exponential.
template <class T>
T log_sigmoid(T x, T& sigma) {
  const T e = std::exp(-std::abs(x));
  if (x >= 0) {
    sigma = T(1) / (T(1) + e);
    return -std::log1p(e);
  }
  sigma = e / (T(1) + e);
  return x - std::log1p(e);
}

}  // namespace detail

/// Loss of one (center, context, negatives) tuple,
///   -log σ(c·o) - Σ_k log σ(-c·n_k),
/// and its gradients. `negatives` and `grad_negatives` hold k rows of
/// center.size() entries each.
template <class T>
T negative_sampling_loss(std::span<const T> center, std::span<const T> context,
                         std::span<const T> negatives, std::span<T> grad_center,
                         std::span<T> grad_context, std::span<T> grad_negatives) {
  const std::size_t d = center.size();
  T sigma = 0;
  T loss = -detail::log_sigmoid(detail::dot(center.data(), context.data(), d), sigma);
  const T g_pos = sigma - T(1);
  for (std::size_t i = 0; i < d; ++i) {
    grad_center[i] = g_pos * context[i];
    grad_context[i] = g_pos * center[i];
  }
  const std::size_t k = negatives.size() / d;
  for (std::size_t j = 0; j < k; ++j) {
    const T* n = negatives.data() + j * d;
    T* gn = grad_negatives.data() + j * d;
    // σ(-x) = 1 - σ(x); the gradient needs σ(x) = 1 - sigma.
    loss -= detail::log_sigmoid(-detail::dot(center.data(), n, d), sigma);
    const T g_neg = T(1) - sigma;
    for (std::size_t i = 0; i < d; ++i) {
      grad_center[i] += g_neg * n[i];
      gn[i] = g_neg * center[i];
    }
  }
  return loss;
}

// Persistence.
void write_corpus(const WalkCorpus& corpus, std::ostream& out);
WalkCorpus read_corpus(std::istream& in);
/// Binary layout: "PNEMB1\n", u32 little-endian JSON header length, JSON
/// header {dim, node_count, seed, epochs, epoch_loss}, float32 LE rows.
void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
void write_embeddings_csv(const EmbeddingMatrix& matrix, std::ostream& out);

}  // namespace pollnet::embed
