#include "pollnet/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include "json.hpp"
#include <ostream>
#include <sstream>
#include <string>
#include <thread>

#include "pollnet/rng.hpp"

namespace pollnet::embed {
namespace {

NodeId next_step(const SocialGraph& g, NodeId prev, NodeId cur, double p, double q, Rng& rng,
                 std::vector<double>& weights) {
  const auto adj = g.neighbors(cur);
  if (p == 1.0 && q == 1.0) {
    return adj[rng.below(adj.size())];
  }
  weights.resize(adj.size());
  double total = 0.0;
  for (std::size_t i = 0; i < adj.size(); ++i) {
    const NodeId x = adj[i];
    const double w = x == prev ? 1.0 / p : (g.has_edge(prev, x) ? 1.0 : 1.0 / q);
    total += w;
    weights[i] = total;
  }
  const double r = rng.uniform() * total;
  const auto it = std::upper_bound(weights.begin(), weights.end(), r);
  return adj[std::min<std::size_t>(static_cast<std::size_t>(it - weights.begin()), adj.size() - 1)];
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4] = {};
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw std::runtime_error("embeddings: truncated file");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

constexpr char kMagic[] = "PNEMB1\n";

// Lookup table where node v fills a share of slots proportional to
// count(v)^0.75; a uniform slot is a draw from the noise distribution.
std::vector<NodeId> build_noise_table(const std::vector<double>& counts) {
  const std::size_t slots = std::max<std::size_t>(1'000'000, 64 * counts.size());
  double total = 0.0;
  for (const double c : counts) total += std::pow(c, 0.75);
  std::vector<NodeId> table;
  table.reserve(slots);
  double cumulative = 0.0;
  NodeId last_seen = 0;
  for (std::size_t v = 0; v < counts.size(); ++v) {
    if (counts[v] > 0.0) last_seen = static_cast<NodeId>(v);
    cumulative += std::pow(counts[v], 0.75);
    const auto upto = static_cast<std::size_t>(std::llround(cumulative / total * static_cast<double>(slots)));
    while (table.size() < upto) table.push_back(static_cast<NodeId>(v));
  }
  while (table.size() < slots) table.push_back(last_seen);
  return table;
}

}  // namespace

std::size_t WalkCorpus::token_count() const {
  std::size_t total = 0;
  for (const auto& w : walks) total += w.size();
  return total;
}

WalkCorpus generate_walks(const SocialGraph& graph, const WalkOptions& options) {
  if (graph.empty()) throw std::invalid_argument("generate_walks: empty graph");
  if (options.walk_length < 2) throw std::invalid_argument("generate_walks: walk_length must be >= 2");
  if (!(options.p > 0.0) || !(options.q > 0.0)) {
    throw std::invalid_argument("generate_walks: p and q must be positive");
  }
  const std::size_t n = graph.node_count();
  WalkCorpus corpus;
  corpus.node_count = n;
  corpus.walk_length = options.walk_length;
  corpus.walks_per_node = options.walks_per_node;
  corpus.p = options.p;
  corpus.q = options.q;
  corpus.walks.resize(n * options.walks_per_node);

  const auto walk_sources = [&](std::size_t begin, std::size_t end) {
    std::vector<double> weights;
    for (std::size_t s = begin; s < end; ++s) {
      Rng rng = Rng::derive(options.seed, "walks.source", s);
      for (std::size_t r = 0; r < options.walks_per_node; ++r) {
        auto& walk = corpus.walks[r * n + s];
        walk.reserve(options.walk_length);
        walk.push_back(static_cast<NodeId>(s));
        while (walk.size() < options.walk_length) {
          const NodeId cur = walk.back();
          if (graph.degree(cur) == 0) break;
          const NodeId prev = walk.size() >= 2 ? walk[walk.size() - 2] : cur;
          walk.push_back(walk.size() >= 2
                             ? next_step(graph, prev, cur, options.p, options.q, rng, weights)
                             : graph.neighbors(cur)[rng.below(graph.degree(cur))]);
        }
      }
    }
  };

  const unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                                : options.threads;
  if (threads <= 1 || n < 2 * threads) {
    walk_sources(0, n);
  } else {
    std::vector<std::jthread> workers;
    const std::size_t per = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * per;
      const std::size_t end = std::min(n, begin + per);
      if (begin < end) workers.emplace_back(walk_sources, begin, end);
    }
  }
  return corpus;
}

double EmbeddingMatrix::cosine(std::size_t i, std::size_t j) const {
  const auto a = row(i);
  const auto b = row(j);
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    ab += static_cast<double>(a[k]) * b[k];
    aa += static_cast<double>(a[k]) * a[k];
    bb += static_cast<double>(b[k]) * b[k];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

EmbeddingMatrix train_skipgram(const WalkCorpus& corpus, const SkipGramOptions& options) {
  const std::size_t n = corpus.node_count;
  const std::size_t d = options.dim;
  const std::size_t tokens = corpus.token_count();
  if (tokens == 0 || n == 0) throw std::invalid_argument("train_skipgram: empty corpus");
  if (d == 0 || options.window == 0) throw std::invalid_argument("train_skipgram: dim and window must be positive");

  std::vector<double> counts(n, 0.0);
  for (const auto& walk : corpus.walks) {
    for (const NodeId v : walk) {
      if (v >= n) throw std::invalid_argument("train_skipgram: token out of range");
      counts[v] += 1.0;
    }
  }
  const std::vector<NodeId> noise_table = build_noise_table(counts);

  Rng rng = Rng::derive(options.seed, "skipgram");
  EmbeddingMatrix input;
  input.rows = n;
  input.dim = d;
  input.seed = options.seed;
  input.values.resize(n * d);
  for (auto& x : input.values) {
    x = static_cast<float>((rng.uniform() - 0.5) / static_cast<double>(d));
  }
  std::vector<float> output(n * d, 0.0f);

  const auto table_size = static_cast<double>(noise_table.size());
  const auto draw_noise = [&]() {
    return noise_table[static_cast<std::size_t>(rng.uniform() * table_size)];
  };

  std::vector<float> neg_rows(options.negatives * d);
  std::vector<NodeId> neg_ids(options.negatives);
  std::vector<float> g_center(d), g_context(d), g_neg(options.negatives * d);
  const double total_steps = static_cast<double>(options.epochs) * static_cast<double>(tokens);
  double processed = 0.0;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t pairs = 0;
    for (const auto& walk : corpus.walks) {
      for (std::size_t i = 0; i < walk.size(); ++i, processed += 1.0) {
        const double lr = options.learning_rate * std::max(1e-4, 1.0 - processed / total_steps);
        const auto flr = static_cast<float>(lr);
        const std::size_t span_w =
            options.shrink_window ? 1 + static_cast<std::size_t>(rng.below(options.window)) : options.window;
        const std::size_t lo = i >= span_w ? i - span_w : 0;
        const std::size_t hi = std::min(walk.size() - 1, i + span_w);
        float* center = input.values.data() + static_cast<std::size_t>(walk[i]) * d;
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const NodeId ctx = walk[j];
          std::size_t k = 0;
          for (std::size_t s = 0; s < options.negatives; ++s) {
            const NodeId noise = draw_noise();
            if (noise == ctx) continue;
            neg_ids[k] = noise;
            std::memcpy(neg_rows.data() + k * d, output.data() + static_cast<std::size_t>(noise) * d,
                        d * sizeof(float));
            ++k;
          }
          float* context = output.data() + static_cast<std::size_t>(ctx) * d;
          const float loss = negative_sampling_loss<float>(
              {center, d}, {context, d}, {neg_rows.data(), k * d}, g_center, g_context,
              {g_neg.data(), k * d});
          if (!std::isfinite(loss)) {
            throw std::runtime_error("train_skipgram: non-finite loss in epoch " + std::to_string(epoch));
          }
          loss_sum += loss;
          ++pairs;
          for (std::size_t t = 0; t < d; ++t) context[t] -= flr * g_context[t];
          for (std::size_t s = 0; s < k; ++s) {
            float* row = output.data() + static_cast<std::size_t>(neg_ids[s]) * d;
            const float* g = g_neg.data() + s * d;
            for (std::size_t t = 0; t < d; ++t) row[t] -= flr * g[t];
          }
          for (std::size_t t = 0; t < d; ++t) center[t] -= flr * g_center[t];
        }
      }
    }
    input.epoch_loss.push_back(pairs ? loss_sum / static_cast<double>(pairs) : 0.0);
  }
  return input;
}

void write_corpus(const WalkCorpus& corpus, std::ostream& out) {
  out << "# pollnet walks nodes=" << corpus.node_count << " walk_length=" << corpus.walk_length
      << " walks_per_node=" << corpus.walks_per_node << " p=" << corpus.p << " q=" << corpus.q
      << '\n';
  for (const auto& walk : corpus.walks) {
    for (std::size_t i = 0; i < walk.size(); ++i) {
      if (i) out << ' ';
      out << walk[i];
    }
    out << '\n';
  }
}

WalkCorpus read_corpus(std::istream& in) {
  WalkCorpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto key = kv.substr(0, eq);
        const auto value = kv.substr(eq + 1);
        if (key == "nodes") corpus.node_count = std::stoull(value);
        if (key == "walk_length") corpus.walk_length = std::stoull(value);
        if (key == "walks_per_node") corpus.walks_per_node = std::stoull(value);
        if (key == "p") corpus.p = std::stod(value);
        if (key == "q") corpus.q = std::stod(value);
      }
      continue;
    }
    std::istringstream ss(line);
    std::vector<NodeId> walk;
    NodeId v = 0;
    while (ss >> v) walk.push_back(v);
    corpus.walks.push_back(std::move(walk));
  }
  return corpus;
}

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const nlohmann::json header = {{"dim", matrix.dim},
                                 {"node_count", matrix.rows},
                                 {"seed", matrix.seed},
                                 {"epochs", matrix.epoch_loss.size()},
                                 {"epoch_loss", matrix.epoch_loss},
                                 {"dtype", "float32-le"}};
  const std::string text = header.dump();
  out.write(kMagic, sizeof(kMagic) - 1);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const float x : matrix.values) put_u32(out, std::bit_cast<std::uint32_t>(x));
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[sizeof(kMagic) - 1] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw std::runtime_error(path.string() + ": not an embedding file");
  }
  std::string text(get_u32(in), '\0');
  in.read(text.data(), static_cast<std::streamsize>(text.size()));
  const auto header = nlohmann::json::parse(text);
  EmbeddingMatrix m;
  m.dim = header.at("dim").get<std::size_t>();
  m.rows = header.at("node_count").get<std::size_t>();
  m.seed = header.at("seed").get<std::uint64_t>();
  m.epoch_loss = header.at("epoch_loss").get<std::vector<double>>();
  m.values.resize(m.rows * m.dim);
  for (auto& x : m.values) x = std::bit_cast<float>(get_u32(in));
  return m;
}

void write_embeddings_csv(const EmbeddingMatrix& matrix, std::ostream& out) {
  out << "node";
  for (std::size_t k = 0; k < matrix.dim; ++k) out << ",e" << k;
  out << '\n';
  for (std::size_t i = 0; i < matrix.rows; ++i) {
    out << i;
    for (const float x : matrix.row(i)) out << ',' << x;
    out << '\n';
  }
}

}  // namespace pollnet::embed
