#include <benchmark/benchmark.h>

#include <map>

#include "pollnet/analytics.hpp"
#include "pollnet/embeddings.hpp"
#include "pollnet/graph_io.hpp"
#include "pollnet/simulator.hpp"

using namespace pollnet;

namespace {

const SocialGraph& graph_of(std::size_t n) {
  static std::map<std::size_t, SocialGraph> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, io::generate_synthetic_graph(n, 16, {}, 1)).first;
  return it->second;
}

void BM_BetweennessExact(benchmark::State& state) {
  const auto& g = graph_of(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(analytics::betweenness(g).scores.data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BetweennessExact)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_BetweennessSampled(benchmark::State& state) {
  const auto& g = graph_of(static_cast<std::size_t>(state.range(0)));
  analytics::BetweennessOptions o;
  o.mode = analytics::BetweennessMode::sampled;
  o.pivots = 256;
  for (auto _ : state) benchmark::DoNotOptimize(analytics::betweenness(g, o).scores.data());
}
BENCHMARK(BM_BetweennessSampled)->Arg(2000)->Arg(9500)->Unit(benchmark::kMillisecond);

void BM_Dissemination(benchmark::State& state) {
  const auto& g = graph_of(static_cast<std::size_t>(state.range(0)));
  const auto centrality = analytics::degree_centrality(g);
  std::vector<bool> eligible(g.node_count());
  for (NodeId v = 0; v < g.node_count(); ++v) eligible[v] = v % 5 < 2;
  sim::SimulationConfig config;
  const auto profiles = sim::assign_roles(g, eligible, centrality, config, 1);
  std::size_t events = 0;
  for (auto _ : state) {
    const auto trace = sim::run_dissemination(g, profiles, config, 1);
    events = trace.events.size();
    benchmark::DoNotOptimize(events);
  }
  state.counters["events"] = static_cast<double>(events);
}
BENCHMARK(BM_Dissemination)->Arg(2000)->Arg(9500)->Unit(benchmark::kMillisecond);

void BM_Walks(benchmark::State& state) {
  const auto& g = graph_of(2000);
  embed::WalkOptions o;
  o.walks_per_node = 10;
  o.q = static_cast<double>(state.range(0)) / 2.0;
  for (auto _ : state) benchmark::DoNotOptimize(embed::generate_walks(g, o).walks.size());
}
BENCHMARK(BM_Walks)->Arg(2)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SkipGramEpoch(benchmark::State& state) {
  const auto& g = graph_of(2000);
  embed::WalkOptions wo;
  wo.walks_per_node = 5;
  const auto corpus = embed::generate_walks(g, wo);
  embed::SkipGramOptions so;
  so.epochs = 1;
  so.dim = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(embed::train_skipgram(corpus, so).values.data());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * corpus.token_count()));
}
BENCHMARK(BM_SkipGramEpoch)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
