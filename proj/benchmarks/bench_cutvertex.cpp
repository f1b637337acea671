// Incremental cut-vertex maintenance against from-scratch recomputation over
// one whole growth. The growth schedule is frozen per size so both variants
// process identical inputs; per-step cut sets are what a sampler asks for
// when enumerating parent states.

#include <benchmark/benchmark.h>

#include <utility>
#include <vector>

#include "gflowx/cut_vertex.hpp"
#include "gflowx/graph.hpp"
#include "gflowx/rng.hpp"

namespace {

using namespace gflowx;

Graph random_connected_graph(int n, Rng& rng) {
  std::vector<std::pair<int, int>> edges;
  for (int v = 1; v < n; ++v) edges.emplace_back(rng.uniform_int(v), v);
  for (int k = 0; k < n / 2; ++k) {
    const int u = rng.uniform_int(n), v = rng.uniform_int(n);
    if (u != v) edges.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return build_graph(n, std::move(edges), Eigen::MatrixXd::Zero(n, 1));
}

struct Growth {
  Graph g;
  std::vector<int> order;  // node added at each step
};

Growth make_growth(int steps, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {seed_tag::kBench, static_cast<std::uint64_t>(steps)}));
  Growth gw{random_connected_graph(steps + 1, rng), {}};
  FrontierState st = make_initial_state(gw.g, 0);
  for (int i = 0; i < steps; ++i) {
    const int v = st.frontier[rng.uniform_int(static_cast<int>(st.frontier.size()))];
    gw.order.push_back(v);
    grow_state(st, gw.g, v);
  }
  return gw;
}

void BM_TrackerGrowth(benchmark::State& state) {
  const Growth gw = make_growth(static_cast<int>(state.range(0)), 7);
  for (auto _ : state) {
    FrontierState st = make_initial_state(gw.g, 0);
    for (int v : gw.order) {
      grow_state(st, gw.g, v);
      benchmark::DoNotOptimize(st.tracker.cut_vertices());
    }
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TrackerGrowth)->RangeMultiplier(2)->Range(25, 400)->Complexity();

void BM_StaticGrowth(benchmark::State& state) {
  const Growth gw = make_growth(static_cast<int>(state.range(0)), 7);
  for (auto _ : state) {
    std::vector<int> nodes{0};
    for (int v : gw.order) {
      nodes.push_back(v);
      benchmark::DoNotOptimize(static_articulation_oracle(gw.g, nodes));
    }
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_StaticGrowth)->RangeMultiplier(2)->Range(25, 400)->Complexity();

}  // namespace

BENCHMARK_MAIN();
