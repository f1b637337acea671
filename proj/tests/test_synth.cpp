#include <algorithm>
#include <set>
#include <vector>

#include "doctest.h"
#include "gflowx/dataset.hpp"
#include "oracles.hpp"

using namespace gflowx;

namespace {

GenParams small_params() {
  GenParams p;
  p.base_nodes = 60;
  p.num_motifs = 8;
  p.noise_edges = 2;
  return p;
}

void check_motif_ground_truth(const Graph& g, int motif_size, int motif_edges,
                              int num_motifs) {
  int flagged = 0;
  for (char c : g.motif_nodes) flagged += (c != 0);
  CHECK(flagged == motif_size * num_motifs);
  int fe = 0;
  for (int ei = 0; ei < g.num_edges(); ++ei) {
    if (g.motif_edges[ei]) {
      ++fe;
      const auto& [u, v] = g.edges()[ei];
      CHECK(g.motif_nodes[u]);
      CHECK(g.motif_nodes[v]);
    }
  }
  CHECK(fe == motif_edges * num_motifs);
}

std::vector<int> all_nodes(const Graph& g) {
  std::vector<int> v(g.num_nodes());
  for (int i = 0; i < g.num_nodes(); ++i) v[i] = i;
  return v;
}

}  // namespace

TEST_CASE("synth: ba-shapes plants houses with role labels") {
  const Dataset ds = gen_dataset("ba-shapes", small_params(), 3);
  CHECK(ds.task == Task::kNode);
  CHECK(ds.num_classes == 4);
  const Graph& g = ds.graph();
  CHECK(g.num_nodes() == 60 + 8 * 5);
  CHECK(oracle::connected(g, all_nodes(g)));
  check_motif_ground_truth(g, 5, 6, 8);
  // labels: 0 on the base, house roles use 1..3 with counts 2/2/1 per motif
  int c1 = 0, c2 = 0, c3 = 0;
  for (int v = 0; v < g.num_nodes(); ++v) {
    if (!g.motif_nodes[v]) {
      CHECK(g.node_labels()[v] == 0);
    } else {
      c1 += g.node_labels()[v] == 1;
      c2 += g.node_labels()[v] == 2;
      c3 += g.node_labels()[v] == 3;
    }
  }
  CHECK(c1 == 16);
  CHECK(c2 == 16);
  CHECK(c3 == 8);
  // instances are exactly the motif nodes
  for (int v : ds.instances) CHECK(g.motif_nodes[v]);
  CHECK(static_cast<int>(ds.instances.size()) == 40);
}

TEST_CASE("synth: tree-cycles and tree-grid plant the right structures") {
  GenParams p = small_params();
  const Dataset cyc = gen_dataset("tree-cycles", p, 5);
  CHECK(cyc.num_classes == 2);
  CHECK(cyc.graph().num_nodes() == 60 + 8 * 6);
  check_motif_ground_truth(cyc.graph(), 6, 6, 8);
  CHECK(oracle::connected(cyc.graph(), all_nodes(cyc.graph())));

  const Dataset grid = gen_dataset("tree-grid", p, 5);
  CHECK(grid.graph().num_nodes() == 60 + 8 * 9);
  check_motif_ground_truth(grid.graph(), 9, 12, 8);
  CHECK(oracle::connected(grid.graph(), all_nodes(grid.graph())));
}

TEST_CASE("synth: ba-community merges two labeled communities") {
  GenParams p = small_params();
  p.inter_edges = 10;
  const Dataset ds = gen_dataset("ba-community", p, 7);
  CHECK(ds.num_classes == 8);
  const Graph& g = ds.graph();
  const int half = 60 + 8 * 5;
  CHECK(g.num_nodes() == 2 * half);
  for (int v = 0; v < g.num_nodes(); ++v) {
    const int l = g.node_labels()[v];
    if (v < half) {
      CHECK(l <= 3);
    } else {
      CHECK((l == 0 || l >= 4));
    }
  }
  // gaussian features separate the halves in expectation
  double m0 = 0, m1 = 0;
  for (int v = 0; v < half; ++v) m0 += g.features().row(v).mean();
  for (int v = half; v < 2 * half; ++v) m1 += g.features().row(v).mean();
  CHECK(m1 / half - m0 / half > 0.5);
  CHECK(oracle::connected(g, all_nodes(g)));
}

TEST_CASE("synth: ba-2motifs alternates house and cycle graphs") {
  GenParams p;
  p.num_graphs = 10;
  p.graph_base_nodes = 12;
  const Dataset ds = gen_dataset("ba-2motifs", p, 9);
  CHECK(ds.task == Task::kGraph);
  REQUIRE(ds.graphs.size() == 10);
  CHECK(ds.instances.size() == 10);
  for (int i = 0; i < 10; ++i) {
    const Graph& g = ds.graphs[i];
    CHECK(g.graph_label() == i % 2);
    CHECK(g.num_nodes() == 17);  // 12 base + 5-node motif either way
    int flagged = 0;
    for (char c : g.motif_nodes) flagged += (c != 0);
    CHECK(flagged == 5);
    CHECK(oracle::connected(g, all_nodes(g)));
  }
}

TEST_CASE("synth: generation is seed deterministic") {
  const GenParams p = small_params();
  const Dataset a = gen_dataset("ba-shapes", p, 11);
  const Dataset b = gen_dataset("ba-shapes", p, 11);
  const Dataset c = gen_dataset("ba-shapes", p, 12);
  CHECK(serialize_dataset(a) == serialize_dataset(b));
  CHECK(serialize_dataset(a) != serialize_dataset(c));
}

TEST_CASE("synth: default sizes match the published benchmarks") {
  const Dataset ds = gen_dataset("ba-shapes", GenParams{}, 1);
  CHECK(ds.graph().num_nodes() == 700);  // 300 base + 80 houses
  CHECK(static_cast<int>(ds.instances.size()) == 400);
  const Dataset tc = gen_dataset("tree-cycles", GenParams{}, 1);
  CHECK(tc.graph().num_nodes() == 871);  // 391 tree + 80 hexagons
}

TEST_CASE("synth: invalid parameters are rejected") {
  GenParams p;
  p.num_motifs = 0;
  CHECK_THROWS_AS(gen_dataset("ba-shapes", p, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_dataset("unknown-kind", GenParams{}, 1), std::invalid_argument);
}
