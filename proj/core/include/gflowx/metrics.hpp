#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gflowx/dataset.hpp"
#include "gflowx/explainer.hpp"
#include "gflowx/gnn.hpp"

namespace gflowx {

// An ordered explanation with rank-derived importance weights. Node ids are
// dataset-global; earlier insertion means more important.
struct Explanation {
  int instance = -1;
  std::vector<int> nodes;                  // insertion order
  std::vector<double> node_weights;        // 1 - rank / max_nodes
  std::vector<std::pair<int, int>> edges;  // induced edges, u < v
  std::vector<double> edge_weights;        // 1 - max(rank u, rank v) / max_nodes
};

// Builds the explanation from a rollout over ctx.local. Edges and nodes are
// ordered by importance: descending weight, ties by (min endpoint rank, then
// lexicographic edge id).
Explanation make_explanation(const InstanceContext& ctx,
                             const std::vector<int>& local_nodes, int max_nodes);

// Rollout + weight assembly for one instance. v0 is a local node id
// (ctx.root for node tasks, the locator pick for graph tasks); rng == nullptr
// takes greedy argmax-flow actions.
Explanation explain(const PolicyParams& policy, const InstanceContext& ctx, int v0,
                    const EnvConfig& cfg, Rng* rng = nullptr);

// Mann-Whitney ROC-AUC with average ranks on ties. Returns NaN when either
// class is empty.
double roc_auc(const std::vector<double>& scores, const std::vector<char>& labels);

struct EvalOptions {
  EnvConfig env;
  bool sample = false;        // greedy rollouts by default
  std::uint64_t seed = 1;     // drives sampled rollouts
  int topk = 0;               // 0: use the instance's own motif size
  bool auc_all_edges = false; // negatives from the whole graph, not the L-hop graph
};

struct InstanceMetrics {
  int instance = -1;
  double auc = 0.0;       // NaN when the instance's edge set has one class only
  double fidelity = 0.0;  // predicted-class probability drop when removing the explanation
  double sparsity = 0.0;  // fraction of the computation graph left out
  double topk = 0.0;      // fraction of the first k nodes inside the motif
};

struct EvalResult {
  std::vector<InstanceMetrics> per_instance;
  std::vector<Explanation> explanations;
  // means over instances (AUC over instances where it is defined)
  double auc = 0.0;
  double fidelity = 0.0;
  double sparsity = 0.0;
  double topk = 0.0;
};

// Explains every dataset instance and scores the explanations against the
// motif ground truth. Requires motif masks. The locator may be empty for
// node tasks.
EvalResult evaluate(const Dataset& ds, const GnnModel& model,
                    const PolicyParams& policy, const Mlp& locator,
                    const EvalOptions& opt);

void write_metrics_csv(const std::string& path, const EvalResult& r);
void write_explanation_csv(const std::string& path, const Explanation& e);
// DOT rendering; motif nodes are filled, the instance is double-circled.
void write_explanation_dot(const std::string& path, const Explanation& e,
                           const Graph& g);

// Seeded random growth comparing the incremental cut-vertex tracker against
// full recomputation, with the two cut sets re-checked for equality at every
// step. n growth steps per trial, one row per step.
struct BenchRow {
  int trial = 0;
  int step = 0;
  double incremental_ns = 0.0;
  double static_ns = 0.0;
};
std::vector<BenchRow> bench_cutvertex(int n, int trials, std::uint64_t seed);
void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows);

}  // namespace gflowx
