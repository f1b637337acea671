#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gflowx/graph.hpp"

namespace gflowx {

enum class Task { kNode, kGraph };

struct Dataset {
  Task task = Task::kNode;
  int num_classes = 0;
  std::vector<Graph> graphs;   // exactly one for the node task
  std::vector<int> instances;  // node ids (node task) or graph indices (graph task)
  std::uint64_t split_seed = 0;

  const Graph& graph() const { return graphs.front(); }
};

// Text format, one document per dataset. Sections appear in fixed order;
// floating point values are written shortest-round-trip so save(load(f))
// reproduces f byte for byte. See README for the field list.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// In-memory variants used by the round-trip tests.
std::string serialize_dataset(const Dataset& ds);
Dataset parse_dataset(const std::string& text);

struct GenParams {
  int base_nodes = -1;    // -1: per-kind default
  int num_motifs = 80;
  int noise_edges = -1;   // -1: 10% of the motif count
  int ba_m = -1;          // edges per new node in preferential attachment
  int feature_dim = 10;
  int num_graphs = 1000;      // ba-2motifs
  int graph_base_nodes = 20;  // ba-2motifs base size
  int inter_edges = -1;       // ba-community bridges; -1: num_nodes / 4
};

// kinds: ba-shapes | ba-community | tree-cycles | tree-grid | ba-2motifs
Dataset gen_dataset(const std::string& kind, const GenParams& params,
                    std::uint64_t seed);

}  // namespace gflowx
