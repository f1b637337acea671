#pragma once

#include <cstdint>
#include <vector>

#include "gflowx/graph.hpp"

namespace gflowx {

// Incremental cut-vertex bookkeeping for a connected subgraph grown one node
// at a time. Row i describes the node inserted at position i: the row is all
// zero iff that node is currently not a cut vertex; otherwise entry (i, k)
// holds a small positive tag naming the connected component ("child group")
// of the subgraph minus node i that contains the node at position k. The
// diagonal stays zero. A freshly added node is never a cut vertex, so the
// matrix grows by a zero row and a derived column.
class CutVertexMatrix {
 public:
  CutVertexMatrix() = default;

  // Tracking starts from a 2-node subgraph over an existing edge.
  static CutVertexMatrix init(const Graph& g, int v0, int v1);

  int size() const { return t_; }
  const std::vector<int>& order() const { return order_; }
  std::int32_t tag(int i, int j) const { return z_[static_cast<std::size_t>(i) * cap_ + j]; }
  bool is_cut_position(int i) const { return cut_[i] != 0; }
  bool is_cut_node(int global_id) const;

  // nodes currently separating the subgraph, ascending global ids
  std::vector<int> cut_vertices() const;

  // z[k] = 1 iff {order[k], new_node} is an edge. Throws when new_node is
  // already tracked or attaches to nothing (that would disconnect the grown
  // subgraph).
  std::vector<std::int8_t> connectivity_vector(const Graph& g, int new_node) const;

  // Grows to (t+1) x (t+1) applying the single- or multi-attachment rule.
  void update(int new_node, const std::vector<std::int8_t>& z);

 private:
  std::int32_t* row(int i) { return z_.data() + static_cast<std::size_t>(i) * cap_; }
  const std::int32_t* row(int i) const {
    return z_.data() + static_cast<std::size_t>(i) * cap_;
  }
  void reserve(int cap);

  std::vector<int> order_;       // insertion position -> global id
  std::vector<std::int32_t> z_;  // row-major, cap_ x cap_ storage for t_ x t_ data
  std::vector<char> cut_;        // per position, row-nonzero flag
  int t_ = 0;
  int cap_ = 0;
};

// Classic linear-time articulation-point algorithm on the induced subgraph;
// reference implementation for tests and benchmarks only. Throws when the
// induced subgraph is disconnected.
std::vector<int> static_articulation_oracle(const Graph& g,
                                            const std::vector<int>& nodes);

// GFlowNet state: ordered node set, membership flags, frontier, tracker.
struct FrontierState {
  std::vector<int> nodes;     // insertion order; nodes[0] == v0
  std::vector<char> member;   // size g.num_nodes()
  std::vector<int> frontier;  // ascending global ids, disjoint from nodes
  CutVertexMatrix tracker;    // meaningful once nodes.size() >= 2
  int v0 = -1;

  int size() const { return static_cast<int>(nodes.size()); }
  bool contains(int v) const { return member[v] != 0; }
  bool in_frontier(int v) const;
};

FrontierState make_initial_state(const Graph& g, int v0);

// Adds a frontier node: appends it, refreshes the frontier, and advances the
// tracker. Throws when v is not in the frontier.
void grow_state(FrontierState& s, const Graph& g, int v);

// Nodes whose removal leaves a connected subgraph containing v0: every
// tracked node except v0 that is not a cut vertex. Each returned id v
// identifies the parent state nodes \ {v} reached by the one-step action
// "add v". Ordered by insertion position.
std::vector<int> valid_parents(const FrontierState& s);

}  // namespace gflowx
