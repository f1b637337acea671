#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace gflowx {

class Graph;

// Normalized adjacency with self loops: D^{-1/2} (A + I) D^{-1/2}.
// The sparse form always exists; a dense mirror is materialized at
// construction for small graphs where dense products win (restricted
// subgraph predictions run on <= max-subgraph-size node sets).
// Immutable after construction, safe to share across threads.
class NormalizedAdjacency {
 public:
  static constexpr int kDenseLimit = 256;

  explicit NormalizedAdjacency(const Graph& g);

  int size() const { return n_; }
  const Eigen::SparseMatrix<double>& sparse() const { return sparse_; }
  bool has_dense() const { return dense_.size() > 0; }
  const Eigen::MatrixXd& dense() const { return dense_; }

  Eigen::MatrixXd multiply(const Eigen::MatrixXd& h) const {
    return has_dense() ? Eigen::MatrixXd(dense_ * h) : Eigen::MatrixXd(sparse_ * h);
  }

 private:
  int n_ = 0;
  Eigen::SparseMatrix<double> sparse_;
  Eigen::MatrixXd dense_;
};

// Undirected graph with per-node features and optional labels. Edges are
// stored canonically (u < v, sorted) plus CSR neighbor lists for O(deg)
// iteration. Immutable after construction except the motif masks, which the
// dataset generators fill in right after building.
class Graph {
 public:
  Graph() = default;
  Graph(int num_nodes, std::vector<std::pair<int, int>> edges,
        Eigen::MatrixXd features, std::vector<int> node_labels = {},
        int graph_label = -1);

  int num_nodes() const { return num_nodes_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const Eigen::MatrixXd& features() const { return features_; }
  int feature_dim() const { return static_cast<int>(features_.cols()); }
  const std::vector<int>& node_labels() const { return node_labels_; }
  bool has_node_labels() const { return !node_labels_.empty(); }
  int graph_label() const { return graph_label_; }

  std::span<const int> neighbors(int v) const {
    return {adj_.data() + adj_ptr_[v],
            static_cast<std::size_t>(adj_ptr_[v + 1] - adj_ptr_[v])};
  }
  int degree(int v) const { return adj_ptr_[v + 1] - adj_ptr_[v]; }
  bool has_edge(int u, int v) const;

  const NormalizedAdjacency& normalized_adjacency() const { return *norm_; }

  // ground-truth membership; empty when the dataset has no planted motifs
  std::vector<char> motif_nodes;  // size num_nodes() or empty
  std::vector<char> motif_edges;  // aligned with edges() or empty

 private:
  int num_nodes_ = 0;
  std::vector<std::pair<int, int>> edges_;
  Eigen::MatrixXd features_;
  std::vector<int> node_labels_;
  int graph_label_ = -1;
  std::vector<int> adj_ptr_;
  std::vector<int> adj_;
  std::shared_ptr<const NormalizedAdjacency> norm_;
};

Graph build_graph(int num_nodes, std::vector<std::pair<int, int>> edges,
                  Eigen::MatrixXd features, std::vector<int> node_labels = {},
                  int graph_label = -1);

inline const NormalizedAdjacency& normalized_adjacency(const Graph& g) {
  return g.normalized_adjacency();
}

struct LhopResult {
  Graph graph;                 // induced subgraph, local ids ascending in global order
  std::vector<int> to_global;  // local id -> global id
  std::vector<int> to_local;   // global id -> local id, -1 outside
  int local_root = -1;         // local id of the query node
};

// Induced subgraph on every node within `hops` edges of v (BFS levels).
LhopResult l_hop_subgraph(const Graph& g, int v, int hops);

// Induced subgraph on an explicit node set (local ids follow ascending
// global order). Motif masks are carried over; connectivity is not required.
Graph induced_subgraph(const Graph& g, std::vector<int> nodes,
                       std::vector<int>* to_local = nullptr);

// Nodes and edges of the motif containing `v`, i.e. the connected component
// of v in the subgraph formed by motif edges alone. Motifs are vertex
// disjoint so this recovers exactly the planted structure around v.
// Returns empty sets when v is not a motif node.
struct MotifComponent {
  std::vector<int> nodes;           // ascending
  std::vector<char> edge_in_motif;  // aligned with g.edges()
  int edge_count = 0;
};
MotifComponent instance_motif_component(const Graph& g, int v);

}  // namespace gflowx
