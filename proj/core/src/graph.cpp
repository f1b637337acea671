#include "gflowx/graph.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>
#include <string>

namespace gflowx {

NormalizedAdjacency::NormalizedAdjacency(const Graph& g) : n_(g.num_nodes()) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n_) + 2 * g.edges().size());
  std::vector<double> inv_sqrt(n_);
  for (int v = 0; v < n_; ++v) inv_sqrt[v] = 1.0 / std::sqrt(g.degree(v) + 1.0);
  for (int v = 0; v < n_; ++v) trips.emplace_back(v, v, inv_sqrt[v] * inv_sqrt[v]);
  for (const auto& [u, v] : g.edges()) {
    const double w = inv_sqrt[u] * inv_sqrt[v];
    trips.emplace_back(u, v, w);
    trips.emplace_back(v, u, w);
  }
  sparse_.resize(n_, n_);
  sparse_.setFromTriplets(trips.begin(), trips.end());
  sparse_.makeCompressed();
  if (n_ <= kDenseLimit) dense_ = Eigen::MatrixXd(sparse_);
}

Graph::Graph(int num_nodes, std::vector<std::pair<int, int>> edges,
             Eigen::MatrixXd features, std::vector<int> node_labels,
             int graph_label)
    : num_nodes_(num_nodes),
      features_(std::move(features)),
      node_labels_(std::move(node_labels)),
      graph_label_(graph_label) {
  if (num_nodes_ < 0) throw std::invalid_argument("graph: negative node count");
  if (features_.rows() != num_nodes_) {
    throw std::invalid_argument("graph: feature rows (" +
                                std::to_string(features_.rows()) +
                                ") != num_nodes (" + std::to_string(num_nodes_) + ")");
  }
  if (!node_labels_.empty() &&
      static_cast<int>(node_labels_.size()) != num_nodes_) {
    throw std::invalid_argument("graph: node label count != num_nodes");
  }
  for (auto& [u, v] : edges) {
    if (u < 0 || u >= num_nodes_ || v < 0 || v >= num_nodes_) {
      throw std::out_of_range("graph: edge endpoint out of range: (" +
                              std::to_string(u) + "," + std::to_string(v) + ")");
    }
    if (u == v) {
      throw std::invalid_argument("graph: explicit self loop at node " +
                                  std::to_string(u));
    }
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  adj_ptr_.assign(num_nodes_ + 1, 0);
  for (const auto& [u, v] : edges_) {
    ++adj_ptr_[u + 1];
    ++adj_ptr_[v + 1];
  }
  for (int v = 0; v < num_nodes_; ++v) adj_ptr_[v + 1] += adj_ptr_[v];
  adj_.resize(edges_.size() * 2);
  std::vector<int> fill(adj_ptr_.begin(), adj_ptr_.end() - 1);
  for (const auto& [u, v] : edges_) {
    adj_[fill[u]++] = v;
    adj_[fill[v]++] = u;
  }
  for (int v = 0; v < num_nodes_; ++v) {
    std::sort(adj_.begin() + adj_ptr_[v], adj_.begin() + adj_ptr_[v + 1]);
  }

  norm_ = std::make_shared<const NormalizedAdjacency>(*this);
}

bool Graph::has_edge(int u, int v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

Graph build_graph(int num_nodes, std::vector<std::pair<int, int>> edges,
                  Eigen::MatrixXd features, std::vector<int> node_labels,
                  int graph_label) {
  return Graph(num_nodes, std::move(edges), std::move(features),
               std::move(node_labels), graph_label);
}

LhopResult l_hop_subgraph(const Graph& g, int v, int hops) {
  if (v < 0 || v >= g.num_nodes()) {
    throw std::out_of_range("l_hop_subgraph: node " + std::to_string(v));
  }
  if (hops < 1) throw std::invalid_argument("l_hop_subgraph: hops must be >= 1");

  std::vector<int> dist(g.num_nodes(), -1);
  std::queue<int> q;
  dist[v] = 0;
  q.push(v);
  std::vector<int> keep;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    keep.push_back(u);
    if (dist[u] == hops) continue;
    for (int w : g.neighbors(u)) {
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        q.push(w);
      }
    }
  }
  std::sort(keep.begin(), keep.end());

  LhopResult res;
  res.to_global = keep;
  res.to_local.assign(g.num_nodes(), -1);
  for (int i = 0; i < static_cast<int>(keep.size()); ++i) res.to_local[keep[i]] = i;
  res.local_root = res.to_local[v];

  std::vector<std::pair<int, int>> edges;
  std::vector<char> edge_mask;
  const bool has_edge_mask = !g.motif_edges.empty();
  for (int ei = 0; ei < g.num_edges(); ++ei) {
    const auto& [a, b] = g.edges()[ei];
    if (res.to_local[a] >= 0 && res.to_local[b] >= 0) {
      edges.emplace_back(res.to_local[a], res.to_local[b]);
      if (has_edge_mask) edge_mask.push_back(g.motif_edges[ei]);
    }
  }

  const int n = static_cast<int>(keep.size());
  Eigen::MatrixXd feats(n, g.feature_dim());
  for (int i = 0; i < n; ++i) feats.row(i) = g.features().row(keep[i]);
  std::vector<int> labels;
  if (g.has_node_labels()) {
    labels.resize(n);
    for (int i = 0; i < n; ++i) labels[i] = g.node_labels()[keep[i]];
  }
  res.graph = Graph(n, std::move(edges), std::move(feats), std::move(labels),
                    g.graph_label());
  if (!g.motif_nodes.empty()) {
    res.graph.motif_nodes.resize(n);
    for (int i = 0; i < n; ++i) res.graph.motif_nodes[i] = g.motif_nodes[keep[i]];
  }
  res.graph.motif_edges = std::move(edge_mask);
  return res;
}

Graph induced_subgraph(const Graph& g, std::vector<int> nodes,
                       std::vector<int>* to_local_out) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  const int n = static_cast<int>(nodes.size());
  std::vector<int> to_local(g.num_nodes(), -1);
  for (int i = 0; i < n; ++i) {
    if (nodes[i] < 0 || nodes[i] >= g.num_nodes()) {
      throw std::out_of_range("induced_subgraph: node " + std::to_string(nodes[i]));
    }
    to_local[nodes[i]] = i;
  }
  std::vector<std::pair<int, int>> edges;
  std::vector<char> edge_mask;
  const bool has_edge_mask = !g.motif_edges.empty();
  for (int ei = 0; ei < g.num_edges(); ++ei) {
    const auto& [a, b] = g.edges()[ei];
    if (to_local[a] >= 0 && to_local[b] >= 0) {
      edges.emplace_back(to_local[a], to_local[b]);
      if (has_edge_mask) edge_mask.push_back(g.motif_edges[ei]);
    }
  }
  Eigen::MatrixXd feats(n, g.feature_dim());
  for (int i = 0; i < n; ++i) feats.row(i) = g.features().row(nodes[i]);
  std::vector<int> labels;
  if (g.has_node_labels()) {
    labels.resize(n);
    for (int i = 0; i < n; ++i) labels[i] = g.node_labels()[nodes[i]];
  }
  Graph sub(n, std::move(edges), std::move(feats), std::move(labels),
            g.graph_label());
  if (!g.motif_nodes.empty()) {
    sub.motif_nodes.resize(n);
    for (int i = 0; i < n; ++i) sub.motif_nodes[i] = g.motif_nodes[nodes[i]];
  }
  sub.motif_edges = std::move(edge_mask);
  if (to_local_out) *to_local_out = std::move(to_local);
  return sub;
}

MotifComponent instance_motif_component(const Graph& g, int v) {
  MotifComponent mc;
  mc.edge_in_motif.assign(g.num_edges(), 0);
  if (g.motif_nodes.empty() || !g.motif_nodes[v]) return mc;

  // adjacency restricted to motif edges
  std::vector<std::vector<int>> adj(g.num_nodes());
  for (int ei = 0; ei < g.num_edges(); ++ei) {
    if (!g.motif_edges.empty() && g.motif_edges[ei]) {
      adj[g.edges()[ei].first].push_back(g.edges()[ei].second);
      adj[g.edges()[ei].second].push_back(g.edges()[ei].first);
    }
  }
  std::vector<char> seen(g.num_nodes(), 0);
  std::queue<int> q;
  seen[v] = 1;
  q.push(v);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    mc.nodes.push_back(u);
    for (int w : adj[u]) {
      if (!seen[w]) {
        seen[w] = 1;
        q.push(w);
      }
    }
  }
  std::sort(mc.nodes.begin(), mc.nodes.end());
  for (int ei = 0; ei < g.num_edges(); ++ei) {
    if (!g.motif_edges.empty() && g.motif_edges[ei] && seen[g.edges()[ei].first] &&
        seen[g.edges()[ei].second]) {
      mc.edge_in_motif[ei] = 1;
      ++mc.edge_count;
    }
  }
  return mc;
}

}  // namespace gflowx
