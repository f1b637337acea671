#include <algorithm>
#include <set>
#include <stdexcept>
#include <utility>

#include "gflowx/dataset.hpp"
#include "gflowx/rng.hpp"

namespace gflowx {

namespace {

// Preferential attachment: the first m nodes start isolated, every later
// node attaches m edges to distinct existing nodes drawn with probability
// proportional to degree (degree-0 seed nodes enter via the first arrival's
// uniform targets). Connected for n > m.
std::vector<std::pair<int, int>> ba_edges(int n, int m, Rng& rng) {
  if (m < 1 || n <= m) throw std::invalid_argument("ba_edges: need n > m >= 1");
  std::vector<std::pair<int, int>> edges;
  std::vector<int> repeated;  // one entry per edge endpoint, i.e. degree weights
  std::vector<int> targets(m);
  for (int i = 0; i < m; ++i) targets[i] = i;
  std::vector<char> chosen(n, 0);
  for (int src = m; src < n; ++src) {
    for (int t : targets) {
      edges.emplace_back(src, t);
      repeated.push_back(src);
      repeated.push_back(t);
    }
    if (src + 1 == n) break;
    for (int t : targets) chosen[t] = 0;
    targets.clear();
    while (static_cast<int>(targets.size()) < m) {
      const int cand = repeated[rng.uniform_int(static_cast<int>(repeated.size()))];
      if (!chosen[cand]) {
        chosen[cand] = 1;
        targets.push_back(cand);
      }
    }
  }
  return edges;
}

// heap-shaped binary tree: node i has children 2i+1, 2i+2 when < n
std::vector<std::pair<int, int>> tree_edges(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; 2 * i + 1 < n; ++i) {
    edges.emplace_back(i, 2 * i + 1);
    if (2 * i + 2 < n) edges.emplace_back(i, 2 * i + 2);
  }
  return edges;
}

struct MotifSpec {
  int size = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> labels;  // role per local node
  int anchor = 0;           // local node carrying the bridge edge
};

MotifSpec house_motif(int bottom, int middle, int top) {
  // local 0,1 bottom; 2,3 middle; 4 top
  return {5,
          {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}},
          {bottom, bottom, middle, middle, top},
          0};
}

MotifSpec cycle_motif(int size, int label) {
  MotifSpec m;
  m.size = size;
  for (int i = 0; i < size; ++i) m.edges.emplace_back(i, (i + 1) % size);
  m.labels.assign(size, label);
  return m;
}

MotifSpec grid_motif(int label) {
  MotifSpec m;
  m.size = 9;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const int v = 3 * r + c;
      if (c + 1 < 3) m.edges.emplace_back(v, v + 1);
      if (r + 1 < 3) m.edges.emplace_back(v, v + 3);
    }
  }
  m.labels.assign(9, label);
  return m;
}

struct Assembled {
  std::vector<std::pair<int, int>> edges;
  std::vector<int> labels;
  std::vector<char> motif_node;
  std::set<std::pair<int, int>> motif_edge_set;  // canonical u < v
  int num_nodes = 0;
};

std::pair<int, int> canon(int u, int v) { return u < v ? std::make_pair(u, v) : std::make_pair(v, u); }

// base graph + num_motifs copies of spec, one bridge each, + noise edges
Assembled assemble(std::vector<std::pair<int, int>> base_edges, int base_n,
                   const MotifSpec& spec, int num_motifs, int noise_edges,
                   Rng& rng) {
  Assembled a;
  a.num_nodes = base_n + num_motifs * spec.size;
  a.edges = std::move(base_edges);
  a.labels.assign(a.num_nodes, 0);
  a.motif_node.assign(a.num_nodes, 0);
  for (int k = 0; k < num_motifs; ++k) {
    const int off = base_n + k * spec.size;
    for (const auto& [u, v] : spec.edges) {
      a.edges.emplace_back(off + u, off + v);
      a.motif_edge_set.insert(canon(off + u, off + v));
    }
    for (int i = 0; i < spec.size; ++i) {
      a.labels[off + i] = spec.labels[i];
      a.motif_node[off + i] = 1;
    }
    a.edges.emplace_back(rng.uniform_int(base_n), off + spec.anchor);  // bridge
  }
  std::set<std::pair<int, int>> present;
  for (const auto& [u, v] : a.edges) present.insert(canon(u, v));
  int added = 0;
  long long attempts = 0;
  const long long max_attempts = 1000 + 100LL * noise_edges;
  while (added < noise_edges) {
    if (++attempts > max_attempts) {
      throw std::invalid_argument("gen_dataset: cannot place requested noise edges");
    }
    const int u = rng.uniform_int(a.num_nodes);
    const int v = rng.uniform_int(a.num_nodes);
    if (u == v) continue;
    if (!present.insert(canon(u, v)).second) continue;
    a.edges.push_back(canon(u, v));
    ++added;
  }
  return a;
}

Graph finish_graph(const Assembled& a, Eigen::MatrixXd features, int graph_label = -1) {
  Graph g(a.num_nodes, a.edges, std::move(features), a.labels, graph_label);
  g.motif_nodes = a.motif_node;
  g.motif_edges.assign(g.num_edges(), 0);
  for (int ei = 0; ei < g.num_edges(); ++ei) {
    if (a.motif_edge_set.count(g.edges()[ei])) g.motif_edges[ei] = 1;
  }
  return g;
}

std::vector<int> motif_instances(const Graph& g, int offset = 0) {
  std::vector<int> ids;
  for (int v = 0; v < g.num_nodes(); ++v) {
    if (g.motif_nodes[v]) ids.push_back(v + offset);
  }
  return ids;
}

Assembled assemble_node_kind(const std::string& kind, const GenParams& p, Rng& rng) {
  const int motifs = p.num_motifs;
  const int noise = p.noise_edges >= 0 ? p.noise_edges : (motifs + 5) / 10;
  if (kind == "ba-shapes") {
    const int base = p.base_nodes > 0 ? p.base_nodes : 300;
    const int m = p.ba_m > 0 ? p.ba_m : 5;
    return assemble(ba_edges(base, m, rng), base, house_motif(1, 2, 3), motifs,
                    noise, rng);
  }
  if (kind == "tree-cycles") {
    const int base = p.base_nodes > 0 ? p.base_nodes : 391;
    return assemble(tree_edges(base), base, cycle_motif(6, 1), motifs, noise, rng);
  }
  if (kind == "tree-grid") {
    const int base = p.base_nodes > 0 ? p.base_nodes : 511;
    return assemble(tree_edges(base), base, grid_motif(1), motifs, noise, rng);
  }
  throw std::invalid_argument("gen_dataset: unknown kind '" + kind + "'");
}

Dataset gen_node_dataset(const std::string& kind, const GenParams& p,
                         std::uint64_t seed) {
  Rng rng(derive_seed(seed, {seed_tag::kDataset}));
  const Assembled a = assemble_node_kind(kind, p, rng);
  Eigen::MatrixXd feats = Eigen::MatrixXd::Ones(a.num_nodes, p.feature_dim);
  Dataset ds;
  ds.task = Task::kNode;
  ds.num_classes = kind == "ba-shapes" ? 4 : 2;
  ds.split_seed = derive_seed(seed, {seed_tag::kSplit});
  ds.graphs.push_back(finish_graph(a, std::move(feats)));
  ds.instances = motif_instances(ds.graphs.front());
  return ds;
}

Dataset gen_ba_community(const GenParams& p, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {seed_tag::kDataset}));
  const Assembled a0 = assemble_node_kind("ba-shapes", p, rng);
  const Assembled a1 = assemble_node_kind("ba-shapes", p, rng);
  const int n0 = a0.num_nodes;
  const int n = n0 + a1.num_nodes;

  Assembled merged;
  merged.num_nodes = n;
  merged.edges = a0.edges;
  for (const auto& [u, v] : a1.edges) merged.edges.emplace_back(u + n0, v + n0);
  merged.labels = a0.labels;
  for (int l : a1.labels) merged.labels.push_back(l + 4);
  merged.motif_node = a0.motif_node;
  merged.motif_node.insert(merged.motif_node.end(), a1.motif_node.begin(),
                           a1.motif_node.end());
  merged.motif_edge_set = a0.motif_edge_set;
  for (const auto& [u, v] : a1.motif_edge_set) {
    merged.motif_edge_set.insert({u + n0, v + n0});
  }
  const int inter = p.inter_edges >= 0 ? p.inter_edges : n / 4;
  std::set<std::pair<int, int>> used;
  int added = 0;
  while (added < inter) {
    const int u = rng.uniform_int(n0);
    const int v = n0 + rng.uniform_int(n - n0);
    if (!used.insert({u, v}).second) continue;
    merged.edges.emplace_back(u, v);
    ++added;
  }

  Eigen::MatrixXd feats(n, p.feature_dim);
  for (int i = 0; i < n; ++i) {
    const double mean = i < n0 ? 0.0 : 1.0;
    for (int j = 0; j < p.feature_dim; ++j) feats(i, j) = mean + rng.normal();
  }
  Dataset ds;
  ds.task = Task::kNode;
  ds.num_classes = 8;
  ds.split_seed = derive_seed(seed, {seed_tag::kSplit});
  ds.graphs.push_back(finish_graph(merged, std::move(feats)));
  ds.instances = motif_instances(ds.graphs.front());
  return ds;
}

Dataset gen_ba_2motifs(const GenParams& p, std::uint64_t seed) {
  Dataset ds;
  ds.task = Task::kGraph;
  ds.num_classes = 2;
  ds.split_seed = derive_seed(seed, {seed_tag::kSplit});
  const MotifSpec house = house_motif(1, 1, 1);
  const MotifSpec cyc = cycle_motif(5, 1);
  const int m = p.ba_m > 0 ? p.ba_m : 1;
  for (int gi = 0; gi < p.num_graphs; ++gi) {
    Rng rng(derive_seed(seed, {seed_tag::kDataset, static_cast<std::uint64_t>(gi)}));
    const bool is_house = gi % 2 == 0;
    const MotifSpec& spec = is_house ? house : cyc;
    Assembled a = assemble(ba_edges(p.graph_base_nodes, m, rng),
                           p.graph_base_nodes, spec, 1, 0, rng);
    Eigen::MatrixXd feats = Eigen::MatrixXd::Ones(a.num_nodes, p.feature_dim);
    a.labels.clear();  // node labels unused for the graph task
    Graph g = finish_graph(a, std::move(feats), is_house ? 0 : 1);
    ds.graphs.push_back(std::move(g));
    ds.instances.push_back(gi);
  }
  return ds;
}

}  // namespace

Dataset gen_dataset(const std::string& kind, const GenParams& params,
                    std::uint64_t seed) {
  if (params.num_motifs < 1) throw std::invalid_argument("gen_dataset: num_motifs < 1");
  if (params.feature_dim < 1) throw std::invalid_argument("gen_dataset: feature_dim < 1");
  if (kind == "ba-community") return gen_ba_community(params, seed);
  if (kind == "ba-2motifs") return gen_ba_2motifs(params, seed);
  return gen_node_dataset(kind, params, seed);
}

}  // namespace gflowx
