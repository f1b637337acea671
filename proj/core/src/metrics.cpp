#include "gflowx/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "gflowx/cut_vertex.hpp"
#include "gflowx/rng.hpp"

namespace gflowx {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt6(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

}  // namespace

Explanation make_explanation(const InstanceContext& ctx,
                             const std::vector<int>& local_nodes, int max_nodes) {
  if (max_nodes < 1) throw std::invalid_argument("make_explanation: max_nodes must be >= 1");
  const Graph& g = *ctx.local;
  Explanation e;
  e.instance = ctx.instance;
  std::vector<int> rank(g.num_nodes(), -1);
  for (int i = 0; i < static_cast<int>(local_nodes.size()); ++i) {
    const int v = local_nodes[i];
    if (v < 0 || v >= g.num_nodes()) {
      throw std::out_of_range("make_explanation: node " + std::to_string(v));
    }
    rank[v] = i;
    e.nodes.push_back(ctx.to_global[v]);
    e.node_weights.push_back(1.0 - static_cast<double>(i) / max_nodes);
  }
  // induced edges, most important first: earlier-completed edges win, ties by
  // the earlier other endpoint, then by global id
  struct Row {
    int max_rank, min_rank;
    std::pair<int, int> edge;
  };
  std::vector<Row> rows;
  for (const auto& [u, v] : g.edges()) {
    if (rank[u] < 0 || rank[v] < 0) continue;
    int gu = ctx.to_global[u], gv = ctx.to_global[v];
    if (gu > gv) std::swap(gu, gv);
    rows.push_back({std::max(rank[u], rank[v]), std::min(rank[u], rank[v]), {gu, gv}});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.max_rank != b.max_rank) return a.max_rank < b.max_rank;
    if (a.min_rank != b.min_rank) return a.min_rank < b.min_rank;
    return a.edge < b.edge;
  });
  for (const Row& r : rows) {
    e.edges.push_back(r.edge);
    e.edge_weights.push_back(1.0 - static_cast<double>(r.max_rank) / max_nodes);
  }
  return e;
}

Explanation explain(const PolicyParams& policy, const InstanceContext& ctx, int v0,
                    const EnvConfig& cfg, Rng* rng) {
  const std::vector<int> picked = rollout(policy, *ctx.local, v0, cfg, rng);
  return make_explanation(ctx, picked, cfg.max_nodes);
}

double roc_auc(const std::vector<double>& scores, const std::vector<char>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: size mismatch");
  const int n = static_cast<int>(scores.size());
  std::int64_t npos = 0;
  for (char c : labels) npos += (c != 0);
  const std::int64_t nneg = n - npos;
  if (npos == 0 || nneg == 0) return kNaN;
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[a] < scores[b]; });
  // rank sum of the positive class, average ranks across ties
  double rpos = 0.0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;
    for (int k = i; k <= j; ++k) {
      if (labels[idx[k]]) rpos += avg;
    }
    i = j + 1;
  }
  return (rpos - 0.5 * static_cast<double>(npos) * static_cast<double>(npos + 1)) /
         (static_cast<double>(npos) * static_cast<double>(nneg));
}

namespace {

// AUC of one explanation against the motif edge mask. Candidate edges come
// from the instance's own computation graph, or from the whole input graph
// when all_edges is set (node tasks only; a graph instance already is the
// whole graph). Unselected candidates score zero.
double instance_auc(const InstanceContext& ctx, const Explanation& e,
                    const Graph& full, bool node_task, bool all_edges,
                    int max_nodes) {
  std::vector<double> scores;
  std::vector<char> labels;
  if (node_task && all_edges) {
    if (full.motif_edges.empty()) return kNaN;
    std::map<std::pair<int, int>, double> w;
    for (std::size_t i = 0; i < e.edges.size(); ++i) w[e.edges[i]] = e.edge_weights[i];
    scores.reserve(full.num_edges());
    labels.reserve(full.num_edges());
    for (int ei = 0; ei < full.num_edges(); ++ei) {
      const auto it = w.find(full.edges()[ei]);
      scores.push_back(it == w.end() ? 0.0 : it->second);
      labels.push_back(full.motif_edges[ei]);
    }
  } else {
    const Graph& g = *ctx.local;
    if (g.motif_edges.empty()) return kNaN;
    std::vector<int> rank(g.num_nodes(), -1);
    for (std::size_t i = 0; i < e.nodes.size(); ++i) {
      // e.nodes holds global ids in insertion order; invert through to_global
      const int lv = static_cast<int>(
          std::lower_bound(ctx.to_global.begin(), ctx.to_global.end(), e.nodes[i]) -
          ctx.to_global.begin());
      rank[lv] = static_cast<int>(i);
    }
    scores.reserve(g.num_edges());
    labels.reserve(g.num_edges());
    for (int ei = 0; ei < g.num_edges(); ++ei) {
      const auto& [u, v] = g.edges()[ei];
      const bool sel = rank[u] >= 0 && rank[v] >= 0;
      scores.push_back(
          sel ? 1.0 - static_cast<double>(std::max(rank[u], rank[v])) / max_nodes : 0.0);
      labels.push_back(g.motif_edges[ei]);
    }
  }
  return roc_auc(scores, labels);
}

}  // namespace

EvalResult evaluate(const Dataset& ds, const GnnModel& model,
                    const PolicyParams& policy, const Mlp& locator,
                    const EvalOptions& opt) {
  if (ds.instances.empty()) throw std::invalid_argument("evaluate: no instances");
  const int km = opt.env.max_nodes;
  if (opt.topk < 0 || opt.topk > km) {
    throw std::invalid_argument("evaluate: topk must lie in [0, max_nodes]");
  }
  const bool node_task = ds.task == Task::kNode;
  if (!node_task && locator.empty()) {
    throw std::invalid_argument("evaluate: graph task needs a locator");
  }

  EvalResult res;
  double sum_auc = 0.0, sum_fid = 0.0, sum_sp = 0.0, sum_tk = 0.0;
  int n_auc = 0, n_tk = 0;
  for (int i = 0; i < static_cast<int>(ds.instances.size()); ++i) {
    InstanceContext ctx = node_task
                              ? make_node_context(ds, model, ds.instances[i], opt.env)
                              : make_graph_context(ds, model, ds.instances[i], opt.env);
    const int v0 = node_task ? ctx.root : locate_start(locator, model, *ctx.local);
    Rng rng(derive_seed(opt.seed, {seed_tag::kEval, static_cast<std::uint64_t>(i)}));
    const std::vector<int> picked =
        rollout(policy, *ctx.local, v0, opt.env, opt.sample ? &rng : nullptr);
    Explanation e = make_explanation(ctx, picked, km);

    InstanceMetrics m;
    m.instance = ctx.instance;
    m.auc = instance_auc(ctx, e, ds.graph(), node_task, opt.auc_all_edges, km);

    // probability drop on the model's predicted class when the explanation is
    // removed from the computation graph; the query node itself always stays
    int y = 0;
    ctx.full_probs.maxCoeff(&y);
    const int nloc = ctx.local->num_nodes();
    std::vector<char> sel(nloc, 0);
    for (int v : picked) sel[v] = 1;
    std::vector<int> keep;
    for (int v = 0; v < nloc; ++v) {
      if (!sel[v] || (node_task && v == ctx.root)) keep.push_back(v);
    }
    double p_full, p_rest;
    if (node_task) {
      std::vector<int> all(nloc);
      std::iota(all.begin(), all.end(), 0);
      p_full = predict_restricted(model, *ctx.local, all, ctx.root)(y);
      p_rest = predict_restricted(model, *ctx.local, keep, ctx.root)(y);
    } else {
      p_full = ctx.full_probs(y);
      p_rest = keep.empty() ? 1.0 / model.num_classes
                            : predict_restricted(model, *ctx.local, keep, -1)(y);
    }
    m.fidelity = p_full - p_rest;

    m.sparsity = 1.0 - static_cast<double>(picked.size()) / nloc;

    // fraction of the first k picks that are ground-truth motif nodes; the
    // default k is the instance's own motif size inside the computation graph
    const std::vector<char>& mask =
        node_task ? ds.graph().motif_nodes : ctx.local->motif_nodes;
    int k = opt.topk;
    if (k == 0 && !mask.empty()) {
      if (node_task) {
        const MotifComponent mc = instance_motif_component(ds.graph(), ctx.instance);
        for (int v : mc.nodes) {
          k += std::binary_search(ctx.to_global.begin(), ctx.to_global.end(), v);
        }
      } else {
        for (char c : mask) k += (c != 0);
      }
      k = std::min(k, km);
    }
    if (mask.empty() || k <= 0) {
      m.topk = kNaN;
    } else {
      int hits = 0;
      const int take = std::min<int>(k, static_cast<int>(e.nodes.size()));
      for (int j = 0; j < take; ++j) hits += (mask[e.nodes[j]] != 0);
      m.topk = static_cast<double>(hits) / k;
    }

    if (!std::isnan(m.auc)) {
      sum_auc += m.auc;
      ++n_auc;
    }
    if (!std::isnan(m.topk)) {
      sum_tk += m.topk;
      ++n_tk;
    }
    sum_fid += m.fidelity;
    sum_sp += m.sparsity;
    res.per_instance.push_back(std::move(m));
    res.explanations.push_back(std::move(e));
  }
  const double ni = static_cast<double>(res.per_instance.size());
  res.auc = n_auc > 0 ? sum_auc / n_auc : kNaN;
  res.fidelity = sum_fid / ni;
  res.sparsity = sum_sp / ni;
  res.topk = n_tk > 0 ? sum_tk / n_tk : kNaN;
  return res;
}

void write_metrics_csv(const std::string& path, const EvalResult& r) {
  std::ofstream out = open_out(path);
  out << "instance,auc,fidelity,sparsity,topk\n";
  for (const InstanceMetrics& m : r.per_instance) {
    out << m.instance << ',' << fmt6(m.auc) << ',' << fmt6(m.fidelity) << ','
        << fmt6(m.sparsity) << ',' << fmt6(m.topk) << '\n';
  }
  out << "mean," << fmt6(r.auc) << ',' << fmt6(r.fidelity) << ',' << fmt6(r.sparsity)
      << ',' << fmt6(r.topk) << '\n';
}

void write_explanation_csv(const std::string& path, const Explanation& e) {
  std::ofstream out = open_out(path);
  out << "kind,u,v,weight\n";
  for (std::size_t i = 0; i < e.nodes.size(); ++i) {
    out << "node," << e.nodes[i] << ",-1," << fmt6(e.node_weights[i]) << '\n';
  }
  for (std::size_t i = 0; i < e.edges.size(); ++i) {
    out << "edge," << e.edges[i].first << ',' << e.edges[i].second << ','
        << fmt6(e.edge_weights[i]) << '\n';
  }
}

void write_explanation_dot(const std::string& path, const Explanation& e,
                           const Graph& g) {
  std::ofstream out = open_out(path);
  out << "graph explanation {\n  node [shape=circle];\n";
  for (int v : e.nodes) {
    out << "  " << v;
    const bool motif = !g.motif_nodes.empty() && v < static_cast<int>(g.motif_nodes.size()) &&
                       g.motif_nodes[v];
    out << " [";
    if (v == e.instance) out << "peripheries=2";
    if (v == e.instance && motif) out << ", ";
    if (motif) out << "style=filled, fillcolor=lightblue";
    out << "];\n";
  }
  for (std::size_t i = 0; i < e.edges.size(); ++i) {
    char pw[32];
    std::snprintf(pw, sizeof(pw), "%.2f", 1.0 + 3.0 * e.edge_weights[i]);
    out << "  " << e.edges[i].first << " -- " << e.edges[i].second << " [penwidth=" << pw
        << "];\n";
  }
  out << "}\n";
}

std::vector<BenchRow> bench_cutvertex(int n, int trials, std::uint64_t seed) {
  if (n < 1 || trials < 1) {
    throw std::invalid_argument("bench_cutvertex: n and trials must be positive");
  }
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  rows.reserve(static_cast<std::size_t>(n) * trials);
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, {seed_tag::kBench, static_cast<std::uint64_t>(t)}));
    // random recursive tree plus n/2 shortcut edges: connected, mildly cyclic
    const int nn = n + 1;
    std::vector<std::pair<int, int>> edges;
    for (int v = 1; v < nn; ++v) edges.emplace_back(rng.uniform_int(v), v);
    for (int k = 0; k < n / 2; ++k) {
      const int u = rng.uniform_int(nn), v = rng.uniform_int(nn);
      if (u != v) edges.emplace_back(std::min(u, v), std::max(u, v));
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    const Graph g = build_graph(nn, std::move(edges), Eigen::MatrixXd::Zero(nn, 1));

    FrontierState st = make_initial_state(g, 0);
    for (int step = 1; step <= n; ++step) {
      if (st.frontier.empty()) throw std::logic_error("bench_cutvertex: frontier exhausted");
      const int v = st.frontier[rng.uniform_int(static_cast<int>(st.frontier.size()))];
      const auto t0 = clock::now();
      grow_state(st, g, v);
      const auto t1 = clock::now();
      const std::vector<int> fast = st.tracker.cut_vertices();
      const auto t2 = clock::now();
      const std::vector<int> slow = static_articulation_oracle(g, st.nodes);
      const auto t3 = clock::now();
      if (fast != slow) {
        throw std::runtime_error(
            "bench_cutvertex: tracker disagrees with the static recomputation at step " +
            std::to_string(step));
      }
      BenchRow row;
      row.trial = t;
      row.step = step;
      row.incremental_ns =
          std::chrono::duration<double, std::nano>(t1 - t0).count();
      row.static_ns = std::chrono::duration<double, std::nano>(t3 - t2).count();
      rows.push_back(row);
    }
  }
  return rows;
}

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
  std::ofstream out = open_out(path);
  out << "trial,step,incremental_ns,static_ns\n";
  for (const BenchRow& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.0f,%.0f", r.incremental_ns, r.static_ns);
    out << r.trial << ',' << r.step << ',' << buf << '\n';
  }
}

}  // namespace gflowx
