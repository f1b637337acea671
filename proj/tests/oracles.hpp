#pragma once

// Reference implementations the tests trust. Everything here is deliberately
// naive (deletion + BFS, exhaustive enumeration, finite differences) and
// stays independent of the library code it checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <vector>

#include "gflowx/graph.hpp"
#include "gflowx/policy.hpp"

namespace oracle {

// BFS connectivity of the induced subgraph on `nodes` (skipping `skip`)
inline bool connected_without(const gflowx::Graph& g, const std::vector<int>& nodes,
                              int skip) {
  std::vector<char> in(g.num_nodes(), 0);
  int want = 0, start = -1;
  for (int v : nodes) {
    if (v == skip) continue;
    in[v] = 1;
    ++want;
    start = v;
  }
  if (want == 0) return true;
  std::vector<char> seen(g.num_nodes(), 0);
  std::deque<int> q{start};
  seen[start] = 1;
  int reached = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop_front();
    for (int w : g.neighbors(u)) {
      if (in[w] && !seen[w]) {
        seen[w] = 1;
        ++reached;
        q.push_back(w);
      }
    }
  }
  return reached == want;
}

inline bool connected(const gflowx::Graph& g, const std::vector<int>& nodes) {
  return connected_without(g, nodes, -1);
}

// articulation points by definition: remove each member, BFS the rest
inline std::vector<int> cut_vertices_by_removal(const gflowx::Graph& g,
                                                const std::vector<int>& nodes) {
  std::vector<int> cuts;
  if (nodes.size() < 3) return cuts;
  for (int v : nodes) {
    if (!connected_without(g, nodes, v)) cuts.push_back(v);
  }
  std::sort(cuts.begin(), cuts.end());
  return cuts;
}

// valid parent actions by definition: members other than the start whose
// removal keeps the rest connected; insertion order of `nodes`
inline std::vector<int> parents_by_definition(const gflowx::Graph& g,
                                              const std::vector<int>& nodes) {
  std::vector<int> out;
  if (nodes.size() < 2) return out;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (connected_without(g, nodes, nodes[i])) out.push_back(nodes[i]);
  }
  return out;
}

// BFS ball of radius `hops`, ascending ids
inline std::vector<int> lhop_nodes(const gflowx::Graph& g, int v, int hops) {
  std::vector<int> dist(g.num_nodes(), -1);
  std::deque<int> q{v};
  dist[v] = 0;
  while (!q.empty()) {
    const int u = q.front();
    q.pop_front();
    if (dist[u] == hops) continue;
    for (int w : g.neighbors(u)) {
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        q.push_back(w);
      }
    }
  }
  std::vector<int> out;
  for (int i = 0; i < g.num_nodes(); ++i) {
    if (dist[i] >= 0) out.push_back(i);
  }
  return out;
}

// Central finite differences against analytic gradients. Checks up to
// `max_entries` strided entries per tensor and returns the worst guarded
// relative error |fd - an| / max(|fd| + |an|, guard): a true relative error
// for visible gradients, an absolute comparison at the guard scale below it.
inline double max_grad_error(const std::function<double()>& loss,
                             const std::vector<Eigen::MatrixXd*>& params,
                             const std::vector<Eigen::MatrixXd>& analytic,
                             double h = 1e-6, int max_entries = 64,
                             double guard = 1e-3) {
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Eigen::MatrixXd& p = *params[t];
    const Eigen::Index total = p.size();
    const Eigen::Index stride = std::max<Eigen::Index>(1, total / max_entries);
    for (Eigen::Index k = 0; k < total; k += stride) {
      double* x = p.data() + k;
      const double orig = *x;
      *x = orig + h;
      const double up = loss();
      *x = orig - h;
      const double down = loss();
      *x = orig;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[t].data()[k];
      const double err = std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), guard);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Every connected superset of {v0} with size in [min_size, max_size],
// enumerated breadth first; sets are sorted node lists.
inline std::vector<std::vector<int>> connected_supersets(const gflowx::Graph& g, int v0,
                                                         int min_size, int max_size) {
  std::map<std::vector<int>, char> seen;
  std::deque<std::vector<int>> q;
  q.push_back({v0});
  seen[{v0}] = 1;
  std::vector<std::vector<int>> out;
  while (!q.empty()) {
    std::vector<int> s = q.front();
    q.pop_front();
    if (static_cast<int>(s.size()) >= min_size) out.push_back(s);
    if (static_cast<int>(s.size()) == max_size) continue;
    for (int u : s) {
      for (int w : g.neighbors(u)) {
        if (std::binary_search(s.begin(), s.end(), w)) continue;
        std::vector<int> t = s;
        t.insert(std::lower_bound(t.begin(), t.end(), w), w);
        if (seen.emplace(t, 1).second) q.push_back(t);
      }
    }
  }
  return out;
}

// Exact terminal distribution of the sampling policy: probability mass pushed
// through the set DAG in increasing size, no sampling involved. Keys are
// sorted member sets.
inline std::map<std::vector<int>, double> exact_terminal_distribution(
    const gflowx::PolicyParams& p, const gflowx::Graph& g, int v0, int max_nodes) {
  using Set = std::vector<int>;
  std::map<Set, double> mass, term;
  mass[{v0}] = 1.0;
  for (int size = 1; size <= max_nodes; ++size) {
    for (const auto& [s, m] : mass) {
      if (static_cast<int>(s.size()) != size) continue;
      const gflowx::StateView view = gflowx::make_view_of(s, g, v0);
      if (size == max_nodes || (view.frontier.empty() && !view.allow_stop)) {
        term[s] += m;
        continue;
      }
      const gflowx::PolicyEval ev = gflowx::action_flows(p, view, false);
      const std::vector<double> probs = ev.probs();
      for (std::size_t i = 0; i < ev.actions.size(); ++i) {
        if (ev.actions[i] == gflowx::kStopAction) {
          term[s] += m * probs[i];
        } else {
          Set t = s;
          t.insert(std::lower_bound(t.begin(), t.end(), ev.actions[i]), ev.actions[i]);
          mass[t] += m * probs[i];
        }
      }
    }
  }
  return term;
}

inline double total_variation(const std::map<std::vector<int>, double>& a,
                              const std::map<std::vector<int>, double>& b) {
  double tv = 0.0;
  for (const auto& [k, v] : a) {
    const auto it = b.find(k);
    tv += std::abs(v - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : b) {
    if (!a.count(k)) tv += std::abs(v);
  }
  return 0.5 * tv;
}

}  // namespace oracle
