#include "gflowx/cut_vertex.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <string>

namespace gflowx {

CutVertexMatrix CutVertexMatrix::init(const Graph& g, int v0, int v1) {
  if (!g.has_edge(v0, v1)) {
    throw std::invalid_argument("cut vertex tracker: (" + std::to_string(v0) +
                                "," + std::to_string(v1) + ") is not an edge");
  }
  CutVertexMatrix m;
  m.reserve(4);
  m.t_ = 2;
  m.order_ = {v0, v1};
  m.cut_ = {0, 0};
  return m;
}

void CutVertexMatrix::reserve(int cap) {
  if (cap <= cap_) return;
  int new_cap = cap_ == 0 ? 4 : cap_;
  while (new_cap < cap) new_cap *= 2;
  std::vector<std::int32_t> nz(static_cast<std::size_t>(new_cap) * new_cap, 0);
  for (int i = 0; i < t_; ++i) {
    std::copy(row(i), row(i) + t_, nz.data() + static_cast<std::size_t>(i) * new_cap);
  }
  z_ = std::move(nz);
  cap_ = new_cap;
}

bool CutVertexMatrix::is_cut_node(int global_id) const {
  for (int i = 0; i < t_; ++i) {
    if (order_[i] == global_id) return cut_[i] != 0;
  }
  return false;
}

std::vector<int> CutVertexMatrix::cut_vertices() const {
  std::vector<int> out;
  for (int i = 0; i < t_; ++i) {
    if (cut_[i]) out.push_back(order_[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::int8_t> CutVertexMatrix::connectivity_vector(const Graph& g,
                                                              int new_node) const {
  for (int v : order_) {
    if (v == new_node) {
      throw std::invalid_argument("connectivity_vector: node " +
                                  std::to_string(new_node) + " already tracked");
    }
  }
  std::vector<std::int8_t> z(t_, 0);
  int attached = 0;
  for (int k = 0; k < t_; ++k) {
    if (g.has_edge(order_[k], new_node)) {
      z[k] = 1;
      ++attached;
    }
  }
  if (attached == 0) {
    throw std::invalid_argument("connectivity_vector: node " +
                                std::to_string(new_node) +
                                " has no edge into the subgraph");
  }
  return z;
}

void CutVertexMatrix::update(int new_node, const std::vector<std::int8_t>& z) {
  if (static_cast<int>(z.size()) != t_) {
    throw std::invalid_argument("update: connectivity vector length mismatch");
  }
  std::vector<int> attach;
  for (int k = 0; k < t_; ++k) {
    if (z[k]) attach.push_back(k);
  }
  if (attach.empty()) throw std::invalid_argument("update: empty connectivity vector");

  // new column: entry per existing row, filled below
  std::vector<std::int32_t> newcol(t_, 0);

  if (attach.size() == 1) {
    // Single attachment at position k: the attachment node now separates the
    // new leaf from everything else, so it becomes (or stays) a cut vertex.
    const int k = attach[0];
    std::int32_t* rk = row(k);
    if (!cut_[k]) {
      // all previous nodes fall into one child group, the new node into a fresh one
      for (int j = 0; j < t_; ++j) rk[j] = (j == k) ? 0 : 1;
      cut_[k] = 1;
      newcol[k] = 2;
    } else {
      std::int32_t mx = 0;
      for (int j = 0; j < t_; ++j) mx = std::max(mx, rk[j]);
      newcol[k] = mx + 1;
    }
    // every other node sees the new leaf in the same group as the attachment node
    for (int i = 0; i < t_; ++i) {
      if (i != k) newcol[i] = row(i)[k];
    }
  } else {
    // Multi attachment: for each cut vertex, the new node ties together the
    // child groups it touches. A cut vertex whose every group is touched
    // stops separating anything; otherwise touched groups merge into one.
    std::vector<std::int32_t> touched;
    for (int i = 0; i < t_; ++i) {
      if (!cut_[i]) continue;  // zero row stays zero; new entry stays 0
      std::int32_t* ri = row(i);
      touched.clear();
      for (int k : attach) {
        if (k != i) touched.push_back(ri[k]);
      }
      std::sort(touched.begin(), touched.end());
      touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
      // distinct tags over the whole row
      std::vector<std::int32_t> all(ri, ri + t_);
      std::sort(all.begin(), all.end());
      all.erase(std::unique(all.begin(), all.end()), all.end());
      if (all.front() == 0) all.erase(all.begin());

      if (touched == all) {
        std::fill(ri, ri + t_, 0);
        cut_[i] = 0;
        newcol[i] = 0;
      } else {
        const std::int32_t merged = touched.back();
        for (int j = 0; j < t_; ++j) {
          if (ri[j] != 0 &&
              std::binary_search(touched.begin(), touched.end(), ri[j])) {
            ri[j] = merged;
          }
        }
        newcol[i] = merged;
      }
    }
  }

  reserve(t_ + 1);
  for (int i = 0; i < t_; ++i) row(i)[t_] = newcol[i];
  std::fill(row(t_), row(t_) + t_ + 1, 0);
  order_.push_back(new_node);
  cut_.push_back(0);
  ++t_;
}

std::vector<int> static_articulation_oracle(const Graph& g,
                                            const std::vector<int>& nodes) {
  const int n = static_cast<int>(nodes.size());
  std::vector<int> sorted = nodes;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> local(g.num_nodes(), -1);
  for (int i = 0; i < n; ++i) local[sorted[i]] = i;

  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i) {
    for (int w : g.neighbors(sorted[i])) {
      if (local[w] >= 0) adj[i].push_back(local[w]);
    }
  }

  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<char> cut(n, 0);
  int timer = 0, visited = 0;

  std::function<void(int, int)> dfs = [&](int u, int parent) {
    disc[u] = low[u] = timer++;
    ++visited;
    int children = 0;
    for (int w : adj[u]) {
      if (w == parent) continue;  // simple graph: neighbor lists have no duplicates
      if (disc[w] >= 0) {
        low[u] = std::min(low[u], disc[w]);
      } else {
        dfs(w, u);
        low[u] = std::min(low[u], low[w]);
        ++children;
        if (parent != -1 && low[w] >= disc[u]) cut[u] = 1;
      }
    }
    if (parent == -1 && children > 1) cut[u] = 1;
  };
  if (n > 0) dfs(0, -1);
  if (visited != n) {
    throw std::invalid_argument("static_articulation_oracle: induced subgraph disconnected");
  }

  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (cut[i]) out.push_back(sorted[i]);
  }
  return out;
}

bool FrontierState::in_frontier(int v) const {
  return std::binary_search(frontier.begin(), frontier.end(), v);
}

FrontierState make_initial_state(const Graph& g, int v0) {
  if (v0 < 0 || v0 >= g.num_nodes()) {
    throw std::out_of_range("make_initial_state: node " + std::to_string(v0));
  }
  FrontierState s;
  s.v0 = v0;
  s.nodes = {v0};
  s.member.assign(g.num_nodes(), 0);
  s.member[v0] = 1;
  s.frontier.assign(g.neighbors(v0).begin(), g.neighbors(v0).end());
  return s;
}

void grow_state(FrontierState& s, const Graph& g, int v) {
  auto it = std::lower_bound(s.frontier.begin(), s.frontier.end(), v);
  if (it == s.frontier.end() || *it != v) {
    throw std::invalid_argument("grow_state: node " + std::to_string(v) +
                                " is not in the frontier");
  }
  if (s.size() == 1) {
    s.tracker = CutVertexMatrix::init(g, s.v0, v);
  } else {
    s.tracker.update(v, s.tracker.connectivity_vector(g, v));
  }
  s.frontier.erase(it);
  s.member[v] = 1;
  s.nodes.push_back(v);
  for (int w : g.neighbors(v)) {
    if (s.member[w]) continue;
    auto pos = std::lower_bound(s.frontier.begin(), s.frontier.end(), w);
    if (pos == s.frontier.end() || *pos != w) s.frontier.insert(pos, w);
  }
}

std::vector<int> valid_parents(const FrontierState& s) {
  std::vector<int> out;
  if (s.size() < 2) return out;
  const auto& tr = s.tracker;
  for (int i = 0; i < tr.size(); ++i) {
    const int v = tr.order()[i];
    if (v != s.v0 && !tr.is_cut_position(i)) out.push_back(v);
  }
  return out;
}

}  // namespace gflowx
