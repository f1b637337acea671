#include "gflowx/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gflowx/checkpoint.hpp"

namespace gflowx {

// Forward record kept alive by PolicyEval for the backward pass.
struct PolicyTape {
  std::vector<int> scope;         // ascending global ids
  std::vector<int> attn_rows;     // scope-local rows the per-node MLP ran on
  std::vector<int> frontier_pos;  // row (within attn_rows) of each frontier action
  Eigen::MatrixXd xaug;           // |scope| x (d+2)
  LocalAdj adj;
  Eigen::MatrixXd hl_rows;  // H^L restricted to attn_rows
  Eigen::MatrixXd z1;       // post-ReLU first MLP layer
  Eigen::MatrixXd hbar;     // MLP output per attn row
  Eigen::VectorXd hstop;
  std::vector<double> clamp_slope;  // d clamp / d logit per action
};

namespace {

std::vector<int> merge_sorted(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// bound * tanh(l / bound): caps log flows at +-bound like a hard clamp but
// with a gradient that tapers instead of dying, so flows pushed into
// saturation early in training can still recover. Near-identity for
// |l| << bound. A bound of zero pins every flow to one.
double clamp_logit(double l, double bound, double* slope) {
  if (bound <= 0.0) {
    *slope = 0.0;
    return 0.0;
  }
  const double t = std::tanh(l / bound);
  *slope = 1.0 - t * t;
  return bound * t;
}

// scope, augmented features, local adjacency: shared by both evaluation
// entry points
void build_scope(const PolicyParams& p, const StateView& view, PolicyTape& t) {
  const Graph& g = *view.g;
  const int d = p.feature_dim;
  t.scope = merge_sorted(view.members, view.frontier);
  const int n = static_cast<int>(t.scope.size());
  t.xaug.resize(n, d + 2);
  std::size_t mi = 0;  // members and scope are both ascending
  for (int i = 0; i < n; ++i) {
    const int v = t.scope[i];
    while (mi < view.members.size() && view.members[mi] < v) ++mi;
    const bool member = mi < view.members.size() && view.members[mi] == v;
    t.xaug.row(i).head(d) = g.features().row(v);
    t.xaug(i, d) = v == view.v0 ? 1.0 : 0.0;
    t.xaug(i, d + 1) = member ? 1.0 : 0.0;
  }
  t.adj = make_local_adj(g, t.scope);
}

}  // namespace

std::vector<Eigen::MatrixXd*> PolicyParams::params() {
  return {&W1, &W2a, &b2a, &W2b, &b2b, &attn, &wf, &bf};
}

std::vector<NamedTensor> PolicyParams::tensors() const {
  Eigen::MatrixXd meta(6, 1);
  meta << double(feature_dim), double(cfg.hidden), cfg.alpha,
      double(cfg.appnp_layers), cfg.stop_over_all ? 1.0 : 0.0, cfg.flow_clamp;
  return {{"meta", meta},
          {"W1", W1},
          {"W2a", W2a},
          {"b2a", b2a},
          {"W2b", W2b},
          {"b2b", b2b},
          {"attn", attn},
          {"wf", wf},
          {"bf", bf}};
}

void PolicyParams::save(const std::string& path) const { save_tensors(path, tensors()); }

PolicyParams PolicyParams::from_tensors(const std::vector<NamedTensor>& tensors) {
  const Eigen::MatrixXd& meta = find_tensor(tensors, "meta");
  PolicyParams p;
  p.feature_dim = static_cast<int>(meta(0, 0));
  p.cfg.hidden = static_cast<int>(meta(1, 0));
  p.cfg.alpha = meta(2, 0);
  p.cfg.appnp_layers = static_cast<int>(meta(3, 0));
  p.cfg.stop_over_all = meta(4, 0) != 0.0;
  p.cfg.flow_clamp = meta(5, 0);
  p.W1 = find_tensor(tensors, "W1");
  p.W2a = find_tensor(tensors, "W2a");
  p.b2a = find_tensor(tensors, "b2a");
  p.W2b = find_tensor(tensors, "W2b");
  p.b2b = find_tensor(tensors, "b2b");
  p.attn = find_tensor(tensors, "attn");
  p.wf = find_tensor(tensors, "wf");
  p.bf = find_tensor(tensors, "bf");
  return p;
}

PolicyParams PolicyParams::load(const std::string& path) {
  return from_tensors(load_tensors(path));
}

PolicyParams init_policy(int feature_dim, const PolicyConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {seed_tag::kPolicyInit}));
  PolicyParams p;
  p.cfg = cfg;
  p.feature_dim = feature_dim;
  const int h = cfg.hidden;
  p.W1 = glorot(feature_dim + 2, h, rng);
  p.W2a = glorot(h, h, rng);
  p.b2a = Eigen::MatrixXd::Zero(h, 1);
  p.W2b = glorot(h, h, rng);
  p.b2b = Eigen::MatrixXd::Zero(h, 1);
  p.attn = glorot(h, 1, rng);
  p.wf = glorot(h, 1, rng);
  p.bf = Eigen::MatrixXd::Zero(1, 1);
  return p;
}

StateView make_view(const FrontierState& s, const Graph& g) {
  StateView v;
  v.g = &g;
  v.members = s.nodes;
  std::sort(v.members.begin(), v.members.end());
  v.frontier = s.frontier;
  v.v0 = s.v0;
  v.allow_stop = s.size() >= 2;
  return v;
}

StateView make_view_of(const std::vector<int>& nodes, const Graph& g, int v0) {
  StateView v;
  v.g = &g;
  v.members = nodes;
  std::sort(v.members.begin(), v.members.end());
  std::vector<char> member(g.num_nodes(), 0);
  for (int u : v.members) member[u] = 1;
  for (int u : v.members) {
    for (int w : g.neighbors(u)) {
      if (!member[w]) v.frontier.push_back(w);
    }
  }
  std::sort(v.frontier.begin(), v.frontier.end());
  v.frontier.erase(std::unique(v.frontier.begin(), v.frontier.end()),
                   v.frontier.end());
  v.v0 = v0;
  v.allow_stop = v.members.size() >= 2;
  return v;
}

Eigen::MatrixXd augment_features(const FrontierState& s, const Graph& g) {
  const int d = g.feature_dim();
  Eigen::MatrixXd x(
      static_cast<Eigen::Index>(s.nodes.size() + s.frontier.size()), d + 2);
  int row = 0;
  for (int v : s.nodes) {
    x.row(row).head(d) = g.features().row(v);
    x(row, d) = v == s.v0 ? 1.0 : 0.0;
    x(row, d + 1) = 1.0;
    ++row;
  }
  for (int v : s.frontier) {
    x.row(row).head(d) = g.features().row(v);
    x(row, d) = v == s.v0 ? 1.0 : 0.0;
    x(row, d + 1) = 0.0;
    ++row;
  }
  return x;
}

LocalAdj make_local_adj(const Graph& g, const std::vector<int>& scope) {
  LocalAdj a;
  a.n = static_cast<int>(scope.size());
  std::vector<int> local(g.num_nodes(), -1);
  for (int i = 0; i < a.n; ++i) local[scope[i]] = i;

  a.ptr.assign(a.n + 1, 0);
  std::vector<int> deg(a.n, 0);
  for (int i = 0; i < a.n; ++i) {
    for (int w : g.neighbors(scope[i])) {
      if (local[w] >= 0) ++deg[i];
    }
    a.ptr[i + 1] = a.ptr[i] + deg[i];
  }
  a.idx.resize(a.ptr.back());
  a.w.resize(a.ptr.back());
  a.self.resize(a.n);
  std::vector<double> inv_sqrt(a.n);
  for (int i = 0; i < a.n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(deg[i] + 1.0);
  for (int i = 0; i < a.n; ++i) {
    int at = a.ptr[i];
    for (int w : g.neighbors(scope[i])) {
      const int j = local[w];
      if (j >= 0) {
        a.idx[at] = j;
        a.w[at] = inv_sqrt[i] * inv_sqrt[j];
        ++at;
      }
    }
    a.self[i] = inv_sqrt[i] * inv_sqrt[i];
  }
  return a;
}

Eigen::MatrixXd local_multiply(const LocalAdj& a, const Eigen::MatrixXd& h) {
  Eigen::MatrixXd out(a.n, h.cols());
  for (int i = 0; i < a.n; ++i) {
    out.row(i) = a.self[i] * h.row(i);
    for (int k = a.ptr[i]; k < a.ptr[i + 1]; ++k) {
      out.row(i) += a.w[k] * h.row(a.idx[k]);
    }
  }
  return out;
}

Eigen::MatrixXd appnp_encode(const Eigen::MatrixXd& x_aug, const LocalAdj& adj,
                             double alpha, int layers, const Eigen::MatrixXd& w1) {
  const Eigen::MatrixXd h0 = x_aug * w1;
  Eigen::MatrixXd h = h0;
  for (int l = 0; l < layers; ++l) {
    h = (1.0 - alpha) * local_multiply(adj, h) + alpha * h0;
  }
  return h;
}

double PolicyEval::total_flow() const {
  double s = 0.0;
  for (double f : flows) s += f;
  return s;
}

std::vector<double> PolicyEval::probs() const {
  const double z = total_flow();
  std::vector<double> p(flows.size());
  for (std::size_t i = 0; i < flows.size(); ++i) p[i] = flows[i] / z;
  return p;
}

int PolicyEval::action_index(int action) const {
  const bool has_stop = !actions.empty() && actions.back() == kStopAction;
  if (action == kStopAction) return has_stop ? static_cast<int>(actions.size()) - 1 : -1;
  const auto end = actions.begin() + (has_stop ? actions.size() - 1 : actions.size());
  const auto it = std::lower_bound(actions.begin(), end, action);
  if (it == end || *it != action) return -1;
  return static_cast<int>(it - actions.begin());
}

double PolicyEval::flow_for(int action) const {
  const int i = action_index(action);
  if (i < 0) throw std::invalid_argument("flow_for: action not available");
  return flows[i];
}

PolicyEval action_flows(const PolicyParams& p, const StateView& view, bool with_tape) {
  if (view.frontier.empty() && !view.allow_stop) {
    throw std::logic_error("action_flows: state has no legal action");
  }
  const int h = p.cfg.hidden;

  auto tape = std::make_shared<PolicyTape>();
  PolicyTape& t = *tape;
  build_scope(p, view, t);
  const int n = static_cast<int>(t.scope.size());
  const Eigen::MatrixXd hl =
      appnp_encode(t.xaug, t.adj, p.cfg.alpha, p.cfg.appnp_layers, p.W1);

  // rows fed to the per-node MLP
  const int f = static_cast<int>(view.frontier.size());
  if (p.cfg.stop_over_all) {
    t.attn_rows.resize(n);
    for (int i = 0; i < n; ++i) t.attn_rows[i] = i;
  } else {
    t.attn_rows.reserve(f);
    for (int v : view.frontier) {
      const auto it = std::lower_bound(t.scope.begin(), t.scope.end(), v);
      t.attn_rows.push_back(static_cast<int>(it - t.scope.begin()));
    }
  }
  t.frontier_pos.resize(f);
  if (p.cfg.stop_over_all) {
    for (int j = 0; j < f; ++j) {
      const auto it =
          std::lower_bound(t.scope.begin(), t.scope.end(), view.frontier[j]);
      t.frontier_pos[j] = static_cast<int>(it - t.scope.begin());
    }
  } else {
    for (int j = 0; j < f; ++j) t.frontier_pos[j] = j;
  }

  const int r = static_cast<int>(t.attn_rows.size());
  t.hl_rows.resize(r, h);
  for (int k = 0; k < r; ++k) t.hl_rows.row(k) = hl.row(t.attn_rows[k]);
  Eigen::MatrixXd a1 = t.hl_rows * p.W2a;
  a1.rowwise() += p.b2a.col(0).transpose();
  t.z1 = a1.cwiseMax(0.0);
  t.hbar = t.z1 * p.W2b;
  t.hbar.rowwise() += p.b2b.col(0).transpose();

  PolicyEval eval;
  eval.gamma.assign(r, 0.0);
  if (r > 0) {
    Eigen::VectorXd e = t.hbar * p.attn.col(0);
    const double mx = e.maxCoeff();
    double sum = 0.0;
    for (int k = 0; k < r; ++k) {
      eval.gamma[k] = std::exp(e(k) - mx);
      sum += eval.gamma[k];
    }
    for (int k = 0; k < r; ++k) eval.gamma[k] /= sum;
  }
  t.hstop = Eigen::VectorXd::Zero(h);
  for (int k = 0; k < r; ++k) t.hstop += eval.gamma[k] * t.hbar.row(k).transpose();

  eval.actions.reserve(f + 1);
  eval.flows.reserve(f + 1);
  t.clamp_slope.reserve(f + 1);
  const double bound = p.cfg.flow_clamp;
  const double bfv = p.bf(0, 0);
  for (int j = 0; j < f; ++j) {
    double sl = 0.0;
    const double l = clamp_logit(
        t.hbar.row(t.frontier_pos[j]).dot(p.wf.col(0).transpose()) + bfv, bound, &sl);
    eval.actions.push_back(view.frontier[j]);
    eval.flows.push_back(std::exp(l));
    t.clamp_slope.push_back(sl);
  }
  if (view.allow_stop) {
    double sl = 0.0;
    const double l = clamp_logit(t.hstop.dot(p.wf.col(0)) + bfv, bound, &sl);
    eval.actions.push_back(kStopAction);
    eval.flows.push_back(std::exp(l));
    t.clamp_slope.push_back(sl);
  }
  if (with_tape) eval.tape = std::move(tape);
  return eval;
}

PolicyEval single_action_flow(const PolicyParams& p, const StateView& view,
                              int action, bool with_tape) {
  if (!std::binary_search(view.frontier.begin(), view.frontier.end(), action)) {
    throw std::invalid_argument("single_action_flow: action not in frontier");
  }
  const int h = p.cfg.hidden;
  auto tape = std::make_shared<PolicyTape>();
  PolicyTape& t = *tape;
  build_scope(p, view, t);
  const Eigen::MatrixXd hl =
      appnp_encode(t.xaug, t.adj, p.cfg.alpha, p.cfg.appnp_layers, p.W1);

  const auto it = std::lower_bound(t.scope.begin(), t.scope.end(), action);
  t.attn_rows = {static_cast<int>(it - t.scope.begin())};
  t.frontier_pos = {0};
  t.hl_rows = hl.row(t.attn_rows[0]);
  Eigen::MatrixXd a1 = t.hl_rows * p.W2a;
  a1.rowwise() += p.b2a.col(0).transpose();
  t.z1 = a1.cwiseMax(0.0);
  t.hbar = t.z1 * p.W2b;
  t.hbar.rowwise() += p.b2b.col(0).transpose();
  t.hstop = Eigen::VectorXd::Zero(h);

  PolicyEval eval;
  double sl = 0.0;
  const double l = clamp_logit(t.hbar.row(0).dot(p.wf.col(0).transpose()) + p.bf(0, 0),
                               p.cfg.flow_clamp, &sl);
  eval.actions = {action};
  eval.flows = {std::exp(l)};
  t.clamp_slope = {sl};
  if (with_tape) eval.tape = std::move(tape);
  return eval;
}

EncodeResult encode_state(const PolicyParams& p, const StateView& view) {
  PolicyEval eval = action_flows(p, view, true);
  const PolicyTape& t = *eval.tape;
  EncodeResult res;
  res.candidates = view.frontier;
  const int f = static_cast<int>(view.frontier.size());
  res.hbar.resize(f, p.cfg.hidden);
  for (int j = 0; j < f; ++j) res.hbar.row(j) = t.hbar.row(t.frontier_pos[j]);
  res.hbar_stop = t.hstop;
  res.gamma = eval.gamma;
  return res;
}

void policy_backward(const PolicyParams& p, const PolicyEval& eval,
                     const std::vector<double>& flow_grads,
                     std::vector<Eigen::MatrixXd>& grads) {
  if (!eval.tape) throw std::logic_error("policy_backward: evaluation has no tape");
  const PolicyTape& t = *eval.tape;
  const int h = p.cfg.hidden;
  const int r = static_cast<int>(t.attn_rows.size());
  const bool has_stop = !eval.actions.empty() && eval.actions.back() == kStopAction;
  const int f = static_cast<int>(eval.actions.size()) - (has_stop ? 1 : 0);

  // grads layout mirrors PolicyParams::params()
  Eigen::MatrixXd& gW1 = grads[0];
  Eigen::MatrixXd& gW2a = grads[1];
  Eigen::MatrixXd& gb2a = grads[2];
  Eigen::MatrixXd& gW2b = grads[3];
  Eigen::MatrixXd& gb2b = grads[4];
  Eigen::MatrixXd& gattn = grads[5];
  Eigen::MatrixXd& gwf = grads[6];
  Eigen::MatrixXd& gbf = grads[7];

  Eigen::MatrixXd ghbar = Eigen::MatrixXd::Zero(r, h);
  for (int j = 0; j < f; ++j) {
    // through exp, then the tapered clamp
    double gl = flow_grads[j] * eval.flows[j] * t.clamp_slope[j];
    if (gl == 0.0) continue;
    ghbar.row(t.frontier_pos[j]) += gl * p.wf.col(0).transpose();
    gwf.col(0) += gl * t.hbar.row(t.frontier_pos[j]).transpose();
    gbf(0, 0) += gl;
  }
  if (has_stop) {
    const double gl = flow_grads[f] * eval.flows[f] * t.clamp_slope[f];
    if (gl != 0.0) {
      gwf.col(0) += gl * t.hstop;
      gbf(0, 0) += gl;
      const Eigen::VectorXd ghstop = gl * p.wf.col(0);
      Eigen::VectorXd ggamma(r);
      for (int k = 0; k < r; ++k) {
        ggamma(k) = ghstop.dot(t.hbar.row(k));
        ghbar.row(k) += eval.gamma[k] * ghstop.transpose();
      }
      double dot = 0.0;
      for (int k = 0; k < r; ++k) dot += eval.gamma[k] * ggamma(k);
      for (int k = 0; k < r; ++k) {
        const double ge = eval.gamma[k] * (ggamma(k) - dot);
        gattn.col(0) += ge * t.hbar.row(k).transpose();
        ghbar.row(k) += ge * p.attn.col(0).transpose();
      }
    }
  }

  // per-node MLP backward on the attended rows
  gW2b += t.z1.transpose() * ghbar;
  gb2b.col(0) += ghbar.colwise().sum().transpose();
  Eigen::MatrixXd ga1 =
      ((t.z1.array() > 0.0).cast<double>() * (ghbar * p.W2b.transpose()).array())
          .matrix();
  gW2a += t.hl_rows.transpose() * ga1;
  gb2a.col(0) += ga1.colwise().sum().transpose();
  const Eigen::MatrixXd ghl_rows = ga1 * p.W2a.transpose();

  const int n = static_cast<int>(t.scope.size());
  Eigen::MatrixXd gcur = Eigen::MatrixXd::Zero(n, h);
  for (int k = 0; k < r; ++k) gcur.row(t.attn_rows[k]) = ghl_rows.row(k);

  // backward through H^{l+1} = (1-alpha) A H^l + alpha H^0
  Eigen::MatrixXd gh0 = Eigen::MatrixXd::Zero(n, h);
  for (int l = 0; l < p.cfg.appnp_layers; ++l) {
    gh0 += p.cfg.alpha * gcur;
    gcur = (1.0 - p.cfg.alpha) * local_multiply(t.adj, gcur);
  }
  gh0 += gcur;
  gW1 += t.xaug.transpose() * gh0;
}

}  // namespace gflowx
