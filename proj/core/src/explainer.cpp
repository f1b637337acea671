#include "gflowx/explainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace gflowx {

namespace {

// Slots are independent and write only their own buffers, so the schedule
// does not affect results. Exceptions are replayed on the calling thread.
void run_parallel(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = std::min(threads, count);
  std::atomic<int> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
          break;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace

double reward_value(const Eigen::VectorXd& ref, const Eigen::VectorXd& p,
                    const RewardConfig& cfg) {
  Eigen::VectorXd r = ref;
  if (cfg.one_hot) {
    Eigen::Index c = 0;
    ref.maxCoeff(&c);
    r.setZero();
    r(c) = 1.0;
  }
  double lg = 0.0;
  for (Eigen::Index c = 0; c < p.size(); ++c) {
    if (r(c) != 0.0) lg += r(c) * std::log(std::max(p(c), 1e-12));
  }
  return std::exp(cfg.scale * lg);
}

RewardFn make_reward(const GnnModel& model, std::shared_ptr<const Graph> local,
                     int local_instance, const Eigen::VectorXd& full_probs,
                     const RewardConfig& cfg) {
  const GnnModel* m = &model;
  return [m, local = std::move(local), local_instance, ref = full_probs,
          cfg](const std::vector<int>& nodes) {
    return reward_value(ref, predict_restricted(*m, *local, nodes, local_instance), cfg);
  };
}

InstanceContext make_node_context(const Dataset& ds, const GnnModel& model,
                                  int instance, const EnvConfig& cfg) {
  if (ds.task != Task::kNode) {
    throw std::invalid_argument("make_node_context: dataset is not a node task");
  }
  const Graph& g = ds.graph();
  if (instance < 0 || instance >= g.num_nodes()) {
    throw std::out_of_range("make_node_context: instance out of range");
  }
  LhopResult lr = l_hop_subgraph(g, instance, cfg.hops);
  InstanceContext cx;
  cx.instance = instance;
  cx.local = std::make_shared<const Graph>(std::move(lr.graph));
  cx.to_global = std::move(lr.to_global);
  cx.root = lr.local_root;
  // reference prediction on the whole input graph; restricted predictions on
  // subsets of the computation graph are identical either way (restriction
  // composes), so episodes can run on the small graph
  cx.full_probs = model.node_probs(g).row(instance).transpose();
  cx.reward = make_reward(model, cx.local, cx.root, cx.full_probs, cfg.reward);
  return cx;
}

InstanceContext make_graph_context(const Dataset& ds, const GnnModel& model,
                                   int graph_index, const EnvConfig& cfg) {
  if (ds.task != Task::kGraph) {
    throw std::invalid_argument("make_graph_context: dataset is not a graph task");
  }
  if (graph_index < 0 || graph_index >= static_cast<int>(ds.graphs.size())) {
    throw std::out_of_range("make_graph_context: graph index out of range");
  }
  InstanceContext cx;
  cx.instance = graph_index;
  cx.local = std::make_shared<const Graph>(ds.graphs[graph_index]);
  cx.to_global.resize(cx.local->num_nodes());
  std::iota(cx.to_global.begin(), cx.to_global.end(), 0);
  cx.root = -1;
  cx.full_probs = model.graph_probs(*cx.local);
  cx.reward = make_reward(model, cx.local, -1, cx.full_probs, cfg.reward);
  return cx;
}

Episode sample_episode(const PolicyParams& policy, const Graph& g, int v0,
                       const EnvConfig& cfg, const RewardFn& reward, Rng& rng,
                       double explore_eps, bool with_tapes) {
  if (cfg.max_nodes < 2) {
    throw std::invalid_argument("sample_episode: max_nodes must be at least 2");
  }
  Episode ep;
  Trajectory& traj = ep.traj;
  traj.g = &g;
  traj.instance = v0;
  traj.v0 = v0;
  FrontierState s = make_initial_state(g, v0);
  traj.states.push_back(s.nodes);
  if (s.frontier.empty()) {
    traj.degenerate = true;
    traj.reward = reward(s.nodes);
    return ep;
  }
  for (;;) {
    if (s.size() >= cfg.max_nodes) {
      traj.reward = reward(s.nodes);
      break;
    }
    PolicyEval ev = action_flows(policy, make_view(s, g), with_tapes);
    const int k = static_cast<int>(ev.actions.size());
    int idx;
    if (explore_eps > 0.0 && rng.uniform() < explore_eps) {
      idx = rng.uniform_int(k);
    } else {
      const double u = rng.uniform() * ev.total_flow();
      double c = 0.0;
      idx = k - 1;
      for (int i = 0; i < k; ++i) {
        c += ev.flows[i];
        if (u < c) {
          idx = i;
          break;
        }
      }
    }
    const int a = ev.actions[idx];
    ep.evals.push_back(std::move(ev));
    traj.actions.push_back(a);
    if (a == kStopAction) {
      traj.stopped = true;
      traj.reward = reward(s.nodes);
      break;
    }
    grow_state(s, g, a);
    traj.states.push_back(s.nodes);
    traj.parents.push_back(valid_parents(s));
  }
  return ep;
}

Trajectory sample_trajectory(const PolicyParams& policy, const Graph& g, int v0,
                             const EnvConfig& cfg, const RewardFn& reward, Rng& rng,
                             double explore_eps) {
  return sample_episode(policy, g, v0, cfg, reward, rng, explore_eps, false).traj;
}

std::vector<int> rollout(const PolicyParams& policy, const Graph& g, int v0,
                         const EnvConfig& cfg, Rng* rng) {
  FrontierState s = make_initial_state(g, v0);
  if (s.frontier.empty()) return s.nodes;
  while (s.size() < cfg.max_nodes) {
    const PolicyEval ev = action_flows(policy, make_view(s, g), false);
    const int k = static_cast<int>(ev.actions.size());
    int idx = 0;
    if (rng) {
      const double u = rng->uniform() * ev.total_flow();
      double c = 0.0;
      idx = k - 1;
      for (int i = 0; i < k; ++i) {
        c += ev.flows[i];
        if (u < c) {
          idx = i;
          break;
        }
      }
    } else {
      for (int i = 1; i < k; ++i) {
        if (ev.flows[i] > ev.flows[idx]) idx = i;
      }
    }
    const int a = ev.actions[idx];
    if (a == kStopAction) break;
    grow_state(s, g, a);
  }
  return s.nodes;
}

double flow_balance_loss(const std::vector<FlowBalanceTerm>& terms,
                         const LossConfig& cfg, std::vector<FlowBalanceGrad>* grads) {
  if (grads) {
    grads->clear();
    grads->resize(terms.size());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const FlowBalanceTerm& tm = terms[i];
    double in = 0.0;
    for (double f : tm.inflows) in += f;
    double out = tm.reward;
    if (!tm.terminal) {
      out = 0.0;
      for (double f : tm.outflows) out += f;
    }
    double delta, gin, gout;
    if (cfg.log_space) {
      delta = std::log(cfg.eps + in) - std::log(cfg.eps + out);
      gin = 2.0 * delta / (cfg.eps + in);
      gout = -2.0 * delta / (cfg.eps + out);
    } else {
      delta = in - out;
      gin = 2.0 * delta;
      gout = -2.0 * delta;
    }
    total += delta * delta;
    if (grads) {
      (*grads)[i].d_inflows.assign(tm.inflows.size(), gin);
      (*grads)[i].d_outflows.assign(tm.outflows.size(), tm.terminal ? 0.0 : gout);
    }
  }
  return total;
}

double flow_matching_loss(const PolicyParams& policy, const Episode& ep,
                          const LossConfig& cfg, std::vector<Eigen::MatrixXd>* grads,
                          double grad_scale) {
  const Trajectory& traj = ep.traj;
  const int n = static_cast<int>(traj.states.size()) - 1;
  if (traj.degenerate || n < 1) return 0.0;
  const Graph& g = *traj.g;
  const bool need_tape = grads != nullptr;
  const bool cached = !ep.evals.empty();
  if (cached && need_tape && !ep.evals[0].tape) {
    throw std::logic_error("flow_matching_loss: cached evaluations lack tapes");
  }

  std::vector<PolicyEval> local;
  std::vector<char> have;
  if (!cached) {
    local.resize(n);
    have.assign(n, 0);
  }
  auto eval_at = [&](int t) -> const PolicyEval& {
    if (cached) return ep.evals[t];
    if (!have[t]) {
      local[t] =
          action_flows(policy, make_view_of(traj.states[t], g, traj.v0), need_tape);
      have[t] = 1;
    }
    return local[t];
  };
  // pending d loss / d flow per on-trajectory evaluation, freed in one sweep
  std::vector<std::vector<double>> pend(n);
  auto pend_at = [&](int t) -> std::vector<double>& {
    if (pend[t].empty()) pend[t].assign(eval_at(t).actions.size(), 0.0);
    return pend[t];
  };

  double total = 0.0;
  std::vector<PolicyEval> off;
  for (int t = 1; t <= n; ++t) {
    const std::vector<int>& par = traj.parents[t - 1];
    const int a_prev = traj.actions[t - 1];
    double in = 0.0;
    int idx_prev = -1;
    off.clear();
    for (int u : par) {
      if (u == a_prev) {
        idx_prev = eval_at(t - 1).action_index(u);
        in += eval_at(t - 1).flows[idx_prev];
      } else {
        std::vector<int> pn;
        pn.reserve(traj.states[t].size() - 1);
        for (int w : traj.states[t]) {
          if (w != u) pn.push_back(w);
        }
        off.push_back(
            single_action_flow(policy, make_view_of(pn, g, traj.v0), u, need_tape));
        in += off.back().flows[0];
      }
    }
    if (idx_prev < 0) {
      throw std::logic_error("flow_matching_loss: trajectory edge missing from parents");
    }
    const bool term = t == n;
    const double out = term ? traj.reward : eval_at(t).total_flow();
    double delta, gin, gout;
    if (cfg.log_space) {
      delta = std::log(cfg.eps + in) - std::log(cfg.eps + out);
      gin = 2.0 * delta / (cfg.eps + in);
      gout = -2.0 * delta / (cfg.eps + out);
    } else {
      delta = in - out;
      gin = 2.0 * delta;
      gout = -2.0 * delta;
    }
    total += delta * delta;
    if (grads) {
      pend_at(t - 1)[idx_prev] += gin * grad_scale;
      const std::vector<double> one{gin * grad_scale};
      for (const PolicyEval& pe : off) policy_backward(policy, pe, one, *grads);
      if (!term) {
        const double go = gout * grad_scale;
        for (double& x : pend_at(t)) x += go;
      }
    }
  }
  if (grads) {
    for (int t = 0; t < n; ++t) {
      if (!pend[t].empty()) policy_backward(policy, eval_at(t), pend[t], *grads);
    }
  }
  return total;
}

double trajectory_balance_loss(const PolicyParams& policy, const Mlp& log_z,
                               const Episode& ep, const LossConfig& cfg,
                               std::vector<Eigen::MatrixXd>* grads,
                               std::vector<Eigen::MatrixXd>* log_z_grads,
                               double grad_scale) {
  static_cast<void>(cfg);
  if (log_z.empty()) {
    throw std::invalid_argument("trajectory_balance_loss: log_z head is empty");
  }
  const Trajectory& traj = ep.traj;
  const Graph& g = *traj.g;
  const int steps = static_cast<int>(traj.actions.size());
  const bool cached = !ep.evals.empty();
  if (cached && grads && !ep.evals[0].tape) {
    throw std::logic_error("trajectory_balance_loss: cached evaluations lack tapes");
  }

  Mlp::Tape ztape;
  const Eigen::VectorXd x0 = g.features().row(traj.v0).transpose();
  const double lz = log_z.forward(x0, log_z_grads ? &ztape : nullptr)(0);

  std::vector<PolicyEval> local;
  local.reserve(cached ? 0 : steps);
  std::vector<const PolicyEval*> evs(steps);
  for (int i = 0; i < steps; ++i) {
    if (cached) {
      evs[i] = &ep.evals[i];
    } else {
      local.push_back(action_flows(policy, make_view_of(traj.states[i], g, traj.v0),
                                   grads != nullptr));
      evs[i] = &local.back();
    }
  }

  double sum_pf = 0.0;
  for (int i = 0; i < steps; ++i) {
    const int idx = evs[i]->action_index(traj.actions[i]);
    sum_pf += std::log(evs[i]->flows[idx]) - std::log(evs[i]->total_flow());
  }
  double sum_pb = 0.0;  // stop transitions are backward deterministic
  for (const auto& par : traj.parents) {
    sum_pb -= std::log(static_cast<double>(par.size()));
  }
  const double delta = lz + sum_pf - std::log(traj.reward) - sum_pb;

  if (grads) {
    for (int i = 0; i < steps; ++i) {
      const PolicyEval& ev = *evs[i];
      const int idx = ev.action_index(traj.actions[i]);
      const double tot = ev.total_flow();
      std::vector<double> fg(ev.flows.size());
      for (std::size_t j = 0; j < fg.size(); ++j) {
        const double ind = static_cast<int>(j) == idx ? 1.0 / ev.flows[idx] : 0.0;
        fg[j] = 2.0 * delta * grad_scale * (ind - 1.0 / tot);
      }
      policy_backward(policy, ev, fg, *grads);
    }
  }
  if (log_z_grads) {
    Eigen::VectorXd go(1);
    go(0) = 2.0 * delta * grad_scale;
    log_z.backward(ztape, go, *log_z_grads);
  }
  return delta * delta;
}

Eigen::VectorXd locator_scores(const Mlp& locator, const GnnModel& model,
                               const Graph& g) {
  if (locator.empty()) {
    throw std::invalid_argument("locator_scores: locator is empty");
  }
  if (g.num_nodes() == 0) {
    throw std::invalid_argument("locator_scores: empty graph");
  }
  const Embeddings e = embeddings(model, g);
  const Eigen::Index zg = e.z_g.size();
  const Eigen::Index h = e.z_v.cols();
  Eigen::VectorXd in(zg + h);
  in.head(zg) = e.z_g;
  Eigen::VectorXd out(g.num_nodes());
  for (int i = 0; i < g.num_nodes(); ++i) {
    in.tail(h) = e.z_v.row(i).transpose();
    out(i) = locator.forward(in)(0);
  }
  return out;
}

int locate_start(const Mlp& locator, const GnnModel& model, const Graph& g) {
  const Eigen::VectorXd w = locator_scores(locator, model, g);
  Eigen::Index best = 0;
  w.maxCoeff(&best);
  return static_cast<int>(best);
}

namespace {

// One locator refit: for a sampled set of graphs, score every node by the
// loss of an episode started there and pull softmax(omega) toward
// softmax(-loss).
void fit_locator(const std::vector<InstanceContext>& ctxs, const GnnModel& model,
                 TrainResult& res, const TrainConfig& tcfg, int epoch, Adam& opt) {
  const int ng = static_cast<int>(ctxs.size());
  int m = std::max(1, static_cast<int>(std::llround(tcfg.locator_sample * ng)));
  m = std::min(m, ng);
  Rng pick(derive_seed(tcfg.seed,
                       {seed_tag::kLocator, static_cast<std::uint64_t>(epoch)}));
  std::vector<int> order(ng);
  std::iota(order.begin(), order.end(), 0);
  pick.shuffle(order);
  order.resize(m);

  const auto loc_params = res.locator.params();
  std::vector<std::vector<Eigen::MatrixXd>> gbuf(m);
  run_parallel(m, tcfg.threads, [&](int j) {
    const InstanceContext& cx = ctxs[order[j]];
    const Graph& g = *cx.local;
    const int n = g.num_nodes();
    Eigen::VectorXd ell(n);
    for (int v = 0; v < n; ++v) {
      Rng er(derive_seed(tcfg.seed,
                         {seed_tag::kLocator, static_cast<std::uint64_t>(epoch),
                          static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(v)}));
      const Episode epi =
          sample_episode(res.policy, g, v, tcfg.env, cx.reward, er, 0.0, false);
      if (epi.traj.degenerate) {
        ell(v) = std::numeric_limits<double>::infinity();  // never a useful start
      } else if (tcfg.use_tb) {
        ell(v) = trajectory_balance_loss(res.policy, res.log_z, epi, tcfg.loss);
      } else {
        ell(v) = flow_matching_loss(res.policy, epi, tcfg.loss);
      }
    }
    const Eigen::VectorXd target = softmax(-ell);

    const Embeddings emb = embeddings(model, g);
    const Eigen::Index zg = emb.z_g.size();
    const Eigen::Index h = emb.z_v.cols();
    Eigen::VectorXd in(zg + h);
    in.head(zg) = emb.z_g;
    Eigen::VectorXd omega(n);
    std::vector<Mlp::Tape> tapes(n);
    for (int v = 0; v < n; ++v) {
      in.tail(h) = emb.z_v.row(v).transpose();
      omega(v) = res.locator.forward(in, &tapes[v])(0);
    }
    const Eigen::VectorXd p = softmax(omega);

    gbuf[j] = zero_grads_like(loc_params);
    Eigen::VectorXd go(1);
    for (int v = 0; v < n; ++v) {
      go(0) = p(v) - target(v);  // KL(target || softmax(omega)) gradient
      res.locator.backward(tapes[v], go, gbuf[j]);
    }
  });
  auto lg = zero_grads_like(loc_params);
  for (int j = 0; j < m; ++j) accumulate_grads(lg, gbuf[j], 1.0 / m);
  opt.step(loc_params, lg);
}

}  // namespace

TrainResult train_explainer(const Dataset& ds, const GnnModel& model,
                            const PolicyConfig& pcfg, const TrainConfig& tcfg) {
  if (tcfg.batch < 1) {
    throw std::invalid_argument("train_explainer: batch must be positive");
  }
  if (tcfg.epochs < 0) {
    throw std::invalid_argument("train_explainer: epochs must be nonnegative");
  }
  if (tcfg.env.max_nodes < 2) {
    throw std::invalid_argument("train_explainer: max_nodes must be at least 2");
  }
  if (ds.instances.empty()) {
    throw std::invalid_argument("train_explainer: dataset has no instances");
  }

  const bool graph_task = ds.task == Task::kGraph;
  std::vector<InstanceContext> ctxs;
  ctxs.reserve(ds.instances.size());
  for (int inst : ds.instances) {
    ctxs.push_back(graph_task ? make_graph_context(ds, model, inst, tcfg.env)
                              : make_node_context(ds, model, inst, tcfg.env));
  }
  const int d = ctxs[0].local->feature_dim();

  TrainResult res;
  res.policy = init_policy(d, pcfg, tcfg.seed);
  // Calibrate the flow-head bias to the mean terminal log reward of uniform
  // random rollouts. Freshly initialized flows sit near one while rewards sit
  // orders of magnitude lower; without this the first optimizer steps fit the
  // global scale instead of the flow structure and routinely overshoot.
  {
    Rng rng(derive_seed(tcfg.seed, {seed_tag::kCalibrate}));
    double acc = 0.0;
    const int trials = 32;
    for (int i = 0; i < trials; ++i) {
      const InstanceContext& cx = ctxs[rng.uniform_int(static_cast<int>(ctxs.size()))];
      const int v0 =
          graph_task ? rng.uniform_int(cx.local->num_nodes()) : cx.root;
      const Trajectory tr =
          sample_trajectory(res.policy, *cx.local, v0, tcfg.env, cx.reward, rng, 1.0);
      acc += std::log(std::max(tr.reward, 1e-12));
    }
    res.policy.bf(0, 0) = acc / trials;
  }
  if (tcfg.use_tb) {
    Rng zr(derive_seed(tcfg.seed, {seed_tag::kLogZ}));
    res.log_z = Mlp({d, 128, 128, 1}, zr);
  }
  if (graph_task) {
    Rng lr(derive_seed(tcfg.seed, {seed_tag::kLocator}));
    res.locator = Mlp({3 * model.hidden, 64, 8, 1}, lr);
  }

  Adam opt(tcfg.lr);
  Adam opt_z(0.1);  // conditional-Z head uses its own, larger rate
  Adam opt_loc(tcfg.lr);

  const int B = tcfg.batch;
  std::vector<std::vector<Eigen::MatrixXd>> slot_grads(B);
  std::vector<std::vector<Eigen::MatrixXd>> slot_zgrads(tcfg.use_tb ? B : 0);
  std::vector<double> slot_loss(B), slot_reward(B);
  std::vector<int> slot_instance(B);

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    run_parallel(B, tcfg.threads, [&](int b) {
      Rng rng(derive_seed(tcfg.seed,
                          {seed_tag::kSampler, static_cast<std::uint64_t>(epoch),
                           static_cast<std::uint64_t>(b)}));
      const InstanceContext& cx = ctxs[rng.uniform_int(static_cast<int>(ctxs.size()))];
      slot_instance[b] = cx.instance;
      const int v0 = graph_task ? locate_start(res.locator, model, *cx.local) : cx.root;
      const Episode ep = sample_episode(res.policy, *cx.local, v0, tcfg.env, cx.reward,
                                        rng, tcfg.explore_eps, true);
      slot_grads[b] = zero_grads_like(res.policy.params());
      if (tcfg.use_tb) {
        slot_zgrads[b] = zero_grads_like(res.log_z.params());
        slot_loss[b] = trajectory_balance_loss(res.policy, res.log_z, ep, tcfg.loss,
                                               &slot_grads[b], &slot_zgrads[b]);
      } else {
        slot_loss[b] = flow_matching_loss(res.policy, ep, tcfg.loss, &slot_grads[b]);
      }
      slot_reward[b] = ep.traj.reward;
    });

    auto grads = zero_grads_like(res.policy.params());
    double mean_loss = 0.0, mean_reward = 0.0;
    for (int b = 0; b < B; ++b) {
      accumulate_grads(grads, slot_grads[b], 1.0 / B);
      mean_loss += slot_loss[b] / B;
      mean_reward += slot_reward[b] / B;
    }
    if (!std::isfinite(mean_loss)) {
      int bad = 0;
      for (int b = 0; b < B; ++b) {
        if (!std::isfinite(slot_loss[b])) {
          bad = b;
          break;
        }
      }
      std::ostringstream msg;
      msg << "train_explainer: non-finite loss at epoch " << epoch << " (slot " << bad
          << ", instance " << slot_instance[bad] << ", loss " << slot_loss[bad]
          << ", reward " << slot_reward[bad] << ")";
      throw std::runtime_error(msg.str());
    }
    opt.step(res.policy.params(), grads);
    if (tcfg.use_tb) {
      auto zg = zero_grads_like(res.log_z.params());
      for (int b = 0; b < B; ++b) accumulate_grads(zg, slot_zgrads[b], 1.0 / B);
      opt_z.step(res.log_z.params(), zg);
    }
    if (graph_task && tcfg.locator_sample > 0.0) {
      fit_locator(ctxs, model, res, tcfg, epoch, opt_loc);
    }
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    res.log.push_back({epoch, mean_loss, mean_reward, ms});
    if (tcfg.on_epoch) tcfg.on_epoch(res.log.back());
  }
  return res;
}

}  // namespace gflowx
