#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "gflowx/cut_vertex.hpp"
#include "gflowx/dataset.hpp"
#include "gflowx/gnn.hpp"
#include "gflowx/policy.hpp"

namespace gflowx {

// Terminal reward for a node set (local ids). Always positive.
using RewardFn = std::function<double(const std::vector<int>&)>;

struct RewardConfig {
  bool one_hot = false;  // score against the argmax class instead of the soft prediction
  double scale = 1.0;    // sharpening exponent applied to r
};

struct EnvConfig {
  int max_nodes = 20;  // subgraph size cap
  int hops = 3;        // computation-graph radius for node tasks
  RewardConfig reward;
};

// r = exp(scale * sum_c ref(c) log max(p(c), 1e-12)): exponentiated negative
// cross entropy between the reference prediction and the restricted one.
// Identities: p == ref one-hot gives 1; one-hot ref against uniform p gives
// (1/C)^scale; one-hot mode reduces to p(c*)^scale.
double reward_value(const Eigen::VectorXd& ref, const Eigen::VectorXd& p,
                    const RewardConfig& cfg);

// reward_value against the model's prediction restricted to the explanation
// nodes; ref is full_probs, or its argmax one-hot under cfg.one_hot.
RewardFn make_reward(const GnnModel& model, std::shared_ptr<const Graph> local,
                     int local_instance, const Eigen::VectorXd& full_probs,
                     const RewardConfig& cfg);

// Per-instance episode setup: the graph episodes run on, the start node, and
// the reward closure. Node tasks: the hops-hop computation graph around the
// instance, root = the instance. Graph tasks: the whole instance graph,
// root = -1 (picked per episode by the locator). The model must outlive the
// context.
struct InstanceContext {
  int instance = -1;
  std::shared_ptr<const Graph> local;
  std::vector<int> to_global;  // local -> dataset node ids
  int root = -1;
  Eigen::VectorXd full_probs;
  RewardFn reward;
};

InstanceContext make_node_context(const Dataset& ds, const GnnModel& model,
                                  int instance, const EnvConfig& cfg);
InstanceContext make_graph_context(const Dataset& ds, const GnnModel& model,
                                   int graph_index, const EnvConfig& cfg);

struct Trajectory {
  const Graph* g = nullptr;
  int instance = -1;
  int v0 = -1;
  std::vector<std::vector<int>> states;   // node lists in insertion order; states[0] = {v0}
  std::vector<int> actions;               // added node per step; kStopAction last iff stopped
  std::vector<std::vector<int>> parents;  // parents[i]: removable nodes of states[i + 1]
  double reward = 0.0;
  bool stopped = false;
  bool degenerate = false;  // isolated v0: no legal action at s0
};

// Trajectory plus the policy evaluations made at each decision point, tapes
// included so the losses can reuse them. evals[t] belongs to states[t]; the
// final state has an eval only when the episode ended with an explicit stop.
struct Episode {
  Trajectory traj;
  std::vector<PolicyEval> evals;
};

// explore_eps mixes a uniform action choice into the sampling policy
// (training-time exploration; the losses are off-policy safe).
Episode sample_episode(const PolicyParams& policy, const Graph& g, int v0,
                       const EnvConfig& cfg, const RewardFn& reward, Rng& rng,
                       double explore_eps = 0.0, bool with_tapes = true);
Trajectory sample_trajectory(const PolicyParams& policy, const Graph& g, int v0,
                             const EnvConfig& cfg, const RewardFn& reward, Rng& rng,
                             double explore_eps = 0.0);

// Greedy (rng == nullptr: argmax flow, first index on ties) or sampled
// rollout; returns the visited nodes in insertion order.
std::vector<int> rollout(const PolicyParams& policy, const Graph& g, int v0,
                         const EnvConfig& cfg, Rng* rng = nullptr);

struct LossConfig {
  bool log_space = true;  // residuals on the log(eps + .) scale; raw flow units otherwise
  double eps = 1e-8;
};

// One balance residual: inflows against outflows, or against the reward at a
// terminal state.
struct FlowBalanceTerm {
  std::vector<double> inflows;
  std::vector<double> outflows;
  double reward = 0.0;
  bool terminal = false;
};
struct FlowBalanceGrad {
  std::vector<double> d_inflows;
  std::vector<double> d_outflows;
};

// Sum of squared balance residuals; the reference form the episode loss
// reduces to.
double flow_balance_loss(const std::vector<FlowBalanceTerm>& terms,
                         const LossConfig& cfg,
                         std::vector<FlowBalanceGrad>* grads = nullptr);

// Squared balance residual per non-initial state of the episode: inflows
// from every valid parent's one-step action, outflows from the state's own
// action set, the reward replacing outflows at the final state. When
// ep.evals is empty the states are re-evaluated here; cached evals must come
// from the same parameters. Gradients (policy layout, scaled by grad_scale)
// accumulate into *grads when non-null. Returns the episode loss.
double flow_matching_loss(const PolicyParams& policy, const Episode& ep,
                          const LossConfig& cfg,
                          std::vector<Eigen::MatrixXd>* grads = nullptr,
                          double grad_scale = 1.0);

// (log Z(v0) + sum log P_F - log r - sum log P_B)^2 with P_B uniform over
// the valid parents of each reached state (the stop transition is backward
// deterministic). log_z maps the start node's raw features to log Z. The
// residual is inherently logarithmic; cfg.log_space is ignored.
double trajectory_balance_loss(const PolicyParams& policy, const Mlp& log_z,
                               const Episode& ep, const LossConfig& cfg,
                               std::vector<Eigen::MatrixXd>* grads = nullptr,
                               std::vector<Eigen::MatrixXd>* log_z_grads = nullptr,
                               double grad_scale = 1.0);

struct EpochLog {
  int epoch;
  double mean_loss;
  double mean_reward;
  double wall_ms;
};

struct TrainConfig {
  int batch = 64;
  int epochs = 50;  // node-task default; graph tasks typically run 100
  double lr = 1e-2;
  double explore_eps = 0.0;
  bool use_tb = false;          // trajectory balance instead of flow matching
  double locator_sample = 0.2;  // fraction of graphs refitting the locator per epoch
  int threads = 1;
  std::uint64_t seed = 1;
  LossConfig loss;
  EnvConfig env;
  std::function<void(const EpochLog&)> on_epoch;  // progress hook, may be empty
};

struct TrainResult {
  PolicyParams policy;
  Mlp locator;  // graph tasks only, empty otherwise
  Mlp log_z;    // trajectory balance only, empty otherwise
  std::vector<EpochLog> log;
};

// Per epoch: sample `batch` episodes (instance and trajectory drawn from a
// per-slot rng stream, so results are independent of thread count), reduce
// slot gradients in slot order, take one Adam step. Graph tasks pick each
// episode's start node with the locator and refit it every epoch on a
// locator_sample fraction of graphs against softmaxed negative episode
// losses. Throws on non-finite loss.
TrainResult train_explainer(const Dataset& ds, const GnnModel& model,
                            const PolicyConfig& pcfg, const TrainConfig& tcfg);

// Locator scores over the nodes of g; input per node is [z_g ; z_v].
Eigen::VectorXd locator_scores(const Mlp& locator, const GnnModel& model,
                               const Graph& g);
int locate_start(const Mlp& locator, const GnnModel& model, const Graph& g);

}  // namespace gflowx
