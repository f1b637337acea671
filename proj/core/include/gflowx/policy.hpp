#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gflowx/checkpoint.hpp"
#include "gflowx/cut_vertex.hpp"
#include "gflowx/graph.hpp"
#include "gflowx/nn.hpp"

namespace gflowx {

struct PolicyConfig {
  int hidden = 64;
  double alpha = 0.85;     // teleport weight
  int appnp_layers = 3;    // propagation depth
  bool stop_over_all = false;  // attend over subgraph+frontier instead of frontier only
  double flow_clamp = 50.0;    // log flows squashed to +-bound (tanh, so
                               // saturated flows keep a recovery gradient)
};

struct PolicyParams {
  PolicyConfig cfg;
  int feature_dim = 0;  // raw feature dim d; encoder consumes d+2

  Eigen::MatrixXd W1;        // (d+2) x hidden
  Eigen::MatrixXd W2a, b2a;  // per-node MLP, first layer
  Eigen::MatrixXd W2b, b2b;  // per-node MLP, second layer
  Eigen::MatrixXd attn;      // hidden x 1, stop attention
  Eigen::MatrixXd wf, bf;    // hidden x 1 and 1 x 1, flow head

  std::vector<Eigen::MatrixXd*> params();
  // save/load go through the named-tensor list; unknown tensors in a file are
  // ignored, so optional heads (locator, log Z) can share the checkpoint
  std::vector<NamedTensor> tensors() const;
  static PolicyParams from_tensors(const std::vector<NamedTensor>& tensors);
  void save(const std::string& path) const;
  static PolicyParams load(const std::string& path);
};

PolicyParams init_policy(int feature_dim, const PolicyConfig& cfg, std::uint64_t seed);

// What the encoder sees: the node sets only, in ascending global id. Flows
// are therefore identical (bitwise) for any insertion order producing the
// same sets, which is the DAG-consolidation property the losses rely on.
struct StateView {
  const Graph* g = nullptr;
  std::vector<int> members;   // ascending
  std::vector<int> frontier;  // ascending
  int v0 = -1;
  bool allow_stop = false;  // stop becomes legal once the subgraph has 2 nodes
};

StateView make_view(const FrontierState& s, const Graph& g);
// View of an arbitrary node set (used for parent states in the losses).
StateView make_view_of(const std::vector<int>& nodes, const Graph& g, int v0);

// X' over subgraph-then-frontier rows: [x_i | 1{i == v0} | 1{i in subgraph}].
// Subgraph rows follow insertion order, frontier rows ascending global id.
Eigen::MatrixXd augment_features(const FrontierState& s, const Graph& g);

// Normalized adjacency (self loops included) of the scope-induced subgraph,
// rows aligned with the scope list handed in.
struct LocalAdj {
  int n = 0;
  std::vector<int> ptr;
  std::vector<int> idx;
  std::vector<double> w;     // off-diagonal entries aligned with idx
  std::vector<double> self;  // diagonal entries
};
LocalAdj make_local_adj(const Graph& g, const std::vector<int>& scope);
Eigen::MatrixXd local_multiply(const LocalAdj& a, const Eigen::MatrixXd& h);

// H^{l+1} = (1-alpha) A_local H^l + alpha H^0 with H^0 = X' W1.
Eigen::MatrixXd appnp_encode(const Eigen::MatrixXd& x_aug, const LocalAdj& adj,
                             double alpha, int layers, const Eigen::MatrixXd& w1);

inline constexpr int kStopAction = -1;

struct PolicyTape;  // internal forward record, defined in policy.cpp

struct PolicyEval {
  std::vector<int> actions;   // frontier ids ascending, then kStopAction if legal
  std::vector<double> flows;  // positive, aligned with actions
  std::vector<double> gamma;  // stop-attention weights (see PolicyConfig)
  std::shared_ptr<const PolicyTape> tape;

  double total_flow() const;
  std::vector<double> probs() const;
  int action_index(int action) const;  // -1 when absent
  double flow_for(int action) const;
};

// Per-action flows for a state. with_tape records the forward pass so
// policy_backward can run; evaluations without a tape are cheaper.
PolicyEval action_flows(const PolicyParams& p, const StateView& view, bool with_tape);

// Flow of one add action only. Runs the encoder over the full scope but the
// per-node MLP on that action's row alone, which is what the inflow terms of
// the losses need; `action` must be in the frontier.
PolicyEval single_action_flow(const PolicyParams& p, const StateView& view,
                              int action, bool with_tape);

// Candidate representations and the aggregated stop representation.
struct EncodeResult {
  std::vector<int> candidates;  // frontier ids ascending
  Eigen::MatrixXd hbar;         // one row per candidate
  Eigen::VectorXd hbar_stop;
  std::vector<double> gamma;
};
EncodeResult encode_state(const PolicyParams& p, const StateView& view);

// Accumulates d loss / d params given d loss / d flow per action.
void policy_backward(const PolicyParams& p, const PolicyEval& eval,
                     const std::vector<double>& flow_grads,
                     std::vector<Eigen::MatrixXd>& grads);

}  // namespace gflowx
