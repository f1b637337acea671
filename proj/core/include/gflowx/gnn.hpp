#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gflowx/dataset.hpp"
#include "gflowx/graph.hpp"

namespace gflowx {

struct GnnConfig {
  int hidden = 20;
  double lr = 1e-2;
  int epochs = 1000;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
};

// Three graph convolutions (relu(A_hat H W + b)) followed by a linear head;
// the graph task pools the third layer with concatenated max and mean before
// the head. The per-layer biases matter: constant-feature datasets collapse
// to rank-one activations without them, capping what the head can separate.
// Forward passes are reentrant; the model is immutable once trained.
struct GnnModel {
  Task task = Task::kNode;
  int num_classes = 0;
  int feature_dim = 0;
  int hidden = 0;
  double train_accuracy = -1.0;  // recorded by train_gnn

  Eigen::MatrixXd W1, W2, W3;  // conv weights
  Eigen::MatrixXd b1, b2, b3;  // conv biases, hidden x 1
  Eigen::MatrixXd Wout;        // hidden x C (node) or 2*hidden x C (graph)
  Eigen::MatrixXd bout;        // C x 1

  Eigen::MatrixXd conv_embeddings(const Graph& g) const;  // z_v rows, n x hidden
  Eigen::MatrixXd node_probs(const Graph& g) const;       // n x C, softmax rows
  Eigen::VectorXd graph_embedding(const Graph& g) const;  // [max-pool; mean-pool]
  Eigen::VectorXd graph_probs(const Graph& g) const;

  std::vector<Eigen::MatrixXd*> params();
  void save(const std::string& path) const;
  static GnnModel load(const std::string& path);
};

GnnModel init_gnn(Task task, int feature_dim, int num_classes, const GnnConfig& cfg);

struct GnnTrainLogRow {
  int epoch;
  double loss;
  double accuracy;
};

// Full-batch Adam on cross entropy. Node task trains on a seeded
// train_fraction split of the nodes; graph task on all graphs. Low final
// accuracy is reported on the returned model, not raised.
GnnModel train_gnn(const Dataset& ds, const GnnConfig& cfg,
                   std::vector<GnnTrainLogRow>* log = nullptr);

// Prediction with the computation restricted to the induced subgraph on
// `nodes`. Node task returns the distribution for `instance` (which must be
// in `nodes`); graph task pools over the induced subgraph and ignores
// `instance`. The node set does not have to be connected.
Eigen::VectorXd predict_restricted(const GnnModel& m, const Graph& g,
                                   const std::vector<int>& nodes, int instance);

struct Embeddings {
  Eigen::MatrixXd z_v;  // n x hidden
  Eigen::VectorXd z_g;  // 2*hidden
};
Embeddings embeddings(const GnnModel& m, const Graph& g);

// Training objective with analytic gradients, exposed for the finite
// difference checks. Gradient layout matches GnnModel::params().
double gnn_node_loss(const GnnModel& m, const Graph& g,
                     const std::vector<int>& train_nodes,
                     std::vector<Eigen::MatrixXd>* grads);
double gnn_graph_loss(const GnnModel& m, const std::vector<Graph>& graphs,
                      const std::vector<int>& indices,
                      std::vector<Eigen::MatrixXd>* grads);

}  // namespace gflowx
