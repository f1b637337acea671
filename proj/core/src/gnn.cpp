#include "gflowx/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gflowx/checkpoint.hpp"
#include "gflowx/nn.hpp"

namespace gflowx {

namespace {

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double mx = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - mx).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

struct ConvTape {
  Eigen::MatrixXd M0, M1, M2;  // A_hat * input of each conv layer
  Eigen::MatrixXd H1, H2, H3;  // post-ReLU activations
};

Eigen::MatrixXd conv_forward(const GnnModel& m, const Graph& g, ConvTape* tape) {
  const NormalizedAdjacency& a = g.normalized_adjacency();
  Eigen::MatrixXd m0 = a.multiply(g.features());
  Eigen::MatrixXd h1 = relu((m0 * m.W1).rowwise() + m.b1.col(0).transpose());
  Eigen::MatrixXd m1 = a.multiply(h1);
  Eigen::MatrixXd h2 = relu((m1 * m.W2).rowwise() + m.b2.col(0).transpose());
  Eigen::MatrixXd m2 = a.multiply(h2);
  Eigen::MatrixXd h3 = relu((m2 * m.W3).rowwise() + m.b3.col(0).transpose());
  if (tape) *tape = {std::move(m0), std::move(m1), std::move(m2), h1, h2, h3};
  return h3;
}

// Backpropagates d loss / d H3 through the three convolutions. Gradient
// layout follows GnnModel::params(): W1 b1 W2 b2 W3 b3 Wout bout.
void conv_backward(const GnnModel& m, const Graph& g, const ConvTape& t,
                   const Eigen::MatrixXd& gh3, std::vector<Eigen::MatrixXd>& grads) {
  const NormalizedAdjacency& a = g.normalized_adjacency();
  const Eigen::MatrixXd ga3 =
      ((t.H3.array() > 0.0).cast<double>() * gh3.array()).matrix();
  grads[4] += t.M2.transpose() * ga3;                       // W3
  grads[5].col(0) += ga3.colwise().sum().transpose();       // b3
  const Eigen::MatrixXd gh2 = a.multiply(ga3 * m.W3.transpose());
  const Eigen::MatrixXd ga2 =
      ((t.H2.array() > 0.0).cast<double>() * gh2.array()).matrix();
  grads[2] += t.M1.transpose() * ga2;                       // W2
  grads[3].col(0) += ga2.colwise().sum().transpose();       // b2
  const Eigen::MatrixXd gh1 = a.multiply(ga2 * m.W2.transpose());
  const Eigen::MatrixXd ga1 =
      ((t.H1.array() > 0.0).cast<double>() * gh1.array()).matrix();
  grads[0] += t.M0.transpose() * ga1;                       // W1
  grads[1].col(0) += ga1.colwise().sum().transpose();       // b1
}

}  // namespace

Eigen::MatrixXd GnnModel::conv_embeddings(const Graph& g) const {
  return conv_forward(*this, g, nullptr);
}

Eigen::MatrixXd GnnModel::node_probs(const Graph& g) const {
  Eigen::MatrixXd logits = conv_embeddings(g) * Wout;
  logits.rowwise() += bout.col(0).transpose();
  return softmax_rows(logits);
}

Eigen::VectorXd GnnModel::graph_embedding(const Graph& g) const {
  const Eigen::MatrixXd h3 = conv_embeddings(g);
  Eigen::VectorXd z(2 * hidden);
  z.head(hidden) = h3.colwise().maxCoeff();
  z.tail(hidden) = h3.colwise().mean();
  return z;
}

Eigen::VectorXd GnnModel::graph_probs(const Graph& g) const {
  const Eigen::VectorXd z = graph_embedding(g);
  return softmax(Wout.transpose() * z + bout.col(0));
}

std::vector<Eigen::MatrixXd*> GnnModel::params() {
  return {&W1, &b1, &W2, &b2, &W3, &b3, &Wout, &bout};
}

void GnnModel::save(const std::string& path) const {
  Eigen::MatrixXd meta(5, 1);
  meta << (task == Task::kNode ? 0.0 : 1.0), double(num_classes),
      double(feature_dim), double(hidden), train_accuracy;
  save_tensors(path, {{"meta", meta},
                      {"W1", W1},
                      {"b1", b1},
                      {"W2", W2},
                      {"b2", b2},
                      {"W3", W3},
                      {"b3", b3},
                      {"Wout", Wout},
                      {"bout", bout}});
}

GnnModel GnnModel::load(const std::string& path) {
  const auto tensors = load_tensors(path);
  const Eigen::MatrixXd& meta = find_tensor(tensors, "meta");
  GnnModel m;
  m.task = meta(0, 0) == 0.0 ? Task::kNode : Task::kGraph;
  m.num_classes = static_cast<int>(meta(1, 0));
  m.feature_dim = static_cast<int>(meta(2, 0));
  m.hidden = static_cast<int>(meta(3, 0));
  m.train_accuracy = meta(4, 0);
  m.W1 = find_tensor(tensors, "W1");
  m.b1 = find_tensor(tensors, "b1");
  m.W2 = find_tensor(tensors, "W2");
  m.b2 = find_tensor(tensors, "b2");
  m.W3 = find_tensor(tensors, "W3");
  m.b3 = find_tensor(tensors, "b3");
  m.Wout = find_tensor(tensors, "Wout");
  m.bout = find_tensor(tensors, "bout");
  return m;
}

GnnModel init_gnn(Task task, int feature_dim, int num_classes, const GnnConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, {seed_tag::kGnnInit}));
  GnnModel m;
  m.task = task;
  m.num_classes = num_classes;
  m.feature_dim = feature_dim;
  m.hidden = cfg.hidden;
  m.W1 = glorot(feature_dim, cfg.hidden, rng);
  m.W2 = glorot(cfg.hidden, cfg.hidden, rng);
  m.W3 = glorot(cfg.hidden, cfg.hidden, rng);
  m.b1 = Eigen::MatrixXd::Zero(cfg.hidden, 1);
  m.b2 = Eigen::MatrixXd::Zero(cfg.hidden, 1);
  m.b3 = Eigen::MatrixXd::Zero(cfg.hidden, 1);
  const int head_in = task == Task::kNode ? cfg.hidden : 2 * cfg.hidden;
  m.Wout = glorot(head_in, num_classes, rng);
  m.bout = Eigen::MatrixXd::Zero(num_classes, 1);
  return m;
}

double gnn_node_loss(const GnnModel& m, const Graph& g,
                     const std::vector<int>& train_nodes,
                     std::vector<Eigen::MatrixXd>* grads) {
  ConvTape tape;
  const Eigen::MatrixXd h3 = conv_forward(m, g, grads ? &tape : nullptr);
  Eigen::MatrixXd logits = h3 * m.Wout;
  logits.rowwise() += m.bout.col(0).transpose();
  const Eigen::MatrixXd p = softmax_rows(logits);

  const double inv = 1.0 / static_cast<double>(train_nodes.size());
  double loss = 0.0;
  Eigen::MatrixXd dlogits;
  if (grads) dlogits = Eigen::MatrixXd::Zero(p.rows(), p.cols());
  for (int v : train_nodes) {
    const int y = g.node_labels()[v];
    loss -= inv * std::log(std::max(p(v, y), 1e-300));
    if (grads) {
      dlogits.row(v) += inv * p.row(v);
      dlogits(v, y) -= inv;
    }
  }
  if (grads) {
    (*grads)[6] += h3.transpose() * dlogits;                    // Wout
    (*grads)[7].col(0) += dlogits.colwise().sum().transpose();  // bout
    conv_backward(m, g, tape, dlogits * m.Wout.transpose(), *grads);
  }
  return loss;
}

double gnn_graph_loss(const GnnModel& m, const std::vector<Graph>& graphs,
                      const std::vector<int>& indices,
                      std::vector<Eigen::MatrixXd>* grads) {
  const double inv = 1.0 / static_cast<double>(indices.size());
  double loss = 0.0;
  for (int gi : indices) {
    const Graph& g = graphs[gi];
    ConvTape tape;
    const Eigen::MatrixXd h3 = conv_forward(m, g, grads ? &tape : nullptr);
    const int n = static_cast<int>(h3.rows());
    Eigen::VectorXd z(2 * m.hidden);
    std::vector<int> argmax(m.hidden);
    for (int c = 0; c < m.hidden; ++c) {
      int best = 0;
      for (int r = 1; r < n; ++r) {
        if (h3(r, c) > h3(best, c)) best = r;  // first max wins on ties
      }
      argmax[c] = best;
      z(c) = h3(best, c);
      z(m.hidden + c) = h3.col(c).mean();
    }
    const Eigen::VectorXd p = softmax(m.Wout.transpose() * z + m.bout.col(0));
    const int y = g.graph_label();
    loss -= inv * std::log(std::max(p(y), 1e-300));
    if (grads) {
      Eigen::VectorXd dlogits = inv * p;
      dlogits(y) -= inv;
      (*grads)[6] += z * dlogits.transpose();  // Wout
      (*grads)[7].col(0) += dlogits;           // bout
      const Eigen::VectorXd dz = m.Wout * dlogits;
      Eigen::MatrixXd gh3 = Eigen::MatrixXd::Zero(n, m.hidden);
      for (int c = 0; c < m.hidden; ++c) {
        gh3(argmax[c], c) += dz(c);
        gh3.col(c).array() += dz(m.hidden + c) / n;
      }
      conv_backward(m, g, tape, gh3, *grads);
    }
  }
  return loss;
}

GnnModel train_gnn(const Dataset& ds, const GnnConfig& cfg,
                   std::vector<GnnTrainLogRow>* log) {
  const int d = ds.graphs.front().feature_dim();
  GnnModel m = init_gnn(ds.task, d, ds.num_classes, cfg);
  Adam opt(cfg.lr);

  std::vector<int> train_ids;
  if (ds.task == Task::kNode) {
    const Graph& g = ds.graph();
    if (!g.has_node_labels()) throw std::invalid_argument("train_gnn: no node labels");
    std::vector<int> ids(g.num_nodes());
    for (int v = 0; v < g.num_nodes(); ++v) ids[v] = v;
    Rng split_rng(derive_seed(ds.split_seed, {seed_tag::kGnnTrain}));
    split_rng.shuffle(ids);
    const int keep = std::max(1, static_cast<int>(cfg.train_fraction * ids.size()));
    train_ids.assign(ids.begin(), ids.begin() + keep);
    std::sort(train_ids.begin(), train_ids.end());
  } else {
    for (int gi = 0; gi < static_cast<int>(ds.graphs.size()); ++gi) {
      if (ds.graphs[gi].graph_label() < 0) {
        throw std::invalid_argument("train_gnn: graph without label");
      }
      train_ids.push_back(gi);
    }
  }

  auto params = m.params();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto grads = zero_grads_like(params);
    const double loss =
        ds.task == Task::kNode
            ? gnn_node_loss(m, ds.graph(), train_ids, &grads)
            : gnn_graph_loss(m, ds.graphs, train_ids, &grads);
    opt.step(params, grads);
    if (log) {
      log->push_back({epoch, loss, -1.0});
    }
  }

  // final train accuracy
  int correct = 0;
  if (ds.task == Task::kNode) {
    const Eigen::MatrixXd p = m.node_probs(ds.graph());
    for (int v : train_ids) {
      Eigen::Index arg;
      p.row(v).maxCoeff(&arg);
      if (static_cast<int>(arg) == ds.graph().node_labels()[v]) ++correct;
    }
  } else {
    for (int gi : train_ids) {
      Eigen::Index arg;
      m.graph_probs(ds.graphs[gi]).maxCoeff(&arg);
      if (static_cast<int>(arg) == ds.graphs[gi].graph_label()) ++correct;
    }
  }
  m.train_accuracy = static_cast<double>(correct) / train_ids.size();
  if (log && !log->empty()) log->back().accuracy = m.train_accuracy;
  return m;
}

Eigen::VectorXd predict_restricted(const GnnModel& m, const Graph& g,
                                   const std::vector<int>& nodes, int instance) {
  std::vector<int> to_local;
  const Graph sub = induced_subgraph(g, nodes, &to_local);
  if (m.task == Task::kNode) {
    if (instance < 0 || instance >= g.num_nodes() || to_local[instance] < 0) {
      throw std::invalid_argument("predict_restricted: instance not in subgraph");
    }
    return m.node_probs(sub).row(to_local[instance]).transpose();
  }
  return m.graph_probs(sub);
}

Embeddings embeddings(const GnnModel& m, const Graph& g) {
  Embeddings e;
  e.z_v = m.conv_embeddings(g);
  e.z_g.resize(2 * m.hidden);
  e.z_g.head(m.hidden) = e.z_v.colwise().maxCoeff();
  e.z_g.tail(m.hidden) = e.z_v.colwise().mean();
  return e;
}

}  // namespace gflowx
