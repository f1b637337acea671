#include "gflowx/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace gflowx {

std::vector<Eigen::MatrixXd> zero_grads_like(const std::vector<Eigen::MatrixXd*>& params) {
  std::vector<Eigen::MatrixXd> grads;
  grads.reserve(params.size());
  for (const auto* p : params) grads.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  return grads;
}

void accumulate_grads(std::vector<Eigen::MatrixXd>& into,
                      const std::vector<Eigen::MatrixXd>& from, double scale) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += scale * from[i];
}

Eigen::MatrixXd glorot(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Eigen::MatrixXd w(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
  }
  return w;
}

void Adam::step(const std::vector<Eigen::MatrixXd*>& params,
                const std::vector<Eigen::MatrixXd>& grads) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
    const Eigen::MatrixXd mhat = m_[i] / bc1;
    const Eigen::MatrixXd vhat = v_[i] / bc2;
    *params[i] -= lr_ * (mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
  }
}

Mlp::Mlp(const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp: need at least two dims");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    W.push_back(glorot(dims[l], dims[l + 1], rng));
    b.push_back(Eigen::MatrixXd::Zero(dims[l + 1], 1));
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x, Tape* tape) const {
  if (tape) {
    tape->acts.clear();
    tape->acts.push_back(x);
  }
  Eigen::VectorXd h = x;
  for (std::size_t l = 0; l < W.size(); ++l) {
    h = W[l].transpose() * h + b[l].col(0);
    if (l + 1 < W.size()) h = h.cwiseMax(0.0);
    if (tape) tape->acts.push_back(h);
  }
  return h;
}

Eigen::VectorXd Mlp::backward(const Tape& tape, const Eigen::VectorXd& gout,
                              std::vector<Eigen::MatrixXd>& grads) const {
  Eigen::VectorXd g = gout;
  for (int l = static_cast<int>(W.size()) - 1; l >= 0; --l) {
    if (l + 1 < static_cast<int>(W.size())) {
      // ReLU mask from the stored post-activation
      g = ((tape.acts[l + 1].array() > 0.0).cast<double>() * g.array()).matrix();
    }
    grads[2 * l] += tape.acts[l] * g.transpose();  // dW
    grads[2 * l + 1].col(0) += g;                  // db
    g = W[l] * g;
  }
  return g;
}

std::vector<Eigen::MatrixXd*> Mlp::params() {
  std::vector<Eigen::MatrixXd*> out;
  for (std::size_t l = 0; l < W.size(); ++l) {
    out.push_back(&W[l]);
    out.push_back(&b[l]);
  }
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& x) {
  const double mx = x.maxCoeff();
  // scalar exp: Eigen's packet exp maps large negative inputs (e.g. masked
  // -inf logits) to subnormals instead of zero
  const Eigen::VectorXd e =
      x.unaryExpr([mx](double v) { return std::exp(v - mx); });
  return e / e.sum();
}

}  // namespace gflowx
