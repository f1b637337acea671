#pragma once

#include <Eigen/Dense>

#include <vector>

#include "gflowx/rng.hpp"

namespace gflowx {

// All learnable tensors are MatrixXd (vectors as n x 1) so one optimizer and
// one checkpoint path cover every model.

std::vector<Eigen::MatrixXd> zero_grads_like(const std::vector<Eigen::MatrixXd*>& params);
void accumulate_grads(std::vector<Eigen::MatrixXd>& into,
                      const std::vector<Eigen::MatrixXd>& from, double scale = 1.0);

// Glorot-uniform fan-in/fan-out initialization.
Eigen::MatrixXd glorot(int rows, int cols, Rng& rng);

class Adam {
 public:
  Adam(double lr = 1e-2, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Eigen::MatrixXd*>& params,
            const std::vector<Eigen::MatrixXd>& grads);

  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

// Fully connected net with ReLU on hidden layers and a linear output layer.
// Used by the locator head and the conditional-Z head.
struct Mlp {
  std::vector<Eigen::MatrixXd> W;  // W[l]: in x out
  std::vector<Eigen::MatrixXd> b;  // out x 1

  Mlp() = default;
  Mlp(const std::vector<int>& dims, Rng& rng);

  bool empty() const { return W.empty(); }
  int input_dim() const { return static_cast<int>(W.front().rows()); }
  int output_dim() const { return static_cast<int>(W.back().cols()); }

  struct Tape {
    std::vector<Eigen::VectorXd> acts;  // acts[0] = input, then post-activation per layer
  };

  Eigen::VectorXd forward(const Eigen::VectorXd& x, Tape* tape = nullptr) const;
  // Accumulates parameter gradients (layout W0,b0,W1,b1,...) and returns
  // d loss / d input.
  Eigen::VectorXd backward(const Tape& tape, const Eigen::VectorXd& gout,
                           std::vector<Eigen::MatrixXd>& grads) const;

  std::vector<Eigen::MatrixXd*> params();
};

// log(sum(exp(x))) with max-shift; softmax helpers shared by losses
Eigen::VectorXd softmax(const Eigen::VectorXd& x);

}  // namespace gflowx
