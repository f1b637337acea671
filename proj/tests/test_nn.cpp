#include <cmath>
#include <vector>

#include "doctest.h"
#include "gflowx/nn.hpp"
#include "oracles.hpp"

using namespace gflowx;

TEST_CASE("nn: zero_grads_like mirrors shapes, accumulate scales") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(2, 3), b = Eigen::MatrixXd::Ones(4, 1);
  std::vector<Eigen::MatrixXd*> params{&a, &b};
  auto grads = zero_grads_like(params);
  REQUIRE(grads.size() == 2);
  CHECK(grads[0].rows() == 2);
  CHECK(grads[0].cols() == 3);
  CHECK(grads[0].isZero());
  std::vector<Eigen::MatrixXd> more{Eigen::MatrixXd::Ones(2, 3), Eigen::MatrixXd::Ones(4, 1)};
  accumulate_grads(grads, more, 0.5);
  accumulate_grads(grads, more, 0.25);
  CHECK(grads[0](1, 2) == doctest::Approx(0.75));
  CHECK(grads[1](3, 0) == doctest::Approx(0.75));
}

TEST_CASE("nn: glorot stays in the fan bound and is seed stable") {
  Rng r1(8), r2(8);
  const Eigen::MatrixXd w1 = glorot(20, 30, r1);
  const Eigen::MatrixXd w2 = glorot(20, 30, r2);
  CHECK(w1 == w2);
  const double bound = std::sqrt(6.0 / (20 + 30));
  CHECK(w1.cwiseAbs().maxCoeff() <= bound);
  CHECK(w1.cwiseAbs().maxCoeff() > 0.5 * bound);  // not collapsed
}

TEST_CASE("nn: mlp forward matches a hand computation") {
  Rng rng(1);
  Mlp m({2, 2, 1}, rng);
  m.W[0] << 1.0, -1.0, 0.5, 2.0;
  m.b[0] << 0.25, -0.5;
  m.W[1] << 3.0, -2.0;
  m.b[1] << 0.125;
  Eigen::VectorXd x(2);
  x << 1.0, 2.0;
  // pre-activation: [1*1+2*0.5+0.25, -1*1+2*2-0.5] = [2.25, 2.5] -> relu same
  // output: 3*2.25 - 2*2.5 + 0.125 = 1.875
  const Eigen::VectorXd y = m.forward(x);
  REQUIRE(y.size() == 1);
  CHECK(y(0) == doctest::Approx(1.875).epsilon(1e-12));
  CHECK(m.input_dim() == 2);
  CHECK(m.output_dim() == 1);
}

TEST_CASE("nn: mlp backward agrees with finite differences") {
  Rng rng(21);
  Mlp m({3, 5, 4, 2}, rng);
  Eigen::VectorXd x(3);
  x << 0.4, -1.1, 0.7;
  Eigen::VectorXd target(2);
  target << 0.3, -0.6;
  const auto loss_value = [&] {
    const Eigen::VectorXd y = m.forward(x);
    return 0.5 * (y - target).squaredNorm();
  };
  Mlp::Tape tape;
  const Eigen::VectorXd y = m.forward(x, &tape);
  auto grads = zero_grads_like(m.params());
  const Eigen::VectorXd gin = m.backward(tape, y - target, grads);
  CHECK(oracle::max_grad_error(loss_value, m.params(), grads, 1e-6, 128) < 1e-6);

  // input gradient against finite differences
  for (int i = 0; i < 3; ++i) {
    const double h = 1e-6, orig = x(i);
    x(i) = orig + h;
    const double up = loss_value();
    x(i) = orig - h;
    const double down = loss_value();
    x(i) = orig;
    CHECK(gin(i) == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("nn: adam minimizes a quadratic deterministically") {
  Eigen::MatrixXd w(2, 1);
  w << 5.0, -3.0;
  Eigen::MatrixXd w2 = w;
  Adam opt(0.1), opt2(0.1);
  for (int step = 0; step < 400; ++step) {
    std::vector<Eigen::MatrixXd> g{2.0 * w};  // d/dw ||w||^2
    opt.step({&w}, g);
    std::vector<Eigen::MatrixXd> g2{2.0 * w2};
    opt2.step({&w2}, g2);
  }
  CHECK(w.cwiseAbs().maxCoeff() < 1e-2);
  CHECK(w == w2);
}

TEST_CASE("nn: softmax is shift stable and sums to one") {
  Eigen::VectorXd x(4);
  x << 1000.0, 1001.0, 999.0, 1000.5;
  const Eigen::VectorXd p = softmax(x);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.minCoeff() > 0.0);
  CHECK(p(1) > p(3));
  Eigen::VectorXd y(3);
  y << 0.0, -std::numeric_limits<double>::infinity(), 0.0;
  const Eigen::VectorXd q = softmax(y);
  CHECK(q(1) == 0.0);
  CHECK(q(0) == doctest::Approx(0.5).epsilon(1e-12));
}
