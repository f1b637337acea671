#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "gflowx/checkpoint.hpp"
#include "gflowx/rng.hpp"

using namespace gflowx;

TEST_CASE("checkpoint: tensors round trip bit exactly") {
  Eigen::MatrixXd a(2, 3);
  a << 1.0, -0.0, 1e-300, 3.14159265358979, -2e16, 0.1;
  Eigen::MatrixXd b(1, 1);
  b << -7.25;
  const std::string path = "test_checkpoint_tensors.bin";
  save_tensors(path, {{"alpha", a}, {"beta", b}});
  const auto back = load_tensors(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "alpha");
  CHECK(back[1].name == "beta");
  CHECK(find_tensor(back, "alpha") == a);
  CHECK(find_tensor(back, "beta") == b);
  // -0.0 keeps its sign bit
  CHECK(std::signbit(find_tensor(back, "alpha")(0, 1)));
  CHECK_THROWS_AS(find_tensor(back, "gamma"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint: corrupt files are rejected") {
  const std::string path = "test_checkpoint_bad.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTMAGIC and then some";
  }
  CHECK_THROWS_AS(load_tensors(path), std::runtime_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_tensors("missing_checkpoint.bin"), std::runtime_error);
}

TEST_CASE("checkpoint: mlp tensors round trip under a prefix") {
  Rng rng(5);
  Mlp m({4, 8, 2}, rng);
  std::vector<NamedTensor> ts;
  append_mlp_tensors(ts, m, "head.");
  Eigen::MatrixXd other(1, 1);
  other << 42.0;
  ts.push_back({"unrelated", other});
  const Mlp back = mlp_from_tensors(ts, "head.");
  REQUIRE(back.W.size() == 2);
  CHECK(back.W[0] == m.W[0]);
  CHECK(back.W[1] == m.W[1]);
  CHECK(back.b[0] == m.b[0]);
  CHECK(back.b[1] == m.b[1]);
  // missing prefix loads as an empty net; empty nets round trip
  CHECK(mlp_from_tensors(ts, "nope.").empty());
  std::vector<NamedTensor> ts2;
  append_mlp_tensors(ts2, Mlp{}, "");
  CHECK(mlp_from_tensors(ts2, "").empty());
}
