#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "gflowx/nn.hpp"

namespace gflowx {

// Flat binary checkpoint: magic, tensor count, then per tensor a name,
// row/col header and row-major doubles. Round-trips bit-exactly (values are
// copied, never formatted). Native byte order, written and read on the same
// architecture family (x86-64 little endian in practice).
struct NamedTensor {
  std::string name;
  Eigen::MatrixXd value;
};

void save_tensors(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensors(const std::string& path);

const Eigen::MatrixXd& find_tensor(const std::vector<NamedTensor>& tensors,
                                   const std::string& name);

// Mlp as named tensors: <prefix>layers (1x1 layer count), then <prefix>W0,
// <prefix>b0, ... The prefix namespaces several nets inside one file. An
// empty net round-trips as layers == 0; a missing <prefix>layers tensor loads
// as an empty net so optional heads can share the policy checkpoint.
void append_mlp_tensors(std::vector<NamedTensor>& tensors, const Mlp& m,
                        const std::string& prefix);
Mlp mlp_from_tensors(const std::vector<NamedTensor>& tensors, const std::string& prefix);

}  // namespace gflowx
