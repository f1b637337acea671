#include "gflowx/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace gflowx {

namespace {
constexpr char kMagic[8] = {'G', 'F', 'X', 'T', 'N', 'S', 'R', '1'};

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return v;
}
}  // namespace

void save_tensors(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    write_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.value.rows()));
    write_u32(out, static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
        const double v = t.value(i, j);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<NamedTensor> load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("bad checkpoint magic: " + path);
  }
  const std::uint32_t count = read_u32(in, path);
  std::vector<NamedTensor> tensors(count);
  for (auto& t : tensors) {
    const std::uint32_t name_len = read_u32(in, path);
    t.name.resize(name_len);
    in.read(t.name.data(), name_len);
    const std::uint32_t rows = read_u32(in, path);
    const std::uint32_t cols = read_u32(in, path);
    t.value.resize(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        t.value(i, j) = v;
      }
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  }
  return tensors;
}

const Eigen::MatrixXd& find_tensor(const std::vector<NamedTensor>& tensors,
                                   const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw std::runtime_error("checkpoint is missing tensor '" + name + "'");
}

void append_mlp_tensors(std::vector<NamedTensor>& tensors, const Mlp& m,
                        const std::string& prefix) {
  Eigen::MatrixXd layers(1, 1);
  layers(0, 0) = static_cast<double>(m.W.size());
  tensors.push_back({prefix + "layers", layers});
  for (std::size_t l = 0; l < m.W.size(); ++l) {
    tensors.push_back({prefix + "W" + std::to_string(l), m.W[l]});
    tensors.push_back({prefix + "b" + std::to_string(l), m.b[l]});
  }
}

Mlp mlp_from_tensors(const std::vector<NamedTensor>& tensors, const std::string& prefix) {
  Mlp m;
  const NamedTensor* layers = nullptr;
  for (const auto& t : tensors) {
    if (t.name == prefix + "layers") layers = &t;
  }
  if (layers == nullptr) return m;
  const int n = static_cast<int>(layers->value(0, 0));
  for (int l = 0; l < n; ++l) {
    m.W.push_back(find_tensor(tensors, prefix + "W" + std::to_string(l)));
    m.b.push_back(find_tensor(tensors, prefix + "b" + std::to_string(l)));
  }
  return m;
}

}  // namespace gflowx
