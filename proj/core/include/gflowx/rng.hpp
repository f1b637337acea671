#pragma once

#include <cstdint>
#include <initializer_list>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace gflowx {

// Seed mixing and distributions are hand-rolled so that byte-identical
// results hold across standard libraries: std::mt19937_64 is fully specified,
// but std::uniform_*_distribution and std::normal_distribution are not.

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Child seed from a root seed and a tag path. Each randomized component owns
// a distinct leading tag so streams never collide.
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(root);
  for (std::uint64_t tag : path) s = mix64(s ^ mix64(tag));
  return s;
}

namespace seed_tag {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kGnnInit = 2;
inline constexpr std::uint64_t kGnnTrain = 3;
inline constexpr std::uint64_t kPolicyInit = 4;
inline constexpr std::uint64_t kSampler = 5;
inline constexpr std::uint64_t kLocator = 6;
inline constexpr std::uint64_t kLogZ = 7;
inline constexpr std::uint64_t kBench = 8;
inline constexpr std::uint64_t kEval = 9;
inline constexpr std::uint64_t kSplit = 10;
inline constexpr std::uint64_t kCalibrate = 11;
}  // namespace seed_tag

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t u64() { return gen_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  // [0, n), unbiased via rejection
  int uniform_int(int n) {
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t bound = ~0ULL - ~0ULL % un;
    std::uint64_t x;
    do {
      x = u64();
    } while (x >= bound);
    return static_cast<int>(x % un);
  }

  // standard normal, Box-Muller with cached spare
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[i], v[uniform_int(i + 1)]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gflowx
