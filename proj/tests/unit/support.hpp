#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "dsg/optim.hpp"
#include "dsg/tensor.hpp"

namespace dsg::testing {

inline Tensor2 random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
  Tensor2 t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor2 random_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor2 t(rows, cols);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

/// Symmetric, nonnegative, zero diagonal; each off-diagonal pair present with
/// probability p.
inline Tensor2 random_graph(std::size_t n, double p, Rng& rng, bool weighted = true) {
  Tensor2 a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < p) a(i, j) = a(j, i) = weighted ? rng.uniform(0.1, 1.0) : 1.0;
  return a;
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  rng.shuffle(p);
  return p;
}

/// Row i of the result is row perm[i] of a.
inline Tensor2 permute_rows(const Tensor2& a, const std::vector<std::size_t>& perm) {
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(perm[i], j);
  return out;
}

inline Tensor2 permute_square(const Tensor2& a, const std::vector<std::size_t>& perm) {
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(perm[i], perm[j]);
  return out;
}

inline Tensor2 row_stochastic(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor2 t(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += t(i, j) = rng.uniform(0.05, 1.0);
    for (std::size_t j = 0; j < cols; ++j) t(i, j) /= s;
  }
  return t;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("dsg_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace dsg::testing
