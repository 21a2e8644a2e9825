#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dsg {

/// Dense row-major matrix of doubles.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor2 identity(std::size_t n);
  static Tensor2 scalar(double v) { return Tensor2(1, 1, v); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool same_shape(const Tensor2& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  void fill(double v);

  Tensor2& operator+=(const Tensor2& other);
  Tensor2& operator*=(double s);

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
/// aᵀ·b without materializing the transpose.
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);
/// a·bᵀ without materializing the transpose.
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);
Tensor2 transpose(const Tensor2& a);
Tensor2 operator+(const Tensor2& a, const Tensor2& b);
Tensor2 operator-(const Tensor2& a, const Tensor2& b);
Tensor2 operator*(const Tensor2& a, double s);
Tensor2 hadamard(const Tensor2& a, const Tensor2& b);
/// 1 x cols vector of column sums.
Tensor2 column_sums(const Tensor2& a);
std::vector<double> row_sums(const Tensor2& a);
double frobenius_norm(const Tensor2& a);
double max_abs(const Tensor2& a);
/// Copy of `a` with each row scaled to unit L2 norm. Zero rows stay zero.
Tensor2 normalize_rows(const Tensor2& a);
/// Rows [begin, end) of `a`.
Tensor2 slice_rows(const Tensor2& a, std::size_t begin, std::size_t end);

/// Row index of the largest entry in each row; ties go to the lowest column.
std::vector<std::size_t> argmax_rows(const Tensor2& a);

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix. Immutable once built.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  /// Duplicate coordinates are summed. Zero values are kept as explicit entries.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  static SparseMatrix from_dense(const Tensor2& dense, double drop_below = 0.0);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  std::span<const std::size_t> row_cols(std::size_t r) const {
    return {col_index_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  Tensor2 multiply(const Tensor2& dense) const;
  /// thisᵀ·dense.
  Tensor2 transpose_multiply(const Tensor2& dense) const;
  Tensor2 to_dense() const;
  std::vector<double> row_sums() const;
  double total() const;
  bool is_square() const { return rows_ == cols_; }
  double min_value() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_index_;
  std::vector<double> values_;
};

}  // namespace dsg
