#include "dsg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dsg/error.hpp"

namespace dsg {

namespace {

std::string shape_str(const Tensor2& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " +
                     shape_str(b));
  }
}

}  // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Tensor2: data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor2& Tensor2::operator+=(const Tensor2& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor2& Tensor2::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a) + " * " + shape_str(b));
  }
  Tensor2 out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + shape_str(a) + "^T * " + shape_str(b));
  }
  Tensor2 out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto orow = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_str(a) + " * " + shape_str(b) + "^T");
  }
  Tensor2 out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Tensor2 transpose(const Tensor2& a) {
  Tensor2 out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor2 operator+(const Tensor2& a, const Tensor2& b) {
  Tensor2 out = a;
  out += b;
  return out;
}

Tensor2 operator-(const Tensor2& a, const Tensor2& b) {
  require_same_shape(a, b, "operator-");
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor2 operator*(const Tensor2& a, double s) {
  Tensor2 out = a;
  out *= s;
  return out;
}

Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
  require_same_shape(a, b, "hadamard");
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor2 column_sums(const Tensor2& a) {
  Tensor2 out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += r[j];
  }
  return out;
}

std::vector<double> row_sums(const Tensor2& a) {
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (double v : a.row(i)) out[i] += v;
  return out;
}

double frobenius_norm(const Tensor2& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v * v;
  return std::sqrt(acc);
}

double max_abs(const Tensor2& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

Tensor2 normalize_rows(const Tensor2& a) {
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    double norm = 0.0;
    for (double v : r) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (double& v : r) v /= norm;
  }
  return out;
}

Tensor2 slice_rows(const Tensor2& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of " + std::to_string(a.rows()) + " rows");
  }
  std::vector<double> data(a.storage().begin() + static_cast<std::ptrdiff_t>(begin * a.cols()),
                           a.storage().begin() + static_cast<std::ptrdiff_t>(end * a.cols()));
  return Tensor2(end - begin, a.cols(), std::move(data));
}

std::vector<std::size_t> argmax_rows(const Tensor2& a) {
  std::vector<std::size_t> out(a.rows(), 0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < r.size(); ++j)
      if (r[j] > r[best]) best = j;
    out[i] = best;
  }
  return out;
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw ShapeError("SparseMatrix: entry (" + std::to_string(t.row) + ", " +
                       std::to_string(t.col) + ") outside " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_ptr_.assign(rows + 1, 0);
  for (std::size_t i = 0; i < triplets.size();) {
    std::size_t j = i;
    double acc = 0.0;
    while (j < triplets.size() && triplets[j].row == triplets[i].row &&
           triplets[j].col == triplets[i].col) {
      acc += triplets[j].value;
      ++j;
    }
    m.col_index_.push_back(triplets[i].col);
    m.values_.push_back(acc);
    ++m.row_ptr_[triplets[i].row + 1];
    i = j;
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

SparseMatrix SparseMatrix::from_dense(const Tensor2& dense, double drop_below) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < dense.rows(); ++i)
    for (std::size_t j = 0; j < dense.cols(); ++j)
      if (std::abs(dense(i, j)) > drop_below) t.push_back({i, j, dense(i, j)});
  return from_triplets(dense.rows(), dense.cols(), std::move(t));
}

Tensor2 SparseMatrix::multiply(const Tensor2& dense) const {
  if (cols_ != dense.rows()) {
    throw ShapeError("SparseMatrix::multiply: " + std::to_string(rows_) + "x" +
                     std::to_string(cols_) + " * " + shape_str(dense));
  }
  Tensor2 out(rows_, dense.cols());
  for (std::size_t r = 0; r < rows_; ++r) {
    auto orow = out.row(r);
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const double v = values_[k];
      auto drow = dense.row(col_index_[k]);
      for (std::size_t j = 0; j < dense.cols(); ++j) orow[j] += v * drow[j];
    }
  }
  return out;
}

Tensor2 SparseMatrix::transpose_multiply(const Tensor2& dense) const {
  if (rows_ != dense.rows()) {
    throw ShapeError("SparseMatrix::transpose_multiply: (" + std::to_string(rows_) + "x" +
                     std::to_string(cols_) + ")^T * " + shape_str(dense));
  }
  Tensor2 out(cols_, dense.cols());
  for (std::size_t r = 0; r < rows_; ++r) {
    auto drow = dense.row(r);
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const double v = values_[k];
      auto orow = out.row(col_index_[k]);
      for (std::size_t j = 0; j < dense.cols(); ++j) orow[j] += v * drow[j];
    }
  }
  return out;
}

Tensor2 SparseMatrix::to_dense() const {
  Tensor2 out(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out(r, col_index_[k]) += values_[k];
  return out;
}

std::vector<double> SparseMatrix::row_sums() const {
  std::vector<double> out(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out[r] += values_[k];
  return out;
}

double SparseMatrix::total() const {
  double acc = 0.0;
  for (double v : values_) acc += v;
  return acc;
}

double SparseMatrix::min_value() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : values_) m = std::min(m, v);
  return m;
}

}  // namespace dsg
