#include "dsg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dsg/error.hpp"

namespace dsg {

namespace {

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw Error("op on a detached Var");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw Error("op mixes Vars from different tapes");
  return tape_of(a);
}

void check_shape(bool ok, const char* op, const Tensor2& a, const Tensor2& b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

double selu_scalar(double x) {
  return x > 0.0 ? kSeluScale * x : kSeluScale * kSeluAlpha * std::expm1(x);
}

double selu_derivative(double x) {
  return x > 0.0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(x);
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void validate_adjacency(const Tensor2& a) {
  if (a.rows() != a.cols()) {
    throw ShapeError("gcn adjacency must be square, got " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()));
  }
  for (double v : a.values())
    if (v < 0.0) throw InvalidArgument("gcn adjacency has a negative entry");
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(matmul(a.value(), b.value()), {a.id, b.id},
                  [a = a.id, b = b.id](Tape& t, std::size_t self) {
                    const Tensor2& g = t.grad(self);
                    if (t.requires_grad(a)) t.grad_buffer(a) += matmul_nt(g, t.value(b));
                    if (t.requires_grad(b)) t.grad_buffer(b) += matmul_tn(t.value(a), g);
                  });
}

Var matmul_tn(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(matmul_tn(a.value(), b.value()), {a.id, b.id},
                  [a = a.id, b = b.id](Tape& t, std::size_t self) {
                    const Tensor2& g = t.grad(self);
                    if (t.requires_grad(a)) t.grad_buffer(a) += matmul_nt(t.value(b), g);
                    if (t.requires_grad(b)) t.grad_buffer(b) += matmul(t.value(a), g);
                  });
}

Var spmm(const SparseMatrix& s, Var b) {
  Tape& t = tape_of(b);
  const SparseMatrix* sp = &s;
  return t.record(s.multiply(b.value()), {b.id}, [sp, b = b.id](Tape& t, std::size_t self) {
    t.grad_buffer(b) += sp->transpose_multiply(t.grad(self));
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check_shape(a.value().same_shape(b.value()), "add", a.value(), b.value());
  return t.record(a.value() + b.value(), {a.id, b.id},
                  [a = a.id, b = b.id](Tape& t, std::size_t self) {
                    const Tensor2& g = t.grad(self);
                    if (t.requires_grad(a)) t.grad_buffer(a) += g;
                    if (t.requires_grad(b)) t.grad_buffer(b) += g;
                  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  return t.record(a.value() * s, {a.id}, [a = a.id, s](Tape& t, std::size_t self) {
    t.grad_buffer(a) += t.grad(self) * s;
  });
}

Var add_bias(Var x, Var b) {
  Tape& t = tape_of(x, b);
  const Tensor2& xv = x.value();
  const Tensor2& bv = b.value();
  check_shape(bv.rows() == 1 && bv.cols() == xv.cols(), "add_bias", xv, bv);
  Tensor2 out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bv[j];
  }
  return t.record(std::move(out), {x.id, b.id}, [x = x.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    if (t.requires_grad(x)) t.grad_buffer(x) += g;
    if (t.requires_grad(b)) t.grad_buffer(b) += column_sums(g);
  });
}

Var dense(Var x, Var weight, Var bias) {
  check_shape(x.cols() == weight.rows(), "dense", x.value(), weight.value());
  return add_bias(matmul(x, weight), bias);
}

Var selu(Var x) {
  Tape& t = tape_of(x);
  return t.record(selu(x.value()), {x.id}, [x = x.id](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& xv = t.value(x);
    Tensor2& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * selu_derivative(xv[i]);
  });
}

Var sigmoid(Var x) {
  Tape& t = tape_of(x);
  Tensor2 out = x.value();
  for (double& v : out.values()) v = sigmoid_scalar(v);
  return t.record(std::move(out), {x.id}, [x = x.id](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& y = t.value(self);
    Tensor2& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var softmax_rows(Var x) {
  Tape& t = tape_of(x);
  return t.record(softmax_rows(x.value()), {x.id}, [x = x.id](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& y = t.value(self);
    Tensor2& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      auto yr = y.row(i);
      auto gr = g.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < yr.size(); ++j) dot += gr[j] * yr[j];
      auto out = gx.row(i);
      for (std::size_t j = 0; j < yr.size(); ++j) out[j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels) {
  Tape& t = tape_of(logits);
  const Tensor2& z = logits.value();
  if (labels.size() != z.rows()) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(z.rows()) + " rows");
  }
  for (std::size_t l : labels) {
    if (l >= z.cols()) {
      throw InvalidArgument("softmax_cross_entropy: label " + std::to_string(l) +
                            " out of range for " + std::to_string(z.cols()) + " classes");
    }
  }
  Tensor2 probs = softmax_rows(z);
  double loss = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    // log-sum-exp form keeps large margins finite
    auto r = z.row(i);
    const double m = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double v : r) sum += std::exp(v - m);
    loss += m + std::log(sum) - r[labels[i]];
  }
  const double n = static_cast<double>(z.rows());
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return t.record(Tensor2::scalar(loss / n), {logits.id},
                  [x = logits.id, probs = std::move(probs), lab = std::move(lab), n](
                      Tape& t, std::size_t self) {
                    const double g = t.grad(self)[0];
                    Tensor2& gx = t.grad_buffer(x);
                    for (std::size_t i = 0; i < probs.rows(); ++i) {
                      for (std::size_t j = 0; j < probs.cols(); ++j) {
                        const double target = j == lab[i] ? 1.0 : 0.0;
                        gx(i, j) += g * (probs(i, j) - target) / n;
                      }
                    }
                  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check_shape(a.value().same_shape(b.value()), "hadamard", a.value(), b.value());
  return t.record(hadamard(a.value(), b.value()), {a.id, b.id},
                  [a = a.id, b = b.id](Tape& t, std::size_t self) {
                    const Tensor2& g = t.grad(self);
                    if (t.requires_grad(a)) t.grad_buffer(a) += hadamard(g, t.value(b));
                    if (t.requires_grad(b)) t.grad_buffer(b) += hadamard(g, t.value(a));
                  });
}

Var zero_diagonal(Var a) {
  Tape& t = tape_of(a);
  Tensor2 out = a.value();
  const std::size_t n = std::min(out.rows(), out.cols());
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 0.0;
  return t.record(std::move(out), {a.id}, [a = a.id](Tape& t, std::size_t self) {
    Tensor2 g = t.grad(self);
    const std::size_t n = std::min(g.rows(), g.cols());
    for (std::size_t i = 0; i < n; ++i) g(i, i) = 0.0;
    t.grad_buffer(a) += g;
  });
}

Var symmetrize(Var a) {
  Tape& t = tape_of(a);
  const Tensor2& v = a.value();
  if (v.rows() != v.cols()) throw ShapeError("symmetrize: matrix is not square");
  Tensor2 out = (v + transpose(v)) * 0.5;
  return t.record(std::move(out), {a.id}, [a = a.id](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    t.grad_buffer(a) += (g + transpose(g)) * 0.5;
  });
}

Var sum_rows(Var x) {
  Tape& t = tape_of(x);
  return t.record(column_sums(x.value()), {x.id}, [x = x.id](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    Tensor2& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < gx.rows(); ++i) {
      auto r = gx.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += g[j];
    }
  });
}

Var pair_concat(Var x) {
  Tape& t = tape_of(x);
  const Tensor2& v = x.value();
  const std::size_t k = v.rows();
  const std::size_t d = v.cols();
  Tensor2 out(k * k, 2 * d);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      auto r = out.row(i * k + j);
      std::copy(v.row(i).begin(), v.row(i).end(), r.begin());
      std::copy(v.row(j).begin(), v.row(j).end(), r.begin() + static_cast<std::ptrdiff_t>(d));
    }
  }
  return t.record(std::move(out), {x.id}, [x = x.id, k, d](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    Tensor2& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        auto r = g.row(i * k + j);
        auto gi = gx.row(i);
        auto gj = gx.row(j);
        for (std::size_t c = 0; c < d; ++c) {
          gi[c] += r[c];
          gj[c] += r[d + c];
        }
      }
    }
  });
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
  Tape& t = tape_of(x);
  const Tensor2& v = x.value();
  if (rows * cols != v.size()) {
    throw ShapeError("reshape: cannot view " + std::to_string(v.size()) + " values as " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  return t.record(Tensor2(rows, cols, v.storage()), {x.id}, [x = x.id](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    Tensor2& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var weighted_sum(Var x, const Tensor2& w) {
  Tape& t = tape_of(x);
  check_shape(x.value().same_shape(w), "weighted_sum", x.value(), w);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * x.value()[i];
  return t.record(Tensor2::scalar(acc), {x.id}, [x = x.id, w](Tape& t, std::size_t self) {
    t.grad_buffer(x) += w * t.grad(self)[0];
  });
}

Var gcn_normalize(Var adjacency) {
  Tape& t = tape_of(adjacency);
  const Tensor2& a = adjacency.value();
  validate_adjacency(a);
  const std::size_t n = a.rows();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 1.0;
    for (double v : a.row(i)) deg += v;
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  Tensor2 out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out(i, j) = (a(i, j) + (i == j ? 1.0 : 0.0)) * inv_sqrt[i] * inv_sqrt[j];
  return t.record(std::move(out), {adjacency.id},
                  [x = adjacency.id, inv_sqrt = std::move(inv_sqrt)](Tape& t, std::size_t self) {
                    const Tensor2& g = t.grad(self);
                    const Tensor2& a = t.value(x);
                    const std::size_t n = a.rows();
                    // d/d r_i through both the row and the column factor.
                    std::vector<double> d_r(n, 0.0);
                    for (std::size_t i = 0; i < n; ++i) {
                      for (std::size_t j = 0; j < n; ++j) {
                        const double at = a(i, j) + (i == j ? 1.0 : 0.0);
                        d_r[i] += g(i, j) * at * inv_sqrt[j];
                        d_r[j] += g(i, j) * at * inv_sqrt[i];
                      }
                    }
                    Tensor2& ga = t.grad_buffer(x);
                    for (std::size_t i = 0; i < n; ++i) {
                      const double d_deg = -0.5 * d_r[i] * inv_sqrt[i] * inv_sqrt[i] * inv_sqrt[i];
                      for (std::size_t j = 0; j < n; ++j)
                        ga(i, j) += g(i, j) * inv_sqrt[i] * inv_sqrt[j] + d_deg;
                    }
                  });
}

Var activate(Var x, Activation act) {
  switch (act) {
    case Activation::kSelu:
      return selu(x);
    case Activation::kIdentity:
      return x;
  }
  return x;
}

Var gcn_layer(Var adjacency, Var x, Var weight, Activation act) {
  if (adjacency.rows() != x.rows()) {
    throw ShapeError("gcn_layer: adjacency has " + std::to_string(adjacency.rows()) +
                     " rows but features have " + std::to_string(x.rows()));
  }
  check_shape(x.cols() == weight.rows(), "gcn_layer", x.value(), weight.value());
  return activate(matmul(gcn_normalize(adjacency), matmul(x, weight)), act);
}

NormalizedAdjacency gcn_normalize(const SparseMatrix& adjacency) {
  if (!adjacency.is_square()) throw ShapeError("gcn adjacency must be square");
  if (adjacency.nonzeros() > 0 && adjacency.min_value() < 0.0)
    throw InvalidArgument("gcn adjacency has a negative entry");
  const std::size_t n = adjacency.rows();
  std::vector<double> deg = adjacency.row_sums();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(deg[i] + 1.0);
  std::vector<Triplet> t;
  t.reserve(adjacency.nonzeros() + n);
  for (std::size_t i = 0; i < n; ++i) {
    auto cols = adjacency.row_cols(i);
    auto vals = adjacency.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k)
      t.push_back({i, cols[k], vals[k] * inv_sqrt[i] * inv_sqrt[cols[k]]});
    t.push_back({i, i, inv_sqrt[i] * inv_sqrt[i]});
  }
  return {SparseMatrix::from_triplets(n, n, std::move(t))};
}

Var gcn_layer(const NormalizedAdjacency& adjacency, Var x, Var weight, Activation act) {
  if (adjacency.matrix.cols() != x.rows()) {
    throw ShapeError("gcn_layer: adjacency has " + std::to_string(adjacency.matrix.cols()) +
                     " columns but features have " + std::to_string(x.rows()) + " rows");
  }
  check_shape(x.cols() == weight.rows(), "gcn_layer", x.value(), weight.value());
  return activate(spmm(adjacency.matrix, matmul(x, weight)), act);
}

Tensor2 selu(const Tensor2& x) {
  Tensor2 out = x;
  for (double& v : out.values()) v = selu_scalar(v);
  return out;
}

Tensor2 softmax_rows(const Tensor2& x) {
  Tensor2 out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    if (r.empty()) continue;
    const double m = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double& v : r) {
      v = std::exp(v - m);
      sum += v;
    }
    for (double& v : r) v /= sum;
  }
  return out;
}

Tensor2 gcn_normalize(const Tensor2& adjacency) {
  Tape t;
  return gcn_normalize(t.constant(adjacency)).value();
}

Tensor2 gcn_layer(const Tensor2& adjacency, const Tensor2& x, const Tensor2& weight,
                  Activation act) {
  Tape t;
  return gcn_layer(t.constant(adjacency), t.constant(x), t.constant(weight), act).value();
}

double cross_entropy(const Tensor2& probs, std::span<const std::size_t> labels) {
  if (labels.size() != probs.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(probs.rows()) + " rows");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    if (labels[i] >= probs.cols()) {
      throw InvalidArgument("cross_entropy: label " + std::to_string(labels[i]) +
                            " out of range for " + std::to_string(probs.cols()) + " classes");
    }
    loss -= std::log(std::max(probs(i, labels[i]), std::numeric_limits<double>::min()));
  }
  return loss / static_cast<double>(probs.rows());
}

}  // namespace dsg
