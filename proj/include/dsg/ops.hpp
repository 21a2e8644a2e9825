#pragma once

#include <cstddef>
#include <span>

#include "dsg/tape.hpp"
#include "dsg/tensor.hpp"

namespace dsg {

inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
inline constexpr double kSeluScale = 1.0507009873554804934193349852946;

enum class Activation { kIdentity, kSelu };

// Differentiable ops. Each records one tape entry whose adjoint is written out
// by hand; shapes are checked eagerly and a ShapeError is thrown on mismatch.

Var matmul(Var a, Var b);
/// aᵀ·b.
Var matmul_tn(Var a, Var b);
/// s·b for a constant sparse s. `s` must outlive the tape's backward pass.
Var spmm(const SparseMatrix& s, Var b);
Var add(Var a, Var b);
Var scale(Var a, double s);
/// x + b with the 1 x cols row b broadcast over rows.
Var add_bias(Var x, Var b);
/// x·W + b.
Var dense(Var x, Var weight, Var bias);
Var selu(Var x);
Var sigmoid(Var x);
/// Row-wise softmax stabilized by row-max subtraction.
Var softmax_rows(Var x);
/// Mean over rows of -log softmax(logits)[label]. Fused so the adjoint is
/// softmax - onehot.
Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels);
Var hadamard(Var a, Var b);
Var zero_diagonal(Var a);
/// (a + aᵀ) / 2.
Var symmetrize(Var a);
/// 1 x cols sum over rows (global sum pooling).
Var sum_rows(Var x);
/// K x d -> K² x 2d with row i·K + j equal to [x_i ‖ x_j].
Var pair_concat(Var x);
Var reshape(Var x, std::size_t rows, std::size_t cols);
/// Σ w ⊙ x as a 1x1 value, for a constant w.
Var weighted_sum(Var x, const Tensor2& w);
/// D̃^{-1/2}(A + I)D̃^{-1/2} with D̃ the row-sum degree matrix of A + I.
/// Throws on non-square or negative input.
Var gcn_normalize(Var adjacency);

Var activate(Var x, Activation act);

/// act(norm(adj)·x·W) with a dense, differentiable adjacency.
Var gcn_layer(Var adjacency, Var x, Var weight, Activation act);

/// Symmetrically normalized constant adjacency, self loops included.
struct NormalizedAdjacency {
  SparseMatrix matrix;
};
NormalizedAdjacency gcn_normalize(const SparseMatrix& adjacency);
/// act(Â·x·W) for a constant, pre-normalized adjacency.
Var gcn_layer(const NormalizedAdjacency& adjacency, Var x, Var weight, Activation act);

// Value-level helpers sharing the op definitions above.
Tensor2 selu(const Tensor2& x);
Tensor2 softmax_rows(const Tensor2& x);
Tensor2 gcn_normalize(const Tensor2& adjacency);
Tensor2 gcn_layer(const Tensor2& adjacency, const Tensor2& x, const Tensor2& weight,
                  Activation act);
/// Mean over rows of -log probs[label].
double cross_entropy(const Tensor2& probs, std::span<const std::size_t> labels);

}  // namespace dsg
