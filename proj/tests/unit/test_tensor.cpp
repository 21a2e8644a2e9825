#include <gtest/gtest.h>

#include "dsg/error.hpp"
#include "dsg/tensor.hpp"
#include "support.hpp"

namespace dsg {
namespace {

TEST(Tensor, MatmulByHand) {
  Tensor2 a(2, 3, {1, 2, 3, 4, 5, 6});
  Tensor2 b(3, 2, {7, 8, 9, 10, 11, 12});
  Tensor2 c = matmul(a, b);
  EXPECT_EQ(c, Tensor2(2, 2, {58, 64, 139, 154}));
}

TEST(Tensor, TransposedProductsAgreeWithExplicitTranspose) {
  Rng rng(3);
  Tensor2 a = testing::random_tensor(4, 3, rng);
  Tensor2 b = testing::random_tensor(4, 5, rng);
  Tensor2 c = testing::random_tensor(6, 3, rng);
  Tensor2 tn = matmul_tn(a, b);
  Tensor2 ref = matmul(transpose(a), b);
  for (std::size_t i = 0; i < tn.size(); ++i) EXPECT_NEAR(tn[i], ref[i], 1e-12);
  Tensor2 nt = matmul_nt(a, c);
  Tensor2 ref2 = matmul(a, transpose(c));
  for (std::size_t i = 0; i < nt.size(); ++i) EXPECT_NEAR(nt[i], ref2[i], 1e-12);
}

TEST(Tensor, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Tensor2(2, 3), Tensor2(2, 3)), ShapeError);
  EXPECT_THROW(Tensor2(2, 2) + Tensor2(2, 3), ShapeError);
  EXPECT_THROW(Tensor2(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Tensor, NormalizeRowsLeavesZeroRows) {
  Tensor2 a(2, 2, {3, 4, 0, 0});
  Tensor2 n = normalize_rows(a);
  EXPECT_DOUBLE_EQ(n(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(n(0, 1), 0.8);
  EXPECT_EQ(n(1, 0), 0.0);
  EXPECT_EQ(n(1, 1), 0.0);
}

TEST(Tensor, ArgmaxTiesGoLow) {
  Tensor2 a(2, 3, {1, 3, 3, 0.5, 0.5, 0.5});
  EXPECT_EQ(argmax_rows(a), (std::vector<std::size_t>{1, 0}));
}

TEST(Tensor, SumsAndNorms) {
  Tensor2 a(2, 2, {1, -2, 3, 4});
  EXPECT_EQ(column_sums(a), Tensor2(1, 2, {4, 2}));
  EXPECT_EQ(row_sums(a), (std::vector<double>{-1, 7}));
  EXPECT_DOUBLE_EQ(frobenius_norm(a), std::sqrt(30.0));
  EXPECT_DOUBLE_EQ(max_abs(a), 4.0);
}

TEST(SparseMatrix, DuplicatesAreSummed) {
  SparseMatrix s = SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {0, 1, 2.0}, {1, 0, 4.0}});
  EXPECT_EQ(s.nonzeros(), 2u);
  EXPECT_EQ(s.to_dense(), Tensor2(2, 2, {0, 3, 4, 0}));
  EXPECT_DOUBLE_EQ(s.total(), 7.0);
  EXPECT_EQ(s.row_sums(), (std::vector<double>{3, 4}));
}

TEST(SparseMatrix, OutOfRangeTripletThrows) {
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), ShapeError);
}

// Property: sparse products equal the dense products on random matrices.
TEST(SparseMatrix, ProductsMatchDense) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(8), k = 1 + rng.index(5);
    Tensor2 dense = testing::random_graph(n, 0.4, rng);
    SparseMatrix s = SparseMatrix::from_dense(dense);
    Tensor2 x = testing::random_tensor(n, k, rng);
    Tensor2 p = s.multiply(x), ref = matmul(dense, x);
    Tensor2 pt = s.transpose_multiply(x), reft = matmul_tn(dense, x);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_NEAR(p[i], ref[i], 1e-12);
      EXPECT_NEAR(pt[i], reft[i], 1e-12);
    }
    EXPECT_EQ(s.to_dense(), dense);
  }
}

TEST(Tensor, AllFinite) {
  Tensor2 a(1, 2, {1.0, 2.0});
  EXPECT_TRUE(a.all_finite());
  a(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(a.all_finite());
}

}  // namespace
}  // namespace dsg
