#include <gtest/gtest.h>

#include <cmath>

#include "dsg/clustering.hpp"
#include "dsg/error.hpp"
#include "dsg/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace dsg {
namespace {

DynamicGraph graph_from_dense(const Tensor2& a, const Tensor2& features) {
  DynamicGraph g;
  g.window = 1;
  g.patches = a.rows();
  g.dim = features.cols();
  g.node_features = features;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (a(i, j) != 0.0) g.spatial_edges.push_back({i, j, a(i, j)});
  return g;
}

Tensor2 two_triangles() {
  Tensor2 a(6, 6);
  for (auto [i, j] : {std::pair{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}}) a(i, j) = a(j, i) = 1;
  return a;
}

TEST(DmonLoss, TwoTrianglesAnchors) {
  const SparseMatrix a = SparseMatrix::from_dense(two_triangles());
  const std::vector<std::size_t> ideal{0, 0, 0, 1, 1, 1};
  ClusteringLoss l = dmon_loss(one_hot_assignment(ideal, 2), a);
  EXPECT_NEAR(l.modularity_term, -0.5, 1e-10);

  ClusterAssignment uniform{Tensor2(6, 2, 0.5)};
  EXPECT_NEAR(dmon_loss(uniform, a).collapse_term, 0.0, 1e-10);

  for (std::size_t k : {2u, 3u, 5u}) {
    ClusterAssignment one{Tensor2(6, k)};
    for (std::size_t i = 0; i < 6; ++i) one.matrix(i, 0) = 1.0;
    EXPECT_NEAR(dmon_loss(one, a).collapse_term, std::sqrt(double(k)) - 1.0, 1e-10);
  }
}

TEST(DmonLoss, TotalCombinesTerms) {
  Rng rng(1);
  const SparseMatrix a = SparseMatrix::from_dense(testing::random_graph(7, 0.5, rng));
  ClusterAssignment c{testing::row_stochastic(7, 3, rng)};
  ClusteringLoss l = dmon_loss(c, a, 0.3);
  EXPECT_DOUBLE_EQ(l.total, l.modularity_term + 0.3 * l.collapse_term);
}

TEST(DmonLoss, EdgelessGraphIsAnError) {
  ClusterAssignment c{Tensor2(3, 2, 0.5)};
  EXPECT_THROW(dmon_loss(c, SparseMatrix::from_dense(Tensor2(3, 3))), NumericError);
  EXPECT_THROW(mincut_loss(c, SparseMatrix::from_dense(Tensor2(3, 3))), NumericError);
}

// Oracle: modularity term equals -Q for every hard partition into <= 3 parts.
TEST(DmonLoss, ModularityMatchesBruteForceExhaustively) {
  Rng rng(2);
  for (int draw = 0; draw < 15; ++draw) {
    const std::size_t n = 2 + rng.index(5);
    Tensor2 dense = testing::random_graph(n, rng.uniform(0.2, 0.9), rng, draw % 2 == 0);
    if (SparseMatrix::from_dense(dense).total() == 0.0) dense(0, 1) = dense(1, 0) = 1.0;
    const SparseMatrix a = SparseMatrix::from_dense(dense);
    std::vector<std::size_t> labels(n, 0);
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t c = code;
      for (std::size_t i = 0; i < n; ++i, c /= 3) labels[i] = c % 3;
      const double got = dmon_loss(one_hot_assignment(labels, 3), a).modularity_term;
      ASSERT_NEAR(got, -oracle::modularity(dense, labels), 1e-10);
    }
  }
}

// Properties: relabeling clusters leaves the collapse term alone; relabeling
// nodes leaves both losses alone.
TEST(ClusteringLoss, PermutationInvariance) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng.index(8), k = 2 + rng.index(3);
    Tensor2 dense = testing::random_graph(n, 0.6, rng);
    dense(0, 1) = dense(1, 0) = 0.5;
    Tensor2 c = testing::row_stochastic(n, k, rng);
    const SparseMatrix a = SparseMatrix::from_dense(dense);

    auto col_perm = testing::random_permutation(k, rng);
    Tensor2 c_cols(n, k);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j) c_cols(i, j) = c(i, col_perm[j]);
    EXPECT_NEAR(dmon_loss({c}, a).collapse_term, dmon_loss({c_cols}, a).collapse_term, 1e-12);

    auto perm = testing::random_permutation(n, rng);
    const SparseMatrix pa = SparseMatrix::from_dense(testing::permute_square(dense, perm));
    const ClusterAssignment pc{testing::permute_rows(c, perm)};
    EXPECT_NEAR(dmon_loss({c}, a).total, dmon_loss(pc, pa).total, 1e-8);
    EXPECT_NEAR(mincut_loss({c}, a).total, mincut_loss(pc, pa).total, 1e-8);
  }
}

TEST(MincutLoss, TwoTrianglesIdealCut) {
  const SparseMatrix a = SparseMatrix::from_dense(two_triangles());
  const std::vector<std::size_t> ideal{0, 0, 0, 1, 1, 1};
  ClusteringLoss l = mincut_loss(one_hot_assignment(ideal, 2), a);
  EXPECT_NEAR(l.cut_term, -1.0, 1e-10);
  // balanced hard clusters: CᵀC ∝ I, so the orthogonality term vanishes
  EXPECT_NEAR(l.ortho_term, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(l.total, l.cut_term + l.ortho_term);
}

TEST(MincutLoss, UniformAssignmentMaximizesOrtho) {
  const SparseMatrix a = SparseMatrix::from_dense(two_triangles());
  const std::size_t k = 3;
  const double uniform = mincut_loss({Tensor2(6, k, 1.0 / k)}, a).ortho_term;
  EXPECT_NEAR(uniform, std::sqrt(2.0 - 2.0 / std::sqrt(double(k))), 1e-12);
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial)
    EXPECT_LE(mincut_loss({testing::row_stochastic(6, k, rng)}, a).ortho_term, uniform + 1e-12);
}

TEST(AssignClusters, RowStochasticAndShapeChecks) {
  Rng rng(5);
  Tensor2 x = testing::random_tensor(2, 4, rng);
  ClusteringHead head(4, {.clusters = 2}, rng);
  ClusterAssignment edgeless = assign_clusters(head, graph_from_dense(Tensor2(2, 2), x));
  EXPECT_NO_THROW(edgeless.validate());
  EXPECT_NEAR(edgeless.matrix(0, 0) + edgeless.matrix(0, 1), 1.0, 1e-12);

  ClusteringHead big(4, {.clusters = 5}, rng);
  Tensor2 x3 = testing::random_tensor(3, 4, rng);
  EXPECT_THROW(assign_clusters(big, graph_from_dense(testing::random_graph(3, 1.0, rng), x3)),
               InvalidArgument);
  EXPECT_THROW(ClusteringHead(4, {.clusters = 1}, rng), ConfigError);
}

TEST(AssignClusters, MirroredComponentsGetIdenticalRows) {
  Rng rng(6);
  Tensor2 block = testing::random_graph(3, 1.0, rng);
  Tensor2 a(6, 6);
  Tensor2 x(6, 5);
  Tensor2 xb = testing::random_tensor(3, 5, rng);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) a(i, j) = a(i + 3, j + 3) = block(i, j);
    for (std::size_t j = 0; j < 5; ++j) x(i, j) = x(i + 3, j) = xb(i, j);
  }
  ClusteringHead head(5, {.clusters = 3}, rng);
  ClusterAssignment c = assign_clusters(head, graph_from_dense(a, x));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(c.matrix(i, k), c.matrix(i + 3, k));
}

TEST(AssignmentValidate, RejectsBadRows) {
  EXPECT_THROW((ClusterAssignment{Tensor2(1, 2, {0.6, 0.6})}).validate(), InvalidArgument);
  EXPECT_THROW((ClusterAssignment{Tensor2(1, 2, {1.5, -0.5})}).validate(), InvalidArgument);
  EXPECT_NO_THROW((ClusterAssignment{Tensor2(1, 2, {0.25, 0.75})}).validate());
}

TEST(PoolGraph, IdentityPoolingAndMerging) {
  Rng rng(7);
  Tensor2 a = testing::random_graph(4, 0.7, rng);
  Tensor2 x = testing::random_tensor(4, 3, rng);
  DynamicGraph g = graph_from_dense(a, x);
  PooledSceneGraph sg = pool_graph({Tensor2::identity(4)}, g);
  EXPECT_EQ(sg.features, x);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(sg.adjacency(i, j), a(i, j), 1e-15);
  for (double w : sg.edge_weights.values()) {
    EXPECT_GE(w, 0.0);
    EXPECT_LE(w, 1.0);
  }

  Tensor2 twins(3, 2, {1, 2, 1, 2, 5, 7});
  const std::vector<std::size_t> merge{0, 0, 1};
  PooledSceneGraph merged =
      pool_graph(one_hot_assignment(merge, 2), graph_from_dense(testing::random_graph(3, 1.0, rng), twins));
  EXPECT_EQ(merged.features(0, 0), 2.0);
  EXPECT_EQ(merged.features(0, 1), 4.0);
}

TEST(PoolGraph, PlantedBlocksHaveNoCrossWeight) {
  Tensor2 a = two_triangles();
  Rng rng(8);
  const std::vector<std::size_t> ideal{0, 0, 0, 1, 1, 1};
  PooledSceneGraph sg =
      pool_graph(one_hot_assignment(ideal, 2), graph_from_dense(a, testing::random_tensor(6, 2, rng)));
  EXPECT_NEAR(sg.adjacency(0, 1), 0.0, 1e-12);
  EXPECT_EQ(sg.adjacency(0, 0), 0.0);
}

// Properties: column sums of X are preserved, A_pool is symmetric and
// nonnegative with a zero diagonal.
TEST(PoolGraph, MassPreservationAndSymmetry) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.index(9), k = 1 + rng.index(4), d = 1 + rng.index(5);
    Tensor2 a = testing::random_graph(n, 0.5, rng);
    Tensor2 x = testing::random_tensor(n, d, rng, -3, 3);
    PooledSceneGraph sg = pool_graph({testing::row_stochastic(n, k, rng)}, graph_from_dense(a, x));
    Tensor2 before = column_sums(x), after = column_sums(sg.features);
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(before[j], after[j], 1e-5);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_EQ(sg.adjacency(i, i), 0.0);
      for (std::size_t j = 0; j < k; ++j) {
        EXPECT_GE(sg.adjacency(i, j), 0.0);
        EXPECT_NEAR(sg.adjacency(i, j), sg.adjacency(j, i), 1e-12);
      }
    }
  }
}

TEST(OptimizeClustering, RecoversPlantedBlocks) {
  // Two 5-cliques joined by one weak edge, features hinting at the blocks.
  Tensor2 a(10, 10);
  Rng rng(10);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j)
      if (i != j && (i < 5) == (j < 5)) a(i, j) = 1.0;
  a(4, 5) = a(5, 4) = 0.1;
  Tensor2 x(10, 4);
  for (std::size_t i = 0; i < 10; ++i) {
    x(i, i < 5 ? 0 : 1) = 1.0;
    for (std::size_t j = 2; j < 4; ++j) x(i, j) = rng.uniform(-0.1, 0.1);
  }
  PreparedGraph g = PreparedGraph::from(graph_from_dense(a, x));
  ClusterAssignment c = optimize_clustering(g, {.head = {.clusters = 2}, .seed = 3});
  std::vector<std::size_t> truth(10);
  for (std::size_t i = 0; i < 10; ++i) truth[i] = i < 5 ? 0 : 1;
  EXPECT_DOUBLE_EQ(normalized_mutual_information(c.hard_labels(), truth), 1.0);
}

TEST(SceneGraphExport, JsonAndDot) {
  PooledSceneGraph sg;
  sg.features = Tensor2(2, 2, {1, 2, 3, 4});
  sg.adjacency = Tensor2(2, 2, {0, 1, 1, 0});
  sg.edge_weights = Tensor2(2, 2, {0, 0.5, 0.5, 0});
  sg.cluster_labels = {0, 1};
  sg.frame_span = {3, 7};
  const std::string j = scene_graph_to_json(sg);
  EXPECT_NE(j.find("\"K\":2"), std::string::npos) << j;
  EXPECT_EQ(j.find("\"values\""), std::string::npos);
  EXPECT_NE(scene_graph_to_json(sg, true).find("\"values\""), std::string::npos);
  EXPECT_NE(scene_graph_to_dot(sg).find("penwidth"), std::string::npos);
}

}  // namespace
}  // namespace dsg
