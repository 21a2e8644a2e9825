#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsg/graph.hpp"
#include "dsg/ops.hpp"
#include "dsg/optim.hpp"
#include "dsg/tape.hpp"

namespace dsg {

enum class ClusteringObjective { kDmon, kMinCut };

std::string to_string(ClusteringObjective objective);
ClusteringObjective parse_objective(const std::string& text);

/// Row-stochastic soft assignment of N nodes to K clusters.
struct ClusterAssignment {
  Tensor2 matrix;

  std::size_t nodes() const { return matrix.rows(); }
  std::size_t clusters() const { return matrix.cols(); }
  /// Throws InvalidArgument unless entries are in [0, 1] and rows sum to 1 ± tol.
  void validate(double tolerance = 1e-6) const;
  /// Argmax cluster per node, lowest index on ties.
  std::vector<std::size_t> hard_labels() const { return argmax_rows(matrix); }
};

/// One-hot assignment from hard labels.
ClusterAssignment one_hot_assignment(std::span<const std::size_t> labels, std::size_t clusters);

struct ClusteringLoss {
  ClusteringObjective objective = ClusteringObjective::kDmon;
  // DMON
  double modularity_term = 0.0;
  double collapse_term = 0.0;
  // MinCutPool
  double cut_term = 0.0;
  double ortho_term = 0.0;
  double total = 0.0;
};

struct ClusteringLossVar {
  Var total;
  ClusteringLoss terms;
};

/// DMON objective on the tape:
///   modularity = -Tr(Cᵀ B C) / 2m,  B = A - d dᵀ / 2m
///   collapse   = √K / N · ‖Σ_i C_i‖₂ - 1
///   total      = modularity + collapse_weight · collapse
/// Throws NumericError when the graph has no edge weight.
ClusteringLossVar dmon_loss(Var assignment, const SparseMatrix& adjacency,
                            double collapse_weight = 1.0);

/// MinCutPool objective on the tape:
///   cut   = -Tr(CᵀAC) / Tr(CᵀDC)
///   ortho = ‖CᵀC / ‖CᵀC‖_F - I / √K‖_F
///   total = cut + ortho_weight · ortho
ClusteringLossVar mincut_loss(Var assignment, const SparseMatrix& adjacency,
                              double ortho_weight = 1.0);

ClusteringLoss dmon_loss(const ClusterAssignment& c, const SparseMatrix& adjacency,
                         double collapse_weight = 1.0);
ClusteringLoss mincut_loss(const ClusterAssignment& c, const SparseMatrix& adjacency,
                           double ortho_weight = 1.0);
ClusteringLoss dmon_loss(const ClusterAssignment& c, const DynamicGraph& g,
                         double collapse_weight = 1.0);
ClusteringLoss mincut_loss(const ClusterAssignment& c, const DynamicGraph& g,
                           double ortho_weight = 1.0);

/// Per-graph constants the clustering head consumes, computed once.
struct PreparedGraph {
  std::size_t window = 0;
  std::size_t patches = 0;
  SparseMatrix adjacency;
  NormalizedAdjacency normalized;
  Tensor2 features;

  static PreparedGraph from(const DynamicGraph& g, double spatial_weight = 1.0,
                            double temporal_weight = 1.0);
  std::size_t nodes() const { return features.rows(); }
};

struct ClusteringHeadConfig {
  std::size_t clusters = 16;
  /// Output widths of the SeLU GCN layers.
  std::vector<std::size_t> gcn_hidden{32};
};

/// GCN stack (SeLU) -> dense -> row softmax.
class ClusteringHead {
 public:
  ClusteringHead(std::size_t input_dim, const ClusteringHeadConfig& config, Rng& rng,
                 const std::string& prefix = "cluster");

  /// Soft assignment C on the tape.
  Var forward(Tape& tape, const PreparedGraph& graph, Var features);
  Var forward(Tape& tape, const PreparedGraph& graph);

  std::vector<Parameter*> parameters();
  std::size_t clusters() const { return config_.clusters; }
  std::size_t input_dim() const { return input_dim_; }
  const ClusteringHeadConfig& config() const { return config_; }

 private:
  std::size_t input_dim_;
  ClusteringHeadConfig config_;
  std::vector<Parameter> gcn_weights_;
  Parameter out_weight_;
  Parameter out_bias_;
};

/// Inference: C = softmax(MLP(GCN-stack(Â, X))). Throws when K > w·n.
ClusterAssignment assign_clusters(ClusteringHead& head, const PreparedGraph& graph);
ClusterAssignment assign_clusters(ClusteringHead& head, const DynamicGraph& g);

/// Pooled dynamic scene graph of one window.
struct PooledSceneGraph {
  /// K x d, CᵀX.
  Tensor2 features;
  /// K x K, CᵀAC with a zero diagonal.
  Tensor2 adjacency;
  /// K x K relaxed edge weights in [0, 1].
  Tensor2 edge_weights;
  std::pair<std::int64_t, std::int64_t> frame_span{0, 0};
  std::vector<std::size_t> cluster_labels;

  std::size_t clusters() const { return features.rows(); }
};

/// X_pool = CᵀX, A_pool = CᵀAC (diagonal zeroed), W_pool = A_pool / max(A_pool).
PooledSceneGraph pool_graph(const ClusterAssignment& c, const DynamicGraph& g);
PooledSceneGraph pool_graph(const ClusterAssignment& c, const SparseMatrix& adjacency,
                            const Tensor2& features);

struct PooledVars {
  Var features;
  Var adjacency;
};
PooledVars pool_graph(Var assignment, Var features, const SparseMatrix& adjacency);

std::string scene_graph_to_json(const PooledSceneGraph& sg, bool include_features = false);
/// Edge pen width grows with W_pool.
std::string scene_graph_to_dot(const PooledSceneGraph& sg,
                               const std::vector<std::string>* class_names = nullptr);

struct PerClipClusteringOptions {
  ClusteringHeadConfig head;
  ClusteringObjective objective = ClusteringObjective::kDmon;
  double regularization_weight = 1.0;
  std::size_t steps = 200;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
};

/// Fits a fresh clustering head to one graph using only the unsupervised
/// objective and returns its final assignment.
ClusterAssignment optimize_clustering(const PreparedGraph& graph,
                                      const PerClipClusteringOptions& options);

}  // namespace dsg
