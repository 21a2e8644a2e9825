#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsg/clustering.hpp"
#include "dsg/graph.hpp"
#include "dsg/matcher.hpp"
#include "dsg/optim.hpp"
#include "dsg/tape.hpp"

namespace dsg {

/// Pairwise relation strengths between pooled clusters:
/// w_ij = sigmoid(MLP([x_i ‖ x_j])), symmetrized as (W + Wᵀ) / 2.
class EdgeWeightHead {
 public:
  EdgeWeightHead(std::size_t feature_dim, std::size_t hidden, Rng& rng,
                 const std::string& prefix = "edge");

  /// K x K weights in (0, 1) from K x d pooled features.
  Var forward(Tape& tape, Var pooled_features);
  std::vector<Parameter*> parameters();

  Parameter& output_bias() { return b2_; }

 private:
  std::size_t feature_dim_;
  Parameter w1_, b1_, w2_, b2_;
};

/// GCN stack over the gated scene graph (A_pool ⊙ W_pool), global sum pooling
/// over the K cluster nodes, then a dense layer to phase logits.
class PhaseClassifier {
 public:
  PhaseClassifier(std::size_t feature_dim, const std::vector<std::size_t>& hidden,
                  std::size_t phases, Rng& rng, const std::string& prefix = "classifier");

  /// 1 x P logits.
  Var forward(Tape& tape, Var adjacency, Var edge_weights, Var pooled_features);
  std::vector<Parameter*> parameters();
  std::size_t phases() const { return phases_; }

 private:
  std::size_t phases_;
  std::vector<Parameter> gcn_weights_;
  Parameter out_weight_, out_bias_;
};

struct ModelConfig {
  std::size_t input_dim = 0;
  std::size_t phases = 2;
  ClusteringHeadConfig clustering;
  std::size_t edge_hidden = 32;
  std::vector<std::size_t> classifier_hidden{32};
  /// Divide X_pool by the node count before the edge head and classifier, so
  /// their inputs do not grow with window size.
  bool scale_pooled_features = true;
};

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  ClusteringHead& clustering() { return clustering_; }
  EdgeWeightHead& edges() { return edges_; }
  PhaseClassifier& classifier() { return classifier_; }
  const ModelConfig& config() const { return config_; }

  /// Clustering, edge and classifier parameters, in that order.
  std::vector<Parameter*> parameters();
  std::vector<Parameter*> downstream_parameters();

 private:
  ModelConfig config_;
  ClusteringHead clustering_;
  EdgeWeightHead edges_;
  PhaseClassifier classifier_;
};

/// Options that turn a FeatureClip into the constant inputs of the model.
struct PrepareOptions {
  /// Use only the last `window_size` frames; 0 keeps the whole clip.
  std::size_t window_size = 0;
  GraphOptions graph;
  double match_min_confidence = 0.7;
  double spatial_weight = 1.0;
  double temporal_weight = 1.0;
};

struct PreparedClip {
  PreparedGraph graph;
  std::optional<std::size_t> label;
  std::pair<std::int64_t, std::int64_t> frame_span{0, 0};
  Grid grid;
};

/// Builds the dynamic graph of a clip. Temporal edges come from `matches`
/// when given, otherwise from the mutual-NN matcher.
PreparedClip prepare_clip(const FeatureClip& clip, const PrepareOptions& options,
                          const ClipMatches* matches = nullptr);

struct ModelForward {
  Var assignment;
  Var pooled_features;
  Var pooled_adjacency;
  Var edge_weights;
  Var logits;
};

ModelForward forward(Model& model, Tape& tape, const PreparedGraph& graph);

struct ObjectiveConfig {
  ClusteringObjective objective = ClusteringObjective::kDmon;
  /// Collapse (DMON) or orthogonality (MinCut) weight inside L_u.
  double regularization_weight = 1.0;
  double unsupervised_weight = 1.0;
  double supervised_weight = 1.0;
};

struct JointLossReport {
  double unsupervised = 0.0;  // L_u
  double supervised = 0.0;    // L_CE
  double joint = 0.0;         // L_joint
  ClusteringLoss terms;
};

struct JointLoss {
  Var total;
  JointLossReport report;
  ModelForward forward;
};

/// L_joint = a·L_u + b·L_CE on the tape. Throws InvalidArgument when the clip
/// is unlabeled or the label is out of range.
JointLoss joint_loss(Model& model, Tape& tape, const PreparedClip& clip,
                     const ObjectiveConfig& objective = {});

struct PhasePrediction {
  Tensor2 logits;
  Tensor2 probs;
  std::size_t predicted = 0;
};

struct Inference {
  ClusterAssignment assignment;
  PooledSceneGraph scene_graph;
  PhasePrediction phase;
};

/// Full forward pass without gradients. The scene graph's edge_weights hold
/// the learned W_pool.
Inference infer(Model& model, const PreparedClip& clip);

/// Learned W_pool for a pooled scene graph; also written into sg.edge_weights.
Tensor2 predict_edge_weights(Model& model, PooledSceneGraph& sg, std::size_t nodes);
PhasePrediction classify_phase(Model& model, const PooledSceneGraph& sg, std::size_t nodes);

struct TrainConfig {
  PrepareOptions prepare;
  ModelConfig model;
  ObjectiveConfig objective;
  std::size_t epochs = 100;
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  /// Exclude the clustering head from the optimizer.
  bool freeze_clustering = false;
  /// Worker threads for a batch; 0 picks the hardware count. DSG_DETERMINISTIC=1
  /// forces one.
  std::size_t threads = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double unsupervised = 0.0;
  double supervised = 0.0;
  double joint = 0.0;
  double val_accuracy = 0.0;
  double val_f1 = 0.0;
};

struct TrainOutputs {
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> history_csv;
  /// Called after each epoch.
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  /// 1-based epoch whose parameters were kept; 0 when training ran no epoch.
  std::size_t best_epoch = 0;
  double best_val_f1 = -1.0;
};

/// True when DSG_DETERMINISTIC=1 is set in the environment.
bool deterministic_mode();

/// Mini-batch Adam on L_joint. The model ends holding the parameters of the
/// epoch with the best validation macro-F1 (the last epoch when `val` is empty).
TrainResult train(Model& model, std::span<const PreparedClip> train_set,
                  std::span<const PreparedClip> val_set, const TrainConfig& config,
                  const TrainOutputs& outputs = {});

struct PhaseEvaluation {
  std::vector<std::size_t> predictions;
  std::vector<std::size_t> labels;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

PhaseEvaluation evaluate_phases(Model& model, std::span<const PreparedClip> clips,
                                std::size_t threads = 1);

std::string history_to_csv(std::span<const EpochRecord> history);

}  // namespace dsg
