#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dsg/downstream.hpp"
#include "dsg/io.hpp"
#include "dsg/metrics.hpp"
#include "dsg/prototype.hpp"

namespace dsg {

/// Prepared clips of one split, in manifest order. Stored matches are used
/// when an entry has them.
std::vector<PreparedClip> prepare_split(const ClipDataset& dataset, const std::string& split,
                                        const PrepareOptions& options);

/// Builds the model a dataset and training config describe.
ModelConfig model_config_for(const ClipDataset& dataset, const TrainConfig& config);

/// Names clusters from the X_pool rows of the hard-rounded assignment, so each
/// cluster is represented by exactly the patches it paints in the rendered map.
ClusterLabels label_hard_clusters(const ClusterAssignment& c, const PreparedGraph& graph,
                                  const PrototypeBank& bank);

struct ClipSegmentation {
  Inference inference;
  ClusterLabels labels;
  std::vector<SegmentationMap> maps;
};

ClipSegmentation segment_clip(Model& model, const PreparedClip& clip, const PrototypeBank& bank,
                              const std::vector<std::int64_t>& frame_ids = {});

struct EvaluationReport {
  std::size_t clips = 0;
  std::optional<PhaseMetrics> phase;
  /// Hard cluster ids against planted/ground-truth classes, pooled over all
  /// scored nodes of the split.
  std::optional<double> nmi;
  std::optional<SegmentationMetrics> segmentation;

  std::vector<std::pair<std::string, double>> scalars() const;
};

/// Scores a split. Phase metrics need labels, NMI needs masks, segmentation
/// metrics need masks and a prototype bank.
EvaluationReport evaluate_split(Model& model, const ClipDataset& dataset, const std::string& split,
                                const PrepareOptions& options, const PrototypeBank* bank = nullptr,
                                const ClassGroups* groups = nullptr);

}  // namespace dsg
