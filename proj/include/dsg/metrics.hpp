#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dsg/graph.hpp"

namespace dsg {

struct PhaseMetrics {
  double accuracy = 0.0;
  /// Mean per-class F1 over classes that occur in the predictions or the
  /// ground truth.
  double macro_f1 = 0.0;
  /// Pooled over all items; equals accuracy for single-label data.
  double micro_f1 = 0.0;
  /// confusion[gt][pred].
  std::vector<std::vector<std::size_t>> confusion;
};

/// Throws InvalidArgument on a length mismatch or empty input.
PhaseMetrics phase_metrics(std::span<const std::size_t> predictions,
                           std::span<const std::size_t> labels);

/// Per-patch class indices of one frame. Negative entries mark void patches,
/// which are skipped when they appear in the ground truth.
struct SegmentationMap {
  std::int64_t frame_id = 0;
  Grid grid;
  std::vector<std::int64_t> labels;
  friend bool operator==(const SegmentationMap&, const SegmentationMap&) = default;
};

enum class ClassGroup { kAnatomy, kInstrument, kMisc };

using ClassGroups = std::map<std::size_t, ClassGroup>;

/// {"<class index>": "anatomy" | "instrument" | "misc", ...}
ClassGroups parse_class_groups(const std::string& json_text);
ClassGroups load_class_groups(const std::filesystem::path& path);

struct SegmentationMetrics {
  double pac = 0.0;
  double miou = 0.0;
  std::optional<double> miou_anatomy;
  std::optional<double> miou_instrument;
  /// IoU per class, empty when the class never occurs in either map set.
  std::vector<std::optional<double>> class_iou;
  std::vector<std::uint64_t> intersection;
  std::vector<std::uint64_t> union_count;
  std::uint64_t scored = 0;
  std::uint64_t correct = 0;
};

/// Dataset-level scores: intersections and unions are pooled over every frame
/// before dividing. Throws ShapeError when the map sets disagree in shape and
/// InvalidArgument for a class index >= num_classes.
SegmentationMetrics segmentation_metrics(std::span<const SegmentationMap> predictions,
                                         std::span<const SegmentationMap> ground_truth,
                                         std::size_t num_classes,
                                         const ClassGroups* groups = nullptr);

/// Normalized mutual information with arithmetic-mean normalization,
/// 2·I(a; b) / (H(a) + H(b)). Two constant labelings score 1.
double normalized_mutual_information(std::span<const std::size_t> a,
                                     std::span<const std::size_t> b);

/// Header line plus one row.
std::string metrics_csv(const std::vector<std::pair<std::string, double>>& values);

}  // namespace dsg
