#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dsg/clustering.hpp"
#include "dsg/metrics.hpp"

namespace dsg {

/// Patch features of one annotated frame and its patch-resolution mask.
struct AnnotatedFrame {
  Tensor2 features;
  std::vector<std::int64_t> mask;
};

struct PrototypeBank {
  std::size_t dim = 0;
  /// Unit-norm class means, keyed by class index.
  std::map<std::size_t, std::vector<double>> prototypes;
  std::map<std::size_t, std::size_t> support_counts;
  /// Requested classes that had no support patch.
  std::vector<std::size_t> excluded;
};

/// Mean of each class's member patches, L2-normalized. Members are summed in
/// lexicographic order so the result does not depend on patch order. With
/// `normalize_patches` every patch is L2-normalized before averaging, matching
/// the node features of a normalized graph. Classes in [0, num_classes) with
/// no support are listed in `excluded`; negative mask entries are void.
PrototypeBank build_prototypes(std::span<const AnnotatedFrame> frames, std::size_t num_classes,
                               bool normalize_patches = true);

struct ClusterLabels {
  std::vector<std::size_t> labels;
  /// Cosine similarity of each cluster with its chosen prototype.
  std::vector<double> scores;
};

/// Cluster -> class by argmax cosine between X_pool rows and the prototypes.
/// Ties go to the lowest class index.
ClusterLabels label_clusters(const PooledSceneGraph& sg, const ClusterAssignment& c,
                             const PrototypeBank& bank);

/// One map per frame: each patch takes the label of its argmax cluster
/// (lowest cluster index on ties).
std::vector<SegmentationMap> render_segmentation(const ClusterAssignment& c,
                                                 std::span<const std::size_t> cluster_labels,
                                                 const Grid& grid,
                                                 std::span<const std::int64_t> frame_ids = {});

// Annotation file: a JSON array (or a single object) of
//   {"frame_id": 12, "grid": [rows, cols], "mask": [class per patch], "clip": "optional id"}
struct Annotation {
  SegmentationMap map;
  std::string clip;
};
std::vector<Annotation> parse_annotations(const std::string& text,
                                          const std::string& source = "<memory>");
std::vector<Annotation> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path, std::span<const Annotation> annotations);
void save_segmentation(const std::filesystem::path& path, std::span<const SegmentationMap> maps);

/// Plain PGM (P2) with class c drawn at gray level c·255/(num_classes-1);
/// void patches are 0.
std::string segmentation_to_pgm(const SegmentationMap& map, std::size_t num_classes);

std::string prototypes_to_json(const PrototypeBank& bank);

}  // namespace dsg
