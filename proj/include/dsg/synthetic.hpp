#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dsg/io.hpp"
#include "dsg/prototype.hpp"

namespace dsg {

enum class PhaseRule {
  /// Phase = bitmask of the foreground classes present (P = 2^(classes-1)).
  kPresentSet,
  /// Phase 1 iff `key_class` is present; other foreground classes are
  /// distractors drawn independently.
  kKeyClass,
  /// Phase 1 iff `key_class` shows up in some frame at least two frames
  /// before the last. Presence follows one of four patterns per clip:
  /// absent, last two frames only, two early frames only, or from an early
  /// frame through the end.
  kTemporalEvent,
};

struct SyntheticSpec {
  /// Class 0 is background and covers every unpainted patch.
  std::size_t n_classes = 3;
  std::size_t feature_dim = 32;
  /// Per-patch appearance noise, per coordinate, relative to the unit
  /// per-coordinate scale of the class means. Drawn once per patch and clip.
  double noise = 0.1;
  /// Fresh per-frame noise as a fraction of `noise`.
  double jitter = 0.3;
  std::size_t window = 4;
  std::size_t clips = 200;
  Grid grid{5, 5};
  PhaseRule rule = PhaseRule::kPresentSet;
  std::size_t key_class = 1;
  /// Cosine between the key class mean and the background mean; 0 keeps all
  /// means orthogonal.
  double key_background_cosine = 0.0;
  /// Side length range of each foreground rectangle; the key class uses its
  /// own range.
  std::size_t min_side = 2, max_side = 3;
  std::size_t key_min_side = 2, key_max_side = 3;
  /// Probability that a foreground class is present in a clip.
  double presence = 0.5;
  /// The last `test_clips` entries go to "test", the `val_clips` before them
  /// to "val".
  std::size_t val_clips = 0;
  std::size_t test_clips = 0;
  /// Store planted identity matches (confidence = clamped cosine).
  bool emit_matches = false;
  std::uint64_t seed = 0;

  std::size_t phases() const;
};

struct SyntheticData {
  ClipDataset dataset;
  /// Unit-scale class means (n_classes x d, rows of norm sqrt(d)).
  Tensor2 class_means;
  /// Up to five annotated frames per class from the training split.
  std::vector<Annotation> annotations;
};

/// Throws InvalidArgument when feature_dim < n_classes or the SyntheticSpec is
/// otherwise unusable.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Features of the annotated frames, resolved against the dataset by clip id
/// (or frame id when the clip is empty).
std::vector<AnnotatedFrame> resolve_annotations(const ClipDataset& dataset,
                                                const std::vector<Annotation>& annotations);

/// Planted node labels of the last `last_frames` frames (0 = all), frame-major.
/// Void patches map to SIZE_MAX.
std::vector<std::size_t> planted_node_labels(const DatasetEntry& entry, std::size_t last_frames);

}  // namespace dsg
