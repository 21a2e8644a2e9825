#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dsg/graph.hpp"
#include "dsg/matcher.hpp"
#include "dsg/metrics.hpp"

namespace dsg {

// DSGF feature blob: "DSGF", u16 version, u32 w, u32 n, u32 d (little-endian),
// then w·n·d little-endian f32 values, frame-major and patch-minor.

struct FeatureBlob {
  std::size_t window = 0;
  std::size_t patches = 0;
  std::size_t dim = 0;
  /// (window·patches) x dim.
  Tensor2 features;
};

void write_feature_blob(const std::filesystem::path& path, const FeatureBlob& blob);
/// Throws FormatError naming `path` on a bad header, truncation or trailing bytes.
FeatureBlob read_feature_blob(const std::filesystem::path& path);

struct DatasetEntry {
  std::string id;
  /// "train", "val" or "test".
  std::string split = "train";
  FeatureClip clip;
  std::optional<ClipMatches> matches;
  /// Ground-truth patch masks, one per frame, when available.
  std::vector<SegmentationMap> masks;
};

/// Manifest (JSON) next to the blobs:
///   {"window": w, "patches": n, "dim": d, "grid": [rows, cols], "phases": P,
///    "classes": C,
///    "clips": [{"id": ..., "blob": "relative/path.dsgf", "split": "train",
///               "label": 0, "frame_ids": [...], "matches": "m.jsonl",
///               "masks": "masks.json"}, ...]}
/// "classes", "label", "frame_ids", "matches" and "masks" are optional.
struct ClipDataset {
  std::size_t window = 0;
  std::size_t patches = 0;
  std::size_t dim = 0;
  Grid grid;
  std::size_t phases = 0;
  /// Segmentation class count; 0 when the dataset has no masks.
  std::size_t classes = 0;
  std::vector<DatasetEntry> entries;

  std::vector<const DatasetEntry*> split(const std::string& name) const;
};

/// Accepts a manifest path or a directory holding manifest.json. Every
/// failure names the manifest record or blob involved.
ClipDataset load_dataset(const std::filesystem::path& path);
/// Writes manifest.json, one blob per clip and any matches or masks into `dir`.
void save_dataset(const ClipDataset& dataset, const std::filesystem::path& dir);

}  // namespace dsg
