#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dsg/matcher.hpp"
#include "dsg/tensor.hpp"

namespace dsg {

struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  friend bool operator==(const Grid&, const Grid&) = default;
};

/// A window of w frames with n patch features of dimension d each.
struct FeatureClip {
  std::size_t window = 0;
  std::size_t patches = 0;
  std::size_t dim = 0;
  /// (window·patches) x dim, frame-major.
  Tensor2 features;
  std::vector<std::int64_t> frame_ids;
  Grid grid;
  /// Phase of the window's last frame, when known.
  std::optional<std::size_t> phase_label;

  /// Throws InvalidArgument when the fields disagree.
  void validate() const;
  /// patches x dim features of frame t.
  Tensor2 frame(std::size_t t) const;
  /// The last `w` frames as a new clip; the label carries over.
  FeatureClip last_frames(std::size_t w) const;
};

inline std::size_t node_index(std::size_t frame, std::size_t patch, std::size_t patches) {
  return frame * patches + patch;
}
inline std::size_t node_frame(std::size_t node, std::size_t patches) { return node / patches; }
inline std::size_t node_patch(std::size_t node, std::size_t patches) { return node % patches; }

struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 0.0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected patch graph of one frame. Edges are stored once with u < v.
struct FrameGraph {
  std::size_t nodes = 0;
  std::vector<Edge> edges;
  Tensor2 node_features;

  SparseMatrix adjacency() const;
};

/// Eq.-1 style similarity graph: A_ij = f_i·f_j when positive, else 0, with
/// a zero diagonal. With `normalize` the rows are L2-normalized first, so the
/// weights are cosine similarities.
FrameGraph build_adjacency(const Tensor2& features, bool normalize = true);

/// Keeps edges with weight > tau; surviving weights are unchanged.
FrameGraph threshold_graph(const FrameGraph& g, double tau);

struct EncodingOptions {
  bool temporal = false;
  bool spatial = false;
  /// L2 norm of each added encoding vector.
  double scale = 1.0;
};

/// Sinusoidal encoding of `position` over `dim` channels, scaled to unit norm.
std::vector<double> sinusoidal_encoding(double position, std::size_t dim);

/// Node features with additive sinusoidal encodings of the frame index
/// (temporal) and of the patch row/column (spatial; first half of the channels
/// encode the row, second half the column). `base` replaces the clip features
/// when given (e.g. normalized rows).
Tensor2 add_positional_encodings(const FeatureClip& clip, const EncodingOptions& options,
                                 const Tensor2* base = nullptr);



/// Spatio-temporal patch graph of one window. Node ids are frame-major.
struct DynamicGraph {
  std::size_t window = 0;
  std::size_t patches = 0;
  std::size_t dim = 0;
  Tensor2 node_features;
  /// Within-frame edges, u < v.
  std::vector<Edge> spatial_edges;
  /// Edges between frame t (u) and t + 1 (v).
  std::vector<Edge> temporal_edges;

  std::size_t nodes() const { return window * patches; }
  /// Symmetric weighted adjacency with both edge sets merged.
  SparseMatrix combined_adjacency(double spatial_weight = 1.0, double temporal_weight = 1.0) const;
};

struct GraphOptions {
  double tau = 0.9;
  bool normalize = true;
  EncodingOptions encodings;
};

/// Spatial edges from thresholded per-frame similarity graphs; temporal edges
/// from `matches` keyed by the earlier frame index of each consecutive pair.
DynamicGraph build_dynamic_graph(const FeatureClip& clip, const GraphOptions& options,
                                 const ClipMatches& matches);

std::string graph_to_json(const DynamicGraph& g);
/// Graphviz rendering; `clusters` (one id per node) colors the nodes.
std::string graph_to_dot(const DynamicGraph& g,
                         const std::vector<std::size_t>* clusters = nullptr);

}  // namespace dsg
