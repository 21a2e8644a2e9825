#include "dsg/graph.hpp"

#include <cmath>
#include <sstream>

#include "dsg/error.hpp"
#include "json.hpp"

namespace dsg {

void FeatureClip::validate() const {
  if (window < 1) throw InvalidArgument("clip: window must be >= 1");
  if (grid.size() != patches) {
    throw InvalidArgument("clip: grid " + std::to_string(grid.rows) + "x" +
                          std::to_string(grid.cols) + " does not hold " + std::to_string(patches) +
                          " patches");
  }
  if (features.rows() != window * patches || features.cols() != dim) {
    throw InvalidArgument("clip: features are " + std::to_string(features.rows()) + "x" +
                          std::to_string(features.cols()) + ", expected " +
                          std::to_string(window * patches) + "x" + std::to_string(dim));
  }
  if (!frame_ids.empty() && frame_ids.size() != window)
    throw InvalidArgument("clip: frame_ids length differs from window");
  if (!features.all_finite()) throw NumericError("clip: non-finite feature values");
}

Tensor2 FeatureClip::frame(std::size_t t) const {
  if (t >= window) throw InvalidArgument("clip: frame " + std::to_string(t) + " out of range");
  return slice_rows(features, t * patches, (t + 1) * patches);
}

FeatureClip FeatureClip::last_frames(std::size_t w) const {
  if (w < 1 || w > window)
    throw InvalidArgument("clip: cannot take " + std::to_string(w) + " of " +
                          std::to_string(window) + " frames");
  FeatureClip out = *this;
  out.window = w;
  out.features = slice_rows(features, (window - w) * patches, window * patches);
  if (!frame_ids.empty())
    out.frame_ids.assign(frame_ids.end() - static_cast<std::ptrdiff_t>(w), frame_ids.end());
  return out;
}

SparseMatrix FrameGraph::adjacency() const {
  std::vector<Triplet> t;
  t.reserve(2 * edges.size());
  for (const Edge& e : edges) {
    t.push_back({e.u, e.v, e.weight});
    t.push_back({e.v, e.u, e.weight});
  }
  return SparseMatrix::from_triplets(nodes, nodes, std::move(t));
}

FrameGraph build_adjacency(const Tensor2& features, bool normalize) {
  if (!features.all_finite()) throw NumericError("build_adjacency: non-finite features");
  const Tensor2 f = normalize ? normalize_rows(features) : features;
  const Tensor2 gram = matmul_nt(f, f);
  FrameGraph g;
  g.nodes = features.rows();
  g.node_features = features;
  for (std::size_t i = 0; i < g.nodes; ++i)
    for (std::size_t j = i + 1; j < g.nodes; ++j)
      if (gram(i, j) > 0.0) g.edges.push_back({i, j, gram(i, j)});
  return g;
}

FrameGraph threshold_graph(const FrameGraph& g, double tau) {
  FrameGraph out;
  out.nodes = g.nodes;
  out.node_features = g.node_features;
  for (const Edge& e : g.edges)
    if (e.weight > tau) out.edges.push_back(e);
  return out;
}

std::vector<double> sinusoidal_encoding(double position, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  for (std::size_t i = 0; i < dim; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
    v[i] = std::sin(position * freq);
    if (i + 1 < dim) v[i + 1] = std::cos(position * freq);
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& x : v) x /= norm;
  return v;
}

Tensor2 add_positional_encodings(const FeatureClip& clip, const EncodingOptions& options,
                                 const Tensor2* base) {
  Tensor2 out = base != nullptr ? *base : clip.features;
  if (!out.same_shape(clip.features))
    throw ShapeError("add_positional_encodings: base features do not match the clip");
  if (!options.temporal && !options.spatial) return out;
  const std::size_t d = clip.dim;
  if (d < 8) throw InvalidArgument("positional encodings need dim >= 8, got " + std::to_string(d));

  const std::size_t half = d / 2;
  for (std::size_t t = 0; t < clip.window; ++t) {
    const auto temporal = sinusoidal_encoding(static_cast<double>(t), d);
    for (std::size_t p = 0; p < clip.patches; ++p) {
      auto row = out.row(node_index(t, p, clip.patches));
      if (options.temporal)
        for (std::size_t c = 0; c < d; ++c) row[c] += options.scale * temporal[c];
      if (options.spatial) {
        const auto r = sinusoidal_encoding(static_cast<double>(p / clip.grid.cols), half);
        const auto q = sinusoidal_encoding(static_cast<double>(p % clip.grid.cols), d - half);
        const double s = options.scale / std::sqrt(2.0);
        for (std::size_t c = 0; c < half; ++c) row[c] += s * r[c];
        for (std::size_t c = 0; c < d - half; ++c) row[half + c] += s * q[c];
      }
    }
  }
  return out;
}

SparseMatrix DynamicGraph::combined_adjacency(double spatial_weight, double temporal_weight) const {
  std::vector<Triplet> t;
  t.reserve(2 * (spatial_edges.size() + temporal_edges.size()));
  for (const Edge& e : spatial_edges) {
    t.push_back({e.u, e.v, spatial_weight * e.weight});
    t.push_back({e.v, e.u, spatial_weight * e.weight});
  }
  for (const Edge& e : temporal_edges) {
    t.push_back({e.u, e.v, temporal_weight * e.weight});
    t.push_back({e.v, e.u, temporal_weight * e.weight});
  }
  return SparseMatrix::from_triplets(nodes(), nodes(), std::move(t));
}

DynamicGraph build_dynamic_graph(const FeatureClip& clip, const GraphOptions& options,
                                 const ClipMatches& matches) {
  clip.validate();
  DynamicGraph g;
  g.window = clip.window;
  g.patches = clip.patches;
  g.dim = clip.dim;
  const std::size_t n = clip.patches;

  for (std::size_t t = 0; t < clip.window; ++t) {
    const FrameGraph fg =
        threshold_graph(build_adjacency(clip.frame(t), options.normalize), options.tau);
    for (const Edge& e : fg.edges)
      g.spatial_edges.push_back({node_index(t, e.u, n), node_index(t, e.v, n), e.weight});
  }

  for (const auto& [t, list] : matches) {
    if (t + 1 >= clip.window) {
      if (list.pairs.empty()) continue;
      throw InvalidArgument("match list for frame pair (" + std::to_string(t) + ", " +
                            std::to_string(t + 1) + ") lies outside a window of " +
                            std::to_string(clip.window));
    }
    list.validate_partial_matching();
    for (const Match& m : list.pairs) {
      if (m.left >= n || m.right >= n) {
        throw InvalidArgument("match index out of range in pair [" + std::to_string(m.left) +
                              ", " + std::to_string(m.right) + "] at t=" + std::to_string(t) +
                              " (patches=" + std::to_string(n) + ")");
      }
      g.temporal_edges.push_back(
          {node_index(t, m.left, n), node_index(t + 1, m.right, n), m.confidence});
    }
  }

  const Tensor2 base = options.normalize ? normalize_rows(clip.features) : clip.features;
  g.node_features = add_positional_encodings(clip, options.encodings, &base);
  return g;
}

std::string graph_to_json(const DynamicGraph& g) {
  nlohmann::json j;
  j["w"] = g.window;
  j["n"] = g.patches;
  j["d"] = g.dim;
  auto edges = [](const std::vector<Edge>& es) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Edge& e : es) arr.push_back({e.u, e.v, e.weight});
    return arr;
  };
  j["spatial_edges"] = edges(g.spatial_edges);
  j["temporal_edges"] = edges(g.temporal_edges);
  return j.dump();
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::string graph_to_dot(const DynamicGraph& g, const std::vector<std::size_t>* clusters) {
  std::ostringstream os;
  os << "graph dynamic_graph {\n  node [shape=circle, style=filled, fontsize=8];\n";
  for (std::size_t v = 0; v < g.nodes(); ++v) {
    os << "  n" << v << " [label=\"t" << node_frame(v, g.patches) << "p"
       << node_patch(v, g.patches) << "\"";
    if (clusters != nullptr && v < clusters->size())
      os << ", fillcolor=\"" << kPalette[(*clusters)[v] % std::size(kPalette)] << "\"";
    else
      os << ", fillcolor=\"#dddddd\"";
    os << "];\n";
  }
  for (const Edge& e : g.spatial_edges)
    os << "  n" << e.u << " -- n" << e.v << " [penwidth=" << 0.5 + 2.0 * e.weight << "];\n";
  for (const Edge& e : g.temporal_edges)
    os << "  n" << e.u << " -- n" << e.v << " [style=dashed, penwidth=" << 0.5 + 2.0 * e.weight
       << "];\n";
  os << "}\n";
  return os.str();
}

}  // namespace dsg
