#include "dsg/prototype.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dsg/error.hpp"
#include "json.hpp"

namespace dsg {

PrototypeBank build_prototypes(std::span<const AnnotatedFrame> frames, std::size_t num_classes,
                               bool normalize_patches) {
  if (frames.empty()) throw InvalidArgument("build_prototypes: no annotated frames");
  PrototypeBank bank;
  bank.dim = frames.front().features.cols();

  std::map<std::size_t, std::vector<std::vector<double>>> members;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const AnnotatedFrame& fr = frames[f];
    if (fr.features.cols() != bank.dim)
      throw ShapeError("build_prototypes: frame " + std::to_string(f) + " has feature dim " +
                       std::to_string(fr.features.cols()) + ", expected " +
                       std::to_string(bank.dim));
    if (fr.mask.size() != fr.features.rows())
      throw ShapeError("build_prototypes: frame " + std::to_string(f) + " mask has " +
                       std::to_string(fr.mask.size()) + " entries for " +
                       std::to_string(fr.features.rows()) + " patches");
    const Tensor2 feats = normalize_patches ? normalize_rows(fr.features) : fr.features;
    for (std::size_t i = 0; i < fr.mask.size(); ++i) {
      if (fr.mask[i] < 0) continue;
      const auto cls = static_cast<std::size_t>(fr.mask[i]);
      if (num_classes > 0 && cls >= num_classes)
        throw InvalidArgument("build_prototypes: class " + std::to_string(cls) +
                              " >= class count " + std::to_string(num_classes));
      members[cls].emplace_back(feats.row(i).begin(), feats.row(i).end());
    }
  }

  for (auto& [cls, rows] : members) {
    std::sort(rows.begin(), rows.end());
    std::vector<double> mean(bank.dim, 0.0);
    for (const auto& r : rows)
      for (std::size_t k = 0; k < bank.dim; ++k) mean[k] += r[k];
    double norm = 0.0;
    for (double& v : mean) {
      v /= static_cast<double>(rows.size());
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& v : mean) v /= norm;
    bank.prototypes[cls] = std::move(mean);
    bank.support_counts[cls] = rows.size();
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    if (!bank.prototypes.contains(c)) bank.excluded.push_back(c);
  if (bank.prototypes.empty()) throw InvalidArgument("build_prototypes: every class lacks support");
  return bank;
}

ClusterLabels label_clusters(const PooledSceneGraph& sg, const ClusterAssignment& c,
                             const PrototypeBank& bank) {
  if (bank.prototypes.empty()) throw InvalidArgument("label_clusters: empty prototype bank");
  if (c.clusters() != sg.clusters())
    throw ShapeError("label_clusters: assignment has " + std::to_string(c.clusters()) +
                     " clusters, scene graph has " + std::to_string(sg.clusters()));
  if (sg.features.cols() != bank.dim)
    throw ShapeError("label_clusters: scene graph features are " +
                     std::to_string(sg.features.cols()) + "-dim, prototypes " +
                     std::to_string(bank.dim) + "-dim");
  const Tensor2 reps = normalize_rows(sg.features);
  ClusterLabels out;
  for (std::size_t k = 0; k < reps.rows(); ++k) {
    std::size_t best = bank.prototypes.begin()->first;
    double best_score = -2.0;
    for (const auto& [cls, proto] : bank.prototypes) {
      double s = 0.0;
      for (std::size_t j = 0; j < bank.dim; ++j) s += reps(k, j) * proto[j];
      if (s > best_score) {
        best_score = s;
        best = cls;
      }
    }
    out.labels.push_back(best);
    out.scores.push_back(best_score);
  }
  return out;
}

std::vector<SegmentationMap> render_segmentation(const ClusterAssignment& c,
                                                 std::span<const std::size_t> cluster_labels,
                                                 const Grid& grid,
                                                 std::span<const std::int64_t> frame_ids) {
  if (cluster_labels.size() != c.clusters())
    throw InvalidArgument("render_segmentation: " + std::to_string(cluster_labels.size()) +
                          " labels for " + std::to_string(c.clusters()) + " clusters");
  const std::size_t n = grid.size();
  if (n == 0 || c.nodes() % n != 0)
    throw ShapeError("render_segmentation: " + std::to_string(c.nodes()) +
                     " nodes do not tile a " + std::to_string(grid.rows) + "x" +
                     std::to_string(grid.cols) + " grid");
  const std::size_t frames = c.nodes() / n;
  if (!frame_ids.empty() && frame_ids.size() != frames)
    throw ShapeError("render_segmentation: frame id count does not match the window");
  const std::vector<std::size_t> hard = c.hard_labels();
  std::vector<SegmentationMap> maps(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    maps[t].frame_id = frame_ids.empty() ? static_cast<std::int64_t>(t) : frame_ids[t];
    maps[t].grid = grid;
    maps[t].labels.resize(n);
    for (std::size_t p = 0; p < n; ++p)
      maps[t].labels[p] = static_cast<std::int64_t>(cluster_labels[hard[node_index(t, p, n)]]);
  }
  return maps;
}

namespace {

Annotation annotation_from_json(const nlohmann::json& j, const std::string& where) {
  auto fail = [&](const std::string& what) { throw FormatError(where + ": " + what); };
  if (!j.is_object()) fail("annotation must be an object");
  if (!j.contains("frame_id") || !j["frame_id"].is_number_integer()) fail("missing integer frame_id");
  if (!j.contains("grid") || !j["grid"].is_array() || j["grid"].size() != 2)
    fail("grid must be [rows, cols]");
  if (!j.contains("mask") || !j["mask"].is_array()) fail("missing mask array");
  Annotation a;
  a.map.frame_id = j["frame_id"].get<std::int64_t>();
  for (const auto& g : j["grid"])
    if (!g.is_number_unsigned()) fail("grid entries must be nonnegative integers");
  a.map.grid = {j["grid"][0].get<std::size_t>(), j["grid"][1].get<std::size_t>()};
  for (const auto& v : j["mask"]) {
    if (!v.is_number_integer()) fail("mask entries must be integers");
    a.map.labels.push_back(v.get<std::int64_t>());
  }
  if (a.map.labels.size() != a.map.grid.size())
    fail("mask has " + std::to_string(a.map.labels.size()) + " entries for a " +
         std::to_string(a.map.grid.rows) + "x" + std::to_string(a.map.grid.cols) + " grid");
  if (j.contains("clip")) {
    if (!j["clip"].is_string()) fail("clip must be a string");
    a.clip = j["clip"].get<std::string>();
  }
  return a;
}

}  // namespace

std::vector<Annotation> parse_annotations(const std::string& text, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source + ": " + e.what());
  }
  std::vector<Annotation> out;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i)
      out.push_back(annotation_from_json(j[i], source + "[" + std::to_string(i) + "]"));
  } else {
    out.push_back(annotation_from_json(j, source));
  }
  return out;
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open annotation file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_annotations(ss.str(), path.string());
}

void save_annotations(const std::filesystem::path& path, std::span<const Annotation> annotations) {
  nlohmann::json j = nlohmann::json::array();
  for (const Annotation& a : annotations) {
    nlohmann::json o = {{"frame_id", a.map.frame_id},
                        {"grid", {a.map.grid.rows, a.map.grid.cols}},
                        {"mask", a.map.labels}};
    if (!a.clip.empty()) o["clip"] = a.clip;
    j.push_back(std::move(o));
  }
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump() << "\n";
}

void save_segmentation(const std::filesystem::path& path, std::span<const SegmentationMap> maps) {
  nlohmann::json j = nlohmann::json::array();
  for (const SegmentationMap& m : maps)
    j.push_back({{"frame_id", m.frame_id}, {"grid", {m.grid.rows, m.grid.cols}}, {"mask", m.labels}});
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump() << "\n";
}

std::string segmentation_to_pgm(const SegmentationMap& map, std::size_t num_classes) {
  std::ostringstream os;
  os << "P2\n# frame " << map.frame_id << "\n" << map.grid.cols << " " << map.grid.rows << "\n255\n";
  const double step = num_classes > 1 ? 255.0 / static_cast<double>(num_classes - 1) : 255.0;
  for (std::size_t r = 0; r < map.grid.rows; ++r) {
    for (std::size_t c = 0; c < map.grid.cols; ++c) {
      const std::int64_t v = map.labels[r * map.grid.cols + c];
      const long level = v < 0 ? 0 : std::lround(std::min(255.0, static_cast<double>(v) * step));
      os << (c > 0 ? " " : "") << level;
    }
    os << "\n";
  }
  return os.str();
}

std::string prototypes_to_json(const PrototypeBank& bank) {
  nlohmann::json j;
  j["dim"] = bank.dim;
  j["excluded"] = bank.excluded;
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [cls, proto] : bank.prototypes)
    classes[std::to_string(cls)] = {{"support", bank.support_counts.at(cls)}, {"vector", proto}};
  j["classes"] = classes;
  return j.dump();
}

}  // namespace dsg
