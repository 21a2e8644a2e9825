#include "dsg/io.hpp"

#include <fstream>
#include <sstream>

#include "dsg/error.hpp"
#include "dsg/prototype.hpp"
#include "json.hpp"
#include "le_io.hpp"

namespace dsg {

namespace {

constexpr char kBlobMagic[4] = {'D', 'S', 'G', 'F'};
constexpr std::uint16_t kBlobVersion = 1;
constexpr std::size_t kBlobHeaderBytes = 4 + 2 + 3 * 4;

}  // namespace

void write_feature_blob(const std::filesystem::path& path, const FeatureBlob& blob) {
  if (blob.features.rows() != blob.window * blob.patches || blob.features.cols() != blob.dim)
    throw ShapeError("feature blob " + path.string() + ": features do not match w·n x d");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open blob for writing: " + path.string());
  os.write(kBlobMagic, 4);
  detail::put_le<std::uint16_t>(os, kBlobVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(blob.window));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(blob.patches));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(blob.dim));
  for (double v : blob.features.values()) detail::put_f32(os, v);
  if (!os) throw FormatError("write failed: " + path.string());
}

FeatureBlob read_feature_blob(const std::filesystem::path& path) {
  const std::string name = "feature blob " + path.string();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(name + ": cannot open");
  is.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(is.tellg());
  is.seekg(0);
  if (size < kBlobHeaderBytes) throw FormatError(name + ": truncated header");
  char magic[4];
  is.read(magic, 4);
  if (std::string(magic, 4) != std::string(kBlobMagic, 4)) throw FormatError(name + ": bad magic");
  const auto version = detail::get_le<std::uint16_t>(is, name);
  if (version != kBlobVersion)
    throw FormatError(name + ": unsupported version " + std::to_string(version));
  FeatureBlob blob;
  blob.window = detail::get_le<std::uint32_t>(is, name);
  blob.patches = detail::get_le<std::uint32_t>(is, name);
  blob.dim = detail::get_le<std::uint32_t>(is, name);
  const std::uint64_t count = static_cast<std::uint64_t>(blob.window) * blob.patches * blob.dim;
  const std::uint64_t expected = kBlobHeaderBytes + 4 * count;
  if (size < expected) {
    throw FormatError(name + ": truncated, expected " + std::to_string(count) + " floats, found " +
                      std::to_string((size - kBlobHeaderBytes) / 4) + " (" +
                      std::to_string(size - kBlobHeaderBytes) + " payload bytes)");
  }
  if (size > expected)
    throw FormatError(name + ": " + std::to_string(size - expected) + " trailing bytes");
  blob.features = Tensor2(blob.window * blob.patches, blob.dim);
  for (double& v : blob.features.values()) v = detail::get_f32(is, name);
  if (!blob.features.all_finite()) throw FormatError(name + ": non-finite feature value");
  return blob;
}

std::vector<const DatasetEntry*> ClipDataset::split(const std::string& name) const {
  std::vector<const DatasetEntry*> out;
  for (const DatasetEntry& e : entries)
    if (e.split == name) out.push_back(&e);
  return out;
}

namespace {

std::size_t require_count(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number_unsigned())
    throw FormatError(where + ": missing or invalid \"" + key + "\"");
  return j[key].get<std::size_t>();
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

ClipDataset load_dataset(const std::filesystem::path& path) {
  const std::filesystem::path manifest =
      std::filesystem::is_directory(path) ? path / "manifest.json" : path;
  const std::filesystem::path root = manifest.parent_path();
  const std::string m = manifest.string();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(m + ": " + e.what());
  }
  if (!j.is_object()) throw FormatError(m + ": manifest must be a JSON object");

  ClipDataset ds;
  ds.window = require_count(j, "window", m);
  ds.patches = require_count(j, "patches", m);
  ds.dim = require_count(j, "dim", m);
  ds.phases = require_count(j, "phases", m);
  if (j.contains("classes")) ds.classes = require_count(j, "classes", m);
  if (!j.contains("grid") || !j["grid"].is_array() || j["grid"].size() != 2 ||
      !j["grid"][0].is_number_unsigned() || !j["grid"][1].is_number_unsigned())
    throw FormatError(m + ": \"grid\" must be [rows, cols]");
  ds.grid = {j["grid"][0].get<std::size_t>(), j["grid"][1].get<std::size_t>()};
  if (ds.grid.size() != ds.patches)
    throw FormatError(m + ": grid " + std::to_string(ds.grid.rows) + "x" +
                      std::to_string(ds.grid.cols) + " does not hold " +
                      std::to_string(ds.patches) + " patches");
  if (!j.contains("clips") || !j["clips"].is_array()) throw FormatError(m + ": missing clips array");

  for (std::size_t i = 0; i < j["clips"].size(); ++i) {
    const nlohmann::json& c = j["clips"][i];
    const std::string where = m + ": clips[" + std::to_string(i) + "]";
    if (!c.is_object()) throw FormatError(where + ": must be an object");
    DatasetEntry e;
    e.id = c.value("id", "clip" + std::to_string(i));
    if (!c.contains("blob") || !c["blob"].is_string()) throw FormatError(where + ": missing blob");
    e.split = c.value("split", std::string("train"));
    if (e.split != "train" && e.split != "val" && e.split != "test")
      throw FormatError(where + ": unknown split '" + e.split + "'");

    const std::filesystem::path blob_path = root / c["blob"].get<std::string>();
    if (!std::filesystem::exists(blob_path))
      throw FormatError(where + " (" + e.id + "): missing blob " + blob_path.string());
    FeatureBlob blob = read_feature_blob(blob_path);
    if (blob.window != ds.window || blob.patches != ds.patches || blob.dim != ds.dim) {
      throw FormatError(where + " (" + e.id + "): blob " + blob_path.string() + " is (w=" +
                        std::to_string(blob.window) + ", n=" + std::to_string(blob.patches) +
                        ", d=" + std::to_string(blob.dim) + "), manifest declares (w=" +
                        std::to_string(ds.window) + ", n=" + std::to_string(ds.patches) +
                        ", d=" + std::to_string(ds.dim) + ")");
    }
    e.clip.window = blob.window;
    e.clip.patches = blob.patches;
    e.clip.dim = blob.dim;
    e.clip.features = std::move(blob.features);
    e.clip.grid = ds.grid;
    if (c.contains("frame_ids")) {
      for (const auto& f : c["frame_ids"]) {
        if (!f.is_number_integer()) throw FormatError(where + ": frame_ids must be integers");
        e.clip.frame_ids.push_back(f.get<std::int64_t>());
      }
      if (e.clip.frame_ids.size() != ds.window)
        throw FormatError(where + ": " + std::to_string(e.clip.frame_ids.size()) +
                          " frame_ids for window " + std::to_string(ds.window));
    } else {
      for (std::size_t t = 0; t < ds.window; ++t)
        e.clip.frame_ids.push_back(static_cast<std::int64_t>(t));
    }
    if (c.contains("label") && !c["label"].is_null()) {
      if (!c["label"].is_number_unsigned()) throw FormatError(where + ": label must be a nonnegative integer");
      const auto label = c["label"].get<std::size_t>();
      if (label >= ds.phases)
        throw FormatError(where + " (" + e.id + "): label " + std::to_string(label) +
                          " out of range for " + std::to_string(ds.phases) + " phases");
      e.clip.phase_label = label;
    }
    if (c.contains("matches")) {
      if (!c["matches"].is_string()) throw FormatError(where + ": matches must be a path");
      e.matches = load_matches(root / c["matches"].get<std::string>());
    }
    if (c.contains("masks")) {
      if (!c["masks"].is_string()) throw FormatError(where + ": masks must be a path");
      for (Annotation& a : load_annotations(root / c["masks"].get<std::string>())) {
        if (!(a.map.grid == ds.grid))
          throw FormatError(where + ": mask grid differs from the dataset grid");
        for (std::int64_t v : a.map.labels)
          if (ds.classes > 0 && v >= static_cast<std::int64_t>(ds.classes))
            throw FormatError(where + ": mask class " + std::to_string(v) + " >= " +
                              std::to_string(ds.classes) + " classes");
        e.masks.push_back(std::move(a.map));
      }
    }
    try {
      e.clip.validate();
    } catch (const Error& err) {
      throw FormatError(where + " (" + e.id + "): " + err.what());
    }
    ds.entries.push_back(std::move(e));
  }
  return ds;
}

void save_dataset(const ClipDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "clips");
  nlohmann::json j;
  j["window"] = dataset.window;
  j["patches"] = dataset.patches;
  j["dim"] = dataset.dim;
  j["grid"] = {dataset.grid.rows, dataset.grid.cols};
  j["phases"] = dataset.phases;
  if (dataset.classes > 0) j["classes"] = dataset.classes;
  nlohmann::json clips = nlohmann::json::array();
  for (const DatasetEntry& e : dataset.entries) {
    nlohmann::json c;
    c["id"] = e.id;
    c["split"] = e.split;
    const std::string blob = "clips/" + e.id + ".dsgf";
    write_feature_blob(dir / blob, {e.clip.window, e.clip.patches, e.clip.dim, e.clip.features});
    c["blob"] = blob;
    c["frame_ids"] = e.clip.frame_ids;
    if (e.clip.phase_label) c["label"] = *e.clip.phase_label;
    if (e.matches) {
      const std::string file = "clips/" + e.id + ".matches.jsonl";
      save_matches(dir / file, *e.matches);
      c["matches"] = file;
    }
    if (!e.masks.empty()) {
      const std::string file = "clips/" + e.id + ".masks.json";
      save_segmentation(dir / file, e.masks);
      c["masks"] = file;
    }
    clips.push_back(std::move(c));
  }
  j["clips"] = std::move(clips);
  std::ofstream os(dir / "manifest.json");
  if (!os) throw Error("cannot write " + (dir / "manifest.json").string());
  os << j.dump(2) << "\n";
}

}  // namespace dsg
