#include "dsg/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dsg/error.hpp"

namespace dsg {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-'))
      return false;
  return true;
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& source) {
  ConfigFile cfg;
  cfg.source_ = source;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    const std::string where = source + ":" + std::to_string(lineno);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) throw ConfigError(where + ": bad section name '" + section + "'");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw ConfigError(where + ": bad key '" + key + "'");
    if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
    if (!section.empty()) key = section + "." + key;
    Entry e;
    e.line = lineno;
    if (value.front() == '"') {
      if (value.size() < 2 || value.back() != '"')
        throw ConfigError(where + ": unterminated string for '" + key + "'");
      e.value = value.substr(1, value.size() - 2);
      e.quoted = true;
    } else {
      e.value = value;
    }
    if (cfg.entries_.contains(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    cfg.entries_[key] = e;
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str(), path.string());
}

void ConfigFile::fail(const std::string& key, const std::string& what) const {
  auto it = entries_.find(key);
  const std::string where =
      it == entries_.end() ? source_ : source_ + ":" + std::to_string(it->second.line);
  throw ConfigError(where + ": " + key + ": " + what);
}

std::string ConfigFile::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) fail(key, "missing");
  return it->second.value;
}

double ConfigFile::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) fail(key, "'" + v + "' is not a number");
  return out;
}

std::uint64_t ConfigFile::get_u64(const std::string& key) const {
  const std::string v = get_string(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    fail(key, "'" + v + "' is not a nonnegative integer");
  return out;
}

std::size_t ConfigFile::get_count(const std::string& key) const {
  return static_cast<std::size_t>(get_u64(key));
}

bool ConfigFile::get_bool(const std::string& key) const {
  const std::string v = get_string(key);
  if (v == "true") return true;
  if (v == "false") return false;
  fail(key, "'" + v + "' is not true or false");
}

std::vector<std::size_t> ConfigFile::get_counts(const std::string& key) const {
  const std::string v = get_string(key);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') fail(key, "expected [a, b, ...]");
  std::vector<std::size_t> out;
  std::stringstream ss(v.substr(1, v.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t n = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), n);
    if (ec != std::errc() || ptr != item.data() + item.size() || n == 0)
      fail(key, "'" + item + "' is not a positive integer");
    out.push_back(n);
  }
  return out;
}

TrainConfig train_config_from(const ConfigFile& f) {
  static const std::set<std::string> known = {
      "window_size", "K", "tau", "normalize", "encodings.temporal", "encodings.spatial",
      "encodings.scale", "clustering_objective", "epochs", "lr", "batch", "seed",
      "loss.unsupervised", "loss.supervised", "loss.regularization", "gcn_hidden",
      "edge_hidden", "classifier_hidden", "scale_pooled_features", "match_min_confidence",
      "spatial_weight", "temporal_weight", "freeze_clustering", "threads"};
  for (const auto& [key, entry] : f.entries()) {
    if (!known.contains(key))
      throw ConfigError(f.source() + ":" + std::to_string(entry.line) + ": unknown key '" + key + "'");
  }
  auto err = [&](const std::string& key, const std::string& what) {
    const auto& e = f.entries().at(key);
    throw ConfigError(f.source() + ":" + std::to_string(e.line) + ": " + key + ": " + what);
  };

  TrainConfig c;
  if (f.contains("window_size")) c.prepare.window_size = f.get_count("window_size");
  if (f.contains("K")) {
    c.model.clustering.clusters = f.get_count("K");
    if (c.model.clustering.clusters < 2) err("K", "must be at least 2");
  }
  if (f.contains("tau")) {
    c.prepare.graph.tau = f.get_double("tau");
    if (c.prepare.graph.tau < -1.0) err("tau", "must be >= -1");
  }
  if (f.contains("normalize")) c.prepare.graph.normalize = f.get_bool("normalize");
  if (f.contains("encodings.temporal"))
    c.prepare.graph.encodings.temporal = f.get_bool("encodings.temporal");
  if (f.contains("encodings.spatial"))
    c.prepare.graph.encodings.spatial = f.get_bool("encodings.spatial");
  if (f.contains("encodings.scale")) c.prepare.graph.encodings.scale = f.get_double("encodings.scale");
  if (f.contains("clustering_objective")) {
    try {
      c.objective.objective = parse_objective(f.get_string("clustering_objective"));
    } catch (const ConfigError& e) {
      err("clustering_objective", e.what());
    }
  }
  if (f.contains("epochs")) c.epochs = f.get_count("epochs");
  if (f.contains("lr")) {
    c.learning_rate = f.get_double("lr");
    if (c.learning_rate < 0.0) err("lr", "must be nonnegative");
  }
  if (f.contains("batch")) {
    c.batch_size = f.get_count("batch");
    if (c.batch_size == 0) err("batch", "must be positive");
  }
  if (f.contains("seed")) c.seed = f.get_u64("seed");
  if (f.contains("loss.unsupervised")) c.objective.unsupervised_weight = f.get_double("loss.unsupervised");
  if (f.contains("loss.supervised")) c.objective.supervised_weight = f.get_double("loss.supervised");
  if (f.contains("loss.regularization"))
    c.objective.regularization_weight = f.get_double("loss.regularization");
  if (f.contains("gcn_hidden")) c.model.clustering.gcn_hidden = f.get_counts("gcn_hidden");
  if (f.contains("edge_hidden")) {
    c.model.edge_hidden = f.get_count("edge_hidden");
    if (c.model.edge_hidden == 0) err("edge_hidden", "must be positive");
  }
  if (f.contains("classifier_hidden")) c.model.classifier_hidden = f.get_counts("classifier_hidden");
  if (f.contains("scale_pooled_features"))
    c.model.scale_pooled_features = f.get_bool("scale_pooled_features");
  if (f.contains("match_min_confidence")) {
    c.prepare.match_min_confidence = f.get_double("match_min_confidence");
    if (c.prepare.match_min_confidence < 0.0 || c.prepare.match_min_confidence > 1.0)
      err("match_min_confidence", "must lie in [0, 1]");
  }
  if (f.contains("spatial_weight")) c.prepare.spatial_weight = f.get_double("spatial_weight");
  if (f.contains("temporal_weight")) c.prepare.temporal_weight = f.get_double("temporal_weight");
  if (c.prepare.spatial_weight < 0.0) err("spatial_weight", "must be nonnegative");
  if (c.prepare.temporal_weight < 0.0) err("temporal_weight", "must be nonnegative");
  if (f.contains("freeze_clustering")) c.freeze_clustering = f.get_bool("freeze_clustering");
  if (f.contains("threads")) c.threads = f.get_count("threads");
  return c;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string list(const std::vector<std::size_t>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s + "]";
}

const char* boolean(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string to_config_text(const TrainConfig& c) {
  std::ostringstream os;
  os << "window_size = " << c.prepare.window_size << "\n"
     << "K = " << c.model.clustering.clusters << "\n"
     << "tau = " << num(c.prepare.graph.tau) << "\n"
     << "normalize = " << boolean(c.prepare.graph.normalize) << "\n"
     << "clustering_objective = \"" << to_string(c.objective.objective) << "\"\n"
     << "epochs = " << c.epochs << "\n"
     << "lr = " << num(c.learning_rate) << "\n"
     << "batch = " << c.batch_size << "\n"
     << "seed = " << c.seed << "\n"
     << "gcn_hidden = " << list(c.model.clustering.gcn_hidden) << "\n"
     << "edge_hidden = " << c.model.edge_hidden << "\n"
     << "classifier_hidden = " << list(c.model.classifier_hidden) << "\n"
     << "scale_pooled_features = " << boolean(c.model.scale_pooled_features) << "\n"
     << "match_min_confidence = " << num(c.prepare.match_min_confidence) << "\n"
     << "spatial_weight = " << num(c.prepare.spatial_weight) << "\n"
     << "temporal_weight = " << num(c.prepare.temporal_weight) << "\n"
     << "freeze_clustering = " << boolean(c.freeze_clustering) << "\n"
     << "threads = " << c.threads << "\n"
     << "\n[encodings]\n"
     << "temporal = " << boolean(c.prepare.graph.encodings.temporal) << "\n"
     << "spatial = " << boolean(c.prepare.graph.encodings.spatial) << "\n"
     << "scale = " << num(c.prepare.graph.encodings.scale) << "\n"
     << "\n[loss]\n"
     << "unsupervised = " << num(c.objective.unsupervised_weight) << "\n"
     << "supervised = " << num(c.objective.supervised_weight) << "\n"
     << "regularization = " << num(c.objective.regularization_weight) << "\n";
  return os.str();
}

}  // namespace dsg
