#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dsg/downstream.hpp"

namespace dsg {

/// Minimal TOML subset: `key = value` lines, `[section]` headers (keys become
/// "section.key"), `#` comments, and values that are numbers, true/false,
/// quoted strings or flat arrays of numbers.
class ConfigFile {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
    bool quoted = false;
  };

  static ConfigFile parse(const std::string& text, const std::string& source = "<memory>");
  static ConfigFile load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return entries_.contains(key); }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_count(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_counts(const std::string& key) const;

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
};

/// Recognized keys, with defaults from TrainConfig:
///   window_size, K, tau, normalize, encodings.temporal, encodings.spatial,
///   encodings.scale, clustering_objective, epochs, lr, batch, seed,
///   loss.unsupervised, loss.supervised, loss.regularization, gcn_hidden,
///   edge_hidden, classifier_hidden, scale_pooled_features,
///   match_min_confidence, spatial_weight, temporal_weight, freeze_clustering,
///   threads.
/// Unknown keys and out-of-range values raise ConfigError with the line.
TrainConfig train_config_from(const ConfigFile& file);
/// Serializes every recognized key; parsing the result gives back `config`.
std::string to_config_text(const TrainConfig& config);

}  // namespace dsg
