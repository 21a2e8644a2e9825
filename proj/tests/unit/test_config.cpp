#include <gtest/gtest.h>

#include "dsg/config.hpp"
#include "dsg/error.hpp"

namespace dsg {
namespace {

void expect_config_error(const std::string& text, const std::string& needle) {
  try {
    train_config_from(ConfigFile::parse(text, "run.toml"));
    FAIL() << "expected ConfigError for: " << text;
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(ConfigFile, ParsesSectionsCommentsAndTypes) {
  ConfigFile f = ConfigFile::parse(
      "# header\nK = 8   # trailing\nlr = 3e-3\n[loss]\nsupervised = 0.5\n"
      "[encodings]\ntemporal = true\nclustering_name = \"dmon # not a comment\"\n");
  EXPECT_EQ(f.get_count("K"), 8u);
  EXPECT_DOUBLE_EQ(f.get_double("lr"), 3e-3);
  EXPECT_DOUBLE_EQ(f.get_double("loss.supervised"), 0.5);
  EXPECT_TRUE(f.get_bool("encodings.temporal"));
  EXPECT_EQ(f.get_string("encodings.clustering_name"), "dmon # not a comment");
  EXPECT_EQ(f.entries().at("lr").line, 3u);
}

TEST(ConfigFile, SyntaxErrorsCarryLineNumbers) {
  auto expect_parse_error = [](const std::string& text, const std::string& needle) {
    try {
      ConfigFile::parse(text, "x.toml");
      FAIL() << text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_parse_error("K = 2\nK = 3\n", "x.toml:2");
  expect_parse_error("[loss\n", "unterminated section");
  expect_parse_error("K 2\n", "expected key = value");
  expect_parse_error("K =\n", "empty value");
  expect_parse_error("name = \"abc\n", "unterminated string");
  EXPECT_THROW(ConfigFile::load("/nonexistent/run.toml"), ConfigError);
}

TEST(TrainConfig, DefaultsWhenEmpty) {
  TrainConfig c = train_config_from(ConfigFile::parse(""));
  EXPECT_EQ(c.prepare.window_size, 0u);
  EXPECT_EQ(c.model.clustering.clusters, 16u);
  EXPECT_DOUBLE_EQ(c.prepare.graph.tau, 0.9);
  EXPECT_TRUE(c.prepare.graph.normalize);
  EXPECT_EQ(c.objective.objective, ClusteringObjective::kDmon);
  EXPECT_DOUBLE_EQ(c.learning_rate, 1e-4);
  EXPECT_EQ(c.batch_size, 32u);
  EXPECT_EQ(c.epochs, 100u);
  EXPECT_DOUBLE_EQ(c.objective.unsupervised_weight, 1.0);
  EXPECT_DOUBLE_EQ(c.objective.supervised_weight, 1.0);
}

TEST(TrainConfig, ReadsEveryKey) {
  TrainConfig c = train_config_from(ConfigFile::parse(
      "window_size = 8\nK = 4\ntau = 0.5\nnormalize = false\nclustering_objective = \"mincut\"\n"
      "epochs = 30\nlr = 0.001\nbatch = 16\nseed = 9\ngcn_hidden = [16, 8]\n"
      "classifier_hidden = []\nfreeze_clustering = true\nthreads = 2\n"
      "[encodings]\ntemporal = true\nscale = 0.25\n[loss]\nunsupervised = 0.2\n"));
  EXPECT_EQ(c.prepare.window_size, 8u);
  EXPECT_EQ(c.model.clustering.clusters, 4u);
  EXPECT_DOUBLE_EQ(c.prepare.graph.tau, 0.5);
  EXPECT_FALSE(c.prepare.graph.normalize);
  EXPECT_EQ(c.objective.objective, ClusteringObjective::kMinCut);
  EXPECT_EQ(c.epochs, 30u);
  EXPECT_EQ(c.batch_size, 16u);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.model.clustering.gcn_hidden, (std::vector<std::size_t>{16, 8}));
  EXPECT_TRUE(c.model.classifier_hidden.empty());
  EXPECT_TRUE(c.freeze_clustering);
  EXPECT_TRUE(c.prepare.graph.encodings.temporal);
  EXPECT_DOUBLE_EQ(c.prepare.graph.encodings.scale, 0.25);
  EXPECT_DOUBLE_EQ(c.objective.unsupervised_weight, 0.2);
}

TEST(TrainConfig, BadValuesNameKeyAndLine) {
  expect_config_error("epochs = 3\nwindow = 4\n", "run.toml:2: unknown key 'window'");
  expect_config_error("K = 1\n", "run.toml:1: K: must be at least 2");
  expect_config_error("lr = fast\n", "not a number");
  expect_config_error("lr = -1\n", "lr: must be nonnegative");
  expect_config_error("batch = 0\n", "batch");
  expect_config_error("K = -4\n", "nonnegative integer");
  expect_config_error("normalize = yes\n", "true or false");
  expect_config_error("clustering_objective = \"kmeans\"\n", "kmeans");
  expect_config_error("gcn_hidden = [4, 0]\n", "positive integer");
  expect_config_error("match_min_confidence = 1.5\n", "[0, 1]");
  expect_config_error("tau = -2\n", "tau");
}

// Property: serializing and re-parsing reproduces the config.
TEST(TrainConfig, TextRoundTrip) {
  TrainConfig c;
  c.prepare.window_size = 5;
  c.model.clustering.clusters = 7;
  c.model.clustering.gcn_hidden = {3, 9};
  c.prepare.graph.tau = 0.123456789012345;
  c.objective.objective = ClusteringObjective::kMinCut;
  c.learning_rate = 1.0 / 3.0;
  c.seed = 18446744073709551615ull;
  c.prepare.graph.encodings.spatial = true;
  c.model.scale_pooled_features = false;
  const std::string text = to_config_text(c);
  TrainConfig back = train_config_from(ConfigFile::parse(text));
  EXPECT_EQ(to_config_text(back), text);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.learning_rate, c.learning_rate);
  EXPECT_EQ(back.prepare.graph.tau, c.prepare.graph.tau);
  EXPECT_EQ(back.model.clustering.gcn_hidden, c.model.clustering.gcn_hidden);
  EXPECT_FALSE(back.model.scale_pooled_features);
}

}  // namespace
}  // namespace dsg
