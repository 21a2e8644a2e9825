#include <gtest/gtest.h>

#include <fstream>

#include "dsg/error.hpp"
#include "dsg/io.hpp"
#include "dsg/synthetic.hpp"
#include "support.hpp"

namespace dsg {
namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

void expect_format_error_mentions(const std::function<void()>& f, const std::string& needle) {
  try {
    f();
    FAIL() << "expected FormatError mentioning " << needle;
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(FeatureBlob, RoundTripCastsToF32) {
  testing::TempDir dir("blob");
  Rng rng(1);
  FeatureBlob blob{2, 3, 4, testing::random_normal(6, 4, rng)};
  write_feature_blob(dir / "a.dsgf", blob);
  EXPECT_EQ(std::filesystem::file_size(dir / "a.dsgf"), 18u + 6 * 4 * 4);
  FeatureBlob back = read_feature_blob(dir / "a.dsgf");
  EXPECT_EQ(back.window, 2u);
  EXPECT_EQ(back.patches, 3u);
  EXPECT_EQ(back.dim, 4u);
  for (std::size_t i = 0; i < blob.features.size(); ++i)
    EXPECT_EQ(back.features[i], double(float(blob.features[i])));
  EXPECT_THROW(write_feature_blob(dir / "b.dsgf", {2, 2, 4, blob.features}), ShapeError);
}

TEST(FeatureBlob, CorruptFilesAreNamed) {
  testing::TempDir dir("blob2");
  const auto p = dir / "c.dsgf";
  FeatureBlob blob{1, 2, 2, Tensor2(2, 2, 1.0)};
  write_feature_blob(p, blob);
  std::filesystem::resize_file(p, std::filesystem::file_size(p) - 2);
  expect_format_error_mentions([&] { read_feature_blob(p); }, "c.dsgf");
  expect_format_error_mentions([&] { read_feature_blob(p); }, "truncated");

  write_feature_blob(p, blob);
  { std::ofstream(p, std::ios::app | std::ios::binary) << "xx"; }
  expect_format_error_mentions([&] { read_feature_blob(p); }, "trailing");

  write_text(p, "NOPE0000000000000000");
  expect_format_error_mentions([&] { read_feature_blob(p); }, "bad magic");
  write_text(p, "DSG");
  expect_format_error_mentions([&] { read_feature_blob(p); }, "truncated header");
  expect_format_error_mentions([&] { read_feature_blob(dir / "none.dsgf"); }, "none.dsgf");
}

TEST(Dataset, SaveLoadRoundTrip) {
  testing::TempDir dir("ds");
  SyntheticSpec spec;
  spec.clips = 6;
  spec.feature_dim = 8;
  spec.window = 2;
  spec.grid = {3, 3};
  spec.min_side = spec.max_side = 1;
  spec.test_clips = 2;
  spec.emit_matches = true;
  spec.seed = 4;
  const ClipDataset ds = generate_synthetic(spec).dataset;
  save_dataset(ds, dir.path());
  const ClipDataset back = load_dataset(dir.path());
  EXPECT_EQ(load_dataset(dir / "manifest.json").entries.size(), ds.entries.size());
  EXPECT_EQ(back.window, ds.window);
  EXPECT_EQ(back.patches, ds.patches);
  EXPECT_EQ(back.dim, ds.dim);
  EXPECT_EQ(back.grid, ds.grid);
  EXPECT_EQ(back.phases, ds.phases);
  EXPECT_EQ(back.classes, ds.classes);
  ASSERT_EQ(back.entries.size(), ds.entries.size());
  for (std::size_t i = 0; i < ds.entries.size(); ++i) {
    const DatasetEntry &a = ds.entries[i], &b = back.entries[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.split, b.split);
    EXPECT_EQ(a.clip.phase_label, b.clip.phase_label);
    EXPECT_EQ(a.clip.frame_ids, b.clip.frame_ids);
    EXPECT_EQ(a.masks, b.masks);
    ASSERT_TRUE(b.matches.has_value());
    EXPECT_EQ(a.matches->size(), b.matches->size());
    for (std::size_t k = 0; k < a.clip.features.size(); ++k)
      EXPECT_EQ(b.clip.features[k], double(float(a.clip.features[k])));
  }
  EXPECT_EQ(back.split("test").size(), 2u);
  EXPECT_EQ(back.split("train").size(), 4u);
}

class ManifestErrors : public ::testing::Test {
 protected:
  void SetUp() override {
    write_feature_blob(dir / "a.dsgf", {1, 4, 2, Tensor2(4, 2, 0.5)});
  }
  void expect_error(const std::string& clip_json, const std::string& needle) {
    write_text(dir / "manifest.json",
               R"({"window": 1, "patches": 4, "dim": 2, "grid": [2, 2], "phases": 2, "clips": [)" +
                   clip_json + "]}");
    expect_format_error_mentions([&] { load_dataset(dir.path()); }, needle);
  }
  testing::TempDir dir{"manifest"};
};

TEST_F(ManifestErrors, NamesTheOffendingRecord) {
  expect_error(R"({"id": "c0", "blob": "missing.dsgf"})", "missing.dsgf");
  expect_error(R"({"id": "c0", "blob": "a.dsgf", "split": "dev"})", "unknown split 'dev'");
  expect_error(R"({"id": "c0", "blob": "a.dsgf", "label": 5})", "c0");
  expect_error(R"({"id": "c0", "blob": "a.dsgf", "label": -1})", "label");
  expect_error(R"({"id": "c0", "blob": "a.dsgf", "frame_ids": [1, 2]})", "frame_ids");
  expect_error(R"({"id": "c0"})", "missing blob");
}

TEST_F(ManifestErrors, HeaderProblems) {
  write_text(dir / "manifest.json", "{not json");
  expect_format_error_mentions([&] { load_dataset(dir.path()); }, "manifest.json");
  write_text(dir / "manifest.json",
             R"({"window": 1, "patches": 4, "dim": 2, "grid": [3, 3], "phases": 2, "clips": []})");
  expect_format_error_mentions([&] { load_dataset(dir.path()); }, "grid");
  write_text(dir / "manifest.json", R"({"window": 1, "patches": 4, "dim": 2, "grid": [2, 2]})");
  expect_format_error_mentions([&] { load_dataset(dir.path()); }, "phases");
}

TEST_F(ManifestErrors, BlobShapeMismatch) {
  write_feature_blob(dir / "b.dsgf", {2, 4, 2, Tensor2(8, 2, 0.5)});
  expect_error(R"({"id": "c1", "blob": "b.dsgf"})", "c1");
}

}  // namespace
}  // namespace dsg
