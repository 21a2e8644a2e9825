#include <gtest/gtest.h>

#include "dsg/error.hpp"
#include "dsg/pipeline.hpp"
#include "dsg/synthetic.hpp"
#include "oracles.hpp"

namespace dsg {
namespace {

SyntheticData data_with_test(std::uint64_t seed, bool matches = false) {
  SyntheticSpec spec;
  spec.feature_dim = 16;
  spec.clips = 10;
  spec.window = 3;
  spec.grid = {4, 4};
  spec.min_side = spec.max_side = 2;
  spec.test_clips = 4;
  spec.emit_matches = matches;
  spec.seed = seed;
  return generate_synthetic(spec);
}

TrainConfig tiny() {
  TrainConfig cfg;
  cfg.model.clustering.clusters = 3;
  cfg.model.clustering.gcn_hidden = {8};
  cfg.model.edge_hidden = 4;
  cfg.model.classifier_hidden = {4};
  cfg.threads = 1;
  return cfg;
}

TEST(PrepareSplit, OrderAndStoredMatches) {
  const SyntheticData data = data_with_test(1, true);
  const auto train = prepare_split(data.dataset, "train", {});
  const auto test = prepare_split(data.dataset, "test", {});
  EXPECT_EQ(train.size(), 6u);
  EXPECT_EQ(test.size(), 4u);
  EXPECT_TRUE(prepare_split(data.dataset, "val", {}).empty());
  EXPECT_EQ(test[0].frame_span.first, data.dataset.entries[6].clip.frame_ids.front());
  // stored planted matches connect every patch to itself across frames
  const PreparedClip& c = train[0];
  const std::size_t n = c.graph.patches;
  const Tensor2 a = c.graph.adjacency.to_dense();
  for (std::size_t p = 0; p < n; ++p) EXPECT_GT(a(p, n + p), 0.0);
}

TEST(PrepareSplit, ErrorsNameTheClip) {
  SyntheticData data = data_with_test(2);
  try {
    prepare_split(data.dataset, "train", {.window_size = 9});
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("clip0000"), std::string::npos) << e.what();
  }
}

TEST(ModelConfigFor, TakesShapeFromDataset) {
  const SyntheticData data = data_with_test(3);
  const ModelConfig m = model_config_for(data.dataset, tiny());
  EXPECT_EQ(m.input_dim, 16u);
  EXPECT_EQ(m.phases, 4u);
  EXPECT_EQ(m.clustering.clusters, 3u);
}

TEST(SegmentClip, MapsFollowHardAssignment) {
  const SyntheticData data = data_with_test(4);
  const auto test = prepare_split(data.dataset, "test", {});
  Model model(model_config_for(data.dataset, tiny()), 1);
  const PrototypeBank bank =
      build_prototypes(resolve_annotations(data.dataset, data.annotations), 3);
  const std::vector<std::int64_t> ids = data.dataset.entries[6].clip.frame_ids;
  ClipSegmentation seg = segment_clip(model, test[0], bank, ids);
  ASSERT_EQ(seg.maps.size(), 3u);
  EXPECT_EQ(seg.maps[2].frame_id, ids[2]);
  EXPECT_EQ(seg.inference.scene_graph.cluster_labels, seg.labels.labels);
  const auto hard = seg.inference.assignment.hard_labels();
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 16; ++p)
      EXPECT_EQ(seg.maps[t].labels[p], std::int64_t(seg.labels.labels[hard[t * 16 + p]]));
}

TEST(EvaluateSplit, ReportMatchesIndependentScoring) {
  const SyntheticData data = data_with_test(5);
  const TrainConfig cfg = tiny();
  Model model(model_config_for(data.dataset, cfg), 2);
  const PrototypeBank bank =
      build_prototypes(resolve_annotations(data.dataset, data.annotations), 3);
  EvaluationReport r = evaluate_split(model, data.dataset, "test", cfg.prepare, &bank);
  ASSERT_TRUE(r.phase && r.nmi && r.segmentation);
  EXPECT_EQ(r.clips, 4u);

  const auto test = prepare_split(data.dataset, "test", cfg.prepare);
  std::vector<std::size_t> preds, labels, clusters, planted;
  std::vector<SegmentationMap> pm, gm;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const DatasetEntry& e = data.dataset.entries[6 + i];
    ClipSegmentation seg = segment_clip(model, test[i], bank, e.clip.frame_ids);
    preds.push_back(seg.inference.phase.predicted);
    labels.push_back(*e.clip.phase_label);
    const auto hard = seg.inference.assignment.hard_labels();
    clusters.insert(clusters.end(), hard.begin(), hard.end());
    const auto truth = planted_node_labels(e, 0);
    planted.insert(planted.end(), truth.begin(), truth.end());
    pm.insert(pm.end(), seg.maps.begin(), seg.maps.end());
    gm.insert(gm.end(), e.masks.begin(), e.masks.end());
  }
  const oracle::PhaseTally pt = oracle::phase_tally(preds, labels);
  EXPECT_NEAR(r.phase->accuracy, pt.accuracy, 1e-12);
  EXPECT_NEAR(r.phase->macro_f1, pt.macro_f1, 1e-12);
  EXPECT_NEAR(*r.nmi, normalized_mutual_information(clusters, planted), 1e-12);
  const oracle::SegTally st = oracle::seg_tally(pm, gm);
  EXPECT_NEAR(r.segmentation->pac, st.pac, 1e-12);
  EXPECT_NEAR(r.segmentation->miou, st.miou, 1e-12);

  const auto scalars = r.scalars();
  EXPECT_EQ(scalars.front().first, "clips");
  EXPECT_EQ(scalars.size(), 7u);
}

TEST(EvaluateSplit, WithoutBankSkipsSegmentation) {
  const SyntheticData data = data_with_test(6);
  const TrainConfig cfg = tiny();
  Model model(model_config_for(data.dataset, cfg), 3);
  EvaluationReport r = evaluate_split(model, data.dataset, "test", cfg.prepare);
  EXPECT_TRUE(r.phase.has_value());
  EXPECT_TRUE(r.nmi.has_value());
  EXPECT_FALSE(r.segmentation.has_value());
  EXPECT_EQ(evaluate_split(model, data.dataset, "val", cfg.prepare).clips, 0u);
}

TEST(PlantedNodeLabels, LastFramesAreFrameMajor) {
  const SyntheticData data = data_with_test(7);
  const DatasetEntry& e = data.dataset.entries[0];
  const auto all = planted_node_labels(e, 0);
  const auto last = planted_node_labels(e, 1);
  ASSERT_EQ(all.size(), 48u);
  ASSERT_EQ(last.size(), 16u);
  for (std::size_t p = 0; p < 16; ++p) {
    EXPECT_EQ(last[p], all[32 + p]);
    EXPECT_EQ(last[p], std::size_t(e.masks[2].labels[p]));
  }
}

}  // namespace
}  // namespace dsg
