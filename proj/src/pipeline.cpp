#include "dsg/pipeline.hpp"

#include <limits>

#include "dsg/error.hpp"
#include "dsg/synthetic.hpp"

namespace dsg {

std::vector<PreparedClip> prepare_split(const ClipDataset& dataset, const std::string& split,
                                        const PrepareOptions& options) {
  std::vector<PreparedClip> out;
  for (const DatasetEntry* e : dataset.split(split)) {
    try {
      out.push_back(prepare_clip(e->clip, options, e->matches ? &*e->matches : nullptr));
    } catch (const Error& err) {
      throw InvalidArgument("clip " + e->id + ": " + err.what());
    }
  }
  return out;
}

ModelConfig model_config_for(const ClipDataset& dataset, const TrainConfig& config) {
  ModelConfig m = config.model;
  m.input_dim = dataset.dim;
  m.phases = dataset.phases;
  return m;
}

ClusterLabels label_hard_clusters(const ClusterAssignment& c, const PreparedGraph& graph,
                                  const PrototypeBank& bank) {
  const std::vector<std::size_t> hard = c.hard_labels();
  const ClusterAssignment rounded = one_hot_assignment(hard, c.clusters());
  return label_clusters(pool_graph(rounded, graph.adjacency, graph.features), rounded, bank);
}

ClipSegmentation segment_clip(Model& model, const PreparedClip& clip, const PrototypeBank& bank,
                              const std::vector<std::int64_t>& frame_ids) {
  ClipSegmentation out;
  out.inference = infer(model, clip);
  out.labels = label_hard_clusters(out.inference.assignment, clip.graph, bank);
  out.inference.scene_graph.cluster_labels = out.labels.labels;
  out.maps = render_segmentation(out.inference.assignment, out.labels.labels, clip.grid, frame_ids);
  return out;
}

std::vector<std::pair<std::string, double>> EvaluationReport::scalars() const {
  std::vector<std::pair<std::string, double>> v{{"clips", static_cast<double>(clips)}};
  if (phase) {
    v.emplace_back("accuracy", phase->accuracy);
    v.emplace_back("macro_f1", phase->macro_f1);
    v.emplace_back("micro_f1", phase->micro_f1);
  }
  if (nmi) v.emplace_back("nmi", *nmi);
  if (segmentation) {
    v.emplace_back("pac", segmentation->pac);
    v.emplace_back("miou", segmentation->miou);
    if (segmentation->miou_anatomy) v.emplace_back("miou_ana", *segmentation->miou_anatomy);
    if (segmentation->miou_instrument) v.emplace_back("miou_ins", *segmentation->miou_instrument);
  }
  return v;
}

EvaluationReport evaluate_split(Model& model, const ClipDataset& dataset, const std::string& split,
                                const PrepareOptions& options, const PrototypeBank* bank,
                                const ClassGroups* groups) {
  const std::vector<const DatasetEntry*> entries = dataset.split(split);
  const std::vector<PreparedClip> clips = prepare_split(dataset, split, options);
  EvaluationReport report;
  report.clips = clips.size();
  if (clips.empty()) return report;

  std::vector<std::size_t> preds, labels, clusters, planted;
  std::vector<SegmentationMap> pred_maps, gt_maps;
  bool all_labeled = true, all_masked = true;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const DatasetEntry& e = *entries[i];
    const std::size_t frames = clips[i].graph.window;
    all_labeled = all_labeled && clips[i].label.has_value();
    all_masked = all_masked && e.masks.size() == e.clip.window;

    Inference inf;
    std::vector<SegmentationMap> maps;
    const std::vector<std::int64_t> ids(e.clip.frame_ids.end() - static_cast<std::ptrdiff_t>(frames),
                                        e.clip.frame_ids.end());
    if (bank != nullptr) {
      ClipSegmentation seg = segment_clip(model, clips[i], *bank, ids);
      inf = std::move(seg.inference);
      maps = std::move(seg.maps);
    } else {
      inf = infer(model, clips[i]);
    }
    if (clips[i].label) {
      preds.push_back(inf.phase.predicted);
      labels.push_back(*clips[i].label);
    }
    if (e.masks.size() == e.clip.window) {
      const std::vector<std::size_t> hard = inf.assignment.hard_labels();
      const std::vector<std::size_t> truth = planted_node_labels(e, frames);
      for (std::size_t k = 0; k < truth.size(); ++k) {
        if (truth[k] == std::numeric_limits<std::size_t>::max()) continue;
        clusters.push_back(hard[k]);
        planted.push_back(truth[k]);
      }
      if (bank != nullptr) {
        for (std::size_t t = e.clip.window - frames; t < e.clip.window; ++t)
          gt_maps.push_back(e.masks[t]);
        for (SegmentationMap& m : maps) pred_maps.push_back(std::move(m));
      }
    }
  }
  if (all_labeled) report.phase = phase_metrics(preds, labels);
  if (all_masked && !planted.empty()) {
    report.nmi = normalized_mutual_information(clusters, planted);
    if (bank != nullptr) {
      std::size_t classes = dataset.classes;
      for (const auto& [cls, proto] : bank->prototypes) classes = std::max(classes, cls + 1);
      report.segmentation = segmentation_metrics(pred_maps, gt_maps, classes, groups);
    }
  }
  return report;
}

}  // namespace dsg
