#include "dsg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dsg/error.hpp"
#include "json.hpp"

namespace dsg {

PhaseMetrics phase_metrics(std::span<const std::size_t> predictions,
                           std::span<const std::size_t> labels) {
  if (predictions.size() != labels.size()) {
    throw InvalidArgument("phase_metrics: " + std::to_string(predictions.size()) +
                          " predictions for " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw InvalidArgument("phase_metrics: no items");
  std::size_t classes = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    classes = std::max({classes, labels[i] + 1, predictions[i] + 1});

  PhaseMetrics m;
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++m.confusion[labels[i]][predictions[i]];
    if (labels[i] == predictions[i]) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());

  double f1_sum = 0.0;
  std::size_t counted = 0;
  std::size_t tp_all = 0, fp_all = 0, fn_all = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t tp = m.confusion[c][c], fp = 0, fn = 0;
    for (std::size_t o = 0; o < classes; ++o) {
      if (o == c) continue;
      fp += m.confusion[o][c];
      fn += m.confusion[c][o];
    }
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
    if (tp + fp + fn == 0) continue;
    f1_sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    ++counted;
  }
  m.macro_f1 = counted == 0 ? 0.0 : f1_sum / static_cast<double>(counted);
  m.micro_f1 = 2.0 * static_cast<double>(tp_all) / static_cast<double>(2 * tp_all + fp_all + fn_all);
  return m;
}

ClassGroups parse_class_groups(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("class groups: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("class groups: expected a JSON object");
  ClassGroups out;
  for (const auto& [key, value] : j.items()) {
    std::size_t idx = 0;
    std::size_t used = 0;
    try {
      idx = std::stoul(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != key.size())
      throw FormatError("class groups: key '" + key + "' is not a class index");
    if (!value.is_string()) throw FormatError("class groups: value for " + key + " is not a string");
    const std::string g = value.get<std::string>();
    if (g == "anatomy") out[idx] = ClassGroup::kAnatomy;
    else if (g == "instrument") out[idx] = ClassGroup::kInstrument;
    else if (g == "misc") out[idx] = ClassGroup::kMisc;
    else throw FormatError("class groups: unknown group '" + g + "' for class " + key);
  }
  return out;
}

ClassGroups load_class_groups(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open class groups file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_class_groups(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

SegmentationMetrics segmentation_metrics(std::span<const SegmentationMap> predictions,
                                         std::span<const SegmentationMap> ground_truth,
                                         std::size_t num_classes, const ClassGroups* groups) {
  if (predictions.size() != ground_truth.size()) {
    throw ShapeError("segmentation_metrics: " + std::to_string(predictions.size()) +
                     " predicted maps for " + std::to_string(ground_truth.size()) +
                     " ground-truth maps");
  }
  SegmentationMetrics m;
  m.intersection.assign(num_classes, 0);
  m.union_count.assign(num_classes, 0);
  std::vector<std::uint64_t> pred_count(num_classes, 0), gt_count(num_classes, 0);

  auto check_class = [num_classes](std::int64_t c, std::size_t frame, const char* which) {
    if (c >= static_cast<std::int64_t>(num_classes)) {
      throw InvalidArgument("segmentation_metrics: unknown class " + std::to_string(c) + " in " +
                            which + " map " + std::to_string(frame));
    }
  };

  for (std::size_t f = 0; f < predictions.size(); ++f) {
    const SegmentationMap& p = predictions[f];
    const SegmentationMap& g = ground_truth[f];
    if (p.labels.size() != g.labels.size() || !(p.grid == g.grid)) {
      throw ShapeError("segmentation_metrics: map " + std::to_string(f) + " has shape " +
                       std::to_string(p.grid.rows) + "x" + std::to_string(p.grid.cols) +
                       " vs ground truth " + std::to_string(g.grid.rows) + "x" +
                       std::to_string(g.grid.cols));
    }
    for (std::size_t i = 0; i < g.labels.size(); ++i) {
      const std::int64_t gt = g.labels[i];
      const std::int64_t pr = p.labels[i];
      check_class(gt, f, "ground-truth");
      check_class(pr, f, "predicted");
      if (gt < 0) continue;
      ++m.scored;
      ++gt_count[static_cast<std::size_t>(gt)];
      if (pr >= 0) ++pred_count[static_cast<std::size_t>(pr)];
      if (pr == gt) {
        ++m.correct;
        ++m.intersection[static_cast<std::size_t>(gt)];
      }
    }
  }
  m.pac = m.scored == 0 ? 0.0 : static_cast<double>(m.correct) / static_cast<double>(m.scored);

  m.class_iou.assign(num_classes, std::nullopt);
  double sum = 0.0, sum_ana = 0.0, sum_ins = 0.0;
  std::size_t n = 0, n_ana = 0, n_ins = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    m.union_count[c] = pred_count[c] + gt_count[c] - m.intersection[c];
    if (m.union_count[c] == 0) continue;
    const double iou =
        static_cast<double>(m.intersection[c]) / static_cast<double>(m.union_count[c]);
    m.class_iou[c] = iou;
    sum += iou;
    ++n;
    if (groups != nullptr) {
      auto it = groups->find(c);
      if (it == groups->end()) continue;
      if (it->second == ClassGroup::kAnatomy) {
        sum_ana += iou;
        ++n_ana;
      } else if (it->second == ClassGroup::kInstrument) {
        sum_ins += iou;
        ++n_ins;
      }
    }
  }
  m.miou = n == 0 ? 0.0 : sum / static_cast<double>(n);
  if (n_ana > 0) m.miou_anatomy = sum_ana / static_cast<double>(n_ana);
  if (n_ins > 0) m.miou_instrument = sum_ins / static_cast<double>(n_ins);
  return m;
}

double normalized_mutual_information(std::span<const std::size_t> a,
                                     std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw InvalidArgument("nmi: labelings differ in length");
  if (a.empty()) throw InvalidArgument("nmi: empty labelings");
  std::map<std::size_t, double> pa, pb;
  std::map<std::pair<std::size_t, std::size_t>, double> pab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
    pab[{a[i], b[i]}] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  auto entropy = [n](const std::map<std::size_t, double>& counts) {
    double h = 0.0;
    for (const auto& [k, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double ha = entropy(pa), hb = entropy(pb);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  double mi = 0.0;
  for (const auto& [key, c] : pab)
    mi += (c / n) * std::log(c * n / (pa[key.first] * pb[key.second]));
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

std::string metrics_csv(const std::vector<std::pair<std::string, double>>& values) {
  std::string header, row;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) {
      header += ",";
      row += ",";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", values[i].second);
    header += values[i].first;
    row += buf;
  }
  return header + "\n" + row + "\n";
}

}  // namespace dsg
