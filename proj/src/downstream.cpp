#include "dsg/downstream.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <thread>

#include "dsg/error.hpp"
#include "dsg/metrics.hpp"
#include "dsg/ops.hpp"

namespace dsg {

EdgeWeightHead::EdgeWeightHead(std::size_t feature_dim, std::size_t hidden, Rng& rng,
                               const std::string& prefix)
    : feature_dim_(feature_dim),
      w1_(prefix + ".fc1.weight", glorot_uniform(2 * feature_dim, hidden, rng)),
      b1_(prefix + ".fc1.bias", Tensor2(1, hidden)),
      w2_(prefix + ".fc2.weight", glorot_uniform(hidden, 1, rng)),
      b2_(prefix + ".fc2.bias", Tensor2(1, 1)) {}

Var EdgeWeightHead::forward(Tape& tape, Var pooled_features) {
  if (pooled_features.cols() != feature_dim_)
    throw ShapeError("edge head expects " + std::to_string(feature_dim_) + "-dim features, got " +
                     std::to_string(pooled_features.cols()));
  const std::size_t k = pooled_features.rows();
  Var pairs = pair_concat(pooled_features);
  Var h = selu(dense(pairs, tape.parameter(w1_), tape.parameter(b1_)));
  Var z = dense(h, tape.parameter(w2_), tape.parameter(b2_));
  return symmetrize(reshape(sigmoid(z), k, k));
}

std::vector<Parameter*> EdgeWeightHead::parameters() { return {&w1_, &b1_, &w2_, &b2_}; }

PhaseClassifier::PhaseClassifier(std::size_t feature_dim, const std::vector<std::size_t>& hidden,
                                 std::size_t phases, Rng& rng, const std::string& prefix)
    : phases_(phases) {
  if (phases < 2) throw ConfigError("phase classifier needs at least 2 phases");
  std::size_t in = feature_dim;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    gcn_weights_.emplace_back(prefix + ".gcn" + std::to_string(l) + ".weight",
                              glorot_uniform(in, hidden[l], rng));
    in = hidden[l];
  }
  out_weight_ = Parameter(prefix + ".out.weight", glorot_uniform(in, phases, rng));
  out_bias_ = Parameter(prefix + ".out.bias", Tensor2(1, phases));
}

Var PhaseClassifier::forward(Tape& tape, Var adjacency, Var edge_weights, Var pooled_features) {
  Var gated = hadamard(adjacency, edge_weights);
  Var h = pooled_features;
  for (Parameter& w : gcn_weights_) h = gcn_layer(gated, h, tape.parameter(w), Activation::kSelu);
  return dense(sum_rows(h), tape.parameter(out_weight_), tape.parameter(out_bias_));
}

std::vector<Parameter*> PhaseClassifier::parameters() {
  std::vector<Parameter*> out;
  for (Parameter& w : gcn_weights_) out.push_back(&w);
  out.push_back(&out_weight_);
  out.push_back(&out_bias_);
  return out;
}

namespace {

// Each head draws from its own stream so changing one head's shape leaves the
// others' initialization untouched.
Rng head_rng(std::uint64_t seed, std::uint64_t head) {
  return Rng(seed * 0x9E3779B97F4A7C15ULL + head);
}

ClusteringHead make_clustering(const ModelConfig& c, std::uint64_t seed) {
  Rng rng = head_rng(seed, 1);
  return ClusteringHead(c.input_dim, c.clustering, rng);
}
EdgeWeightHead make_edges(const ModelConfig& c, std::uint64_t seed) {
  Rng rng = head_rng(seed, 2);
  return EdgeWeightHead(c.input_dim, c.edge_hidden, rng);
}
PhaseClassifier make_classifier(const ModelConfig& c, std::uint64_t seed) {
  Rng rng = head_rng(seed, 3);
  return PhaseClassifier(c.input_dim, c.classifier_hidden, c.phases, rng);
}

}  // namespace

Model::Model(const ModelConfig& config, std::uint64_t seed)
    : config_(config),
      clustering_(make_clustering(config, seed)),
      edges_(make_edges(config, seed)),
      classifier_(make_classifier(config, seed)) {
  if (config.input_dim == 0) throw ConfigError("model input dimension must be positive");
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out = clustering_.parameters();
  for (Parameter* p : downstream_parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> Model::downstream_parameters() {
  std::vector<Parameter*> out = edges_.parameters();
  for (Parameter* p : classifier_.parameters()) out.push_back(p);
  return out;
}

PreparedClip prepare_clip(const FeatureClip& clip, const PrepareOptions& options,
                          const ClipMatches* matches) {
  clip.validate();
  const std::size_t ws = options.window_size == 0 ? clip.window : options.window_size;
  if (ws > clip.window) {
    throw InvalidArgument("window size " + std::to_string(ws) + " exceeds the clip's " +
                          std::to_string(clip.window) + " frames");
  }
  const FeatureClip window = ws == clip.window ? clip : clip.last_frames(ws);
  const std::size_t offset = clip.window - ws;

  ClipMatches links;
  if (matches != nullptr) {
    for (const auto& [t, list] : *matches) {
      if (t < offset) continue;
      links[t - offset] = list;
    }
  } else {
    links = match_clip(MutualNearestNeighborMatcher(options.match_min_confidence),
                       window.features, window.window, window.patches);
  }

  const DynamicGraph g = build_dynamic_graph(window, options.graph, links);
  PreparedClip out;
  out.graph = PreparedGraph::from(g, options.spatial_weight, options.temporal_weight);
  out.label = window.phase_label;
  if (!window.frame_ids.empty()) out.frame_span = {window.frame_ids.front(), window.frame_ids.back()};
  out.grid = window.grid;
  return out;
}

namespace {

double pooled_scale(const Model& model, std::size_t nodes) {
  return model.config().scale_pooled_features ? 1.0 / static_cast<double>(nodes) : 1.0;
}

}  // namespace

ModelForward forward(Model& model, Tape& tape, const PreparedGraph& graph) {
  ModelForward out;
  out.assignment = model.clustering().forward(tape, graph);
  const PooledVars pooled =
      pool_graph(out.assignment, tape.constant(graph.features), graph.adjacency);
  out.pooled_features = pooled.features;
  out.pooled_adjacency = pooled.adjacency;
  Var x = scale(pooled.features, pooled_scale(model, graph.nodes()));
  out.edge_weights = model.edges().forward(tape, x);
  out.logits = model.classifier().forward(tape, pooled.adjacency, out.edge_weights, x);
  return out;
}

JointLoss joint_loss(Model& model, Tape& tape, const PreparedClip& clip,
                     const ObjectiveConfig& objective) {
  if (!clip.label) throw InvalidArgument("joint_loss: clip has no phase label");
  if (*clip.label >= model.classifier().phases()) {
    throw InvalidArgument("joint_loss: label " + std::to_string(*clip.label) +
                          " >= phase count " + std::to_string(model.classifier().phases()));
  }
  JointLoss out;
  out.forward = forward(model, tape, clip.graph);
  const ClusteringLossVar lu =
      objective.objective == ClusteringObjective::kDmon
          ? dmon_loss(out.forward.assignment, clip.graph.adjacency, objective.regularization_weight)
          : mincut_loss(out.forward.assignment, clip.graph.adjacency,
                        objective.regularization_weight);
  const std::size_t label = *clip.label;
  Var ce = softmax_cross_entropy(out.forward.logits, std::span<const std::size_t>(&label, 1));
  out.total = add(scale(lu.total, objective.unsupervised_weight),
                  scale(ce, objective.supervised_weight));
  out.report.unsupervised = lu.terms.total;
  out.report.supervised = ce.value()[0];
  out.report.joint = out.total.value()[0];
  out.report.terms = lu.terms;
  return out;
}

namespace {

PhasePrediction prediction_from_logits(const Tensor2& logits) {
  PhasePrediction p;
  p.logits = logits;
  p.probs = softmax_rows(logits);
  p.predicted = argmax_rows(p.probs).front();
  return p;
}

}  // namespace

Inference infer(Model& model, const PreparedClip& clip) {
  Tape tape;
  const ModelForward fw = forward(model, tape, clip.graph);
  Inference out;
  out.assignment.matrix = fw.assignment.value();
  out.scene_graph.features = fw.pooled_features.value();
  out.scene_graph.adjacency = fw.pooled_adjacency.value();
  out.scene_graph.edge_weights = fw.edge_weights.value();
  out.scene_graph.frame_span = clip.frame_span;
  out.phase = prediction_from_logits(fw.logits.value());
  return out;
}

Tensor2 predict_edge_weights(Model& model, PooledSceneGraph& sg, std::size_t nodes) {
  Tape tape;
  Var x = tape.constant(sg.features * pooled_scale(model, nodes));
  sg.edge_weights = model.edges().forward(tape, x).value();
  return sg.edge_weights;
}

PhasePrediction classify_phase(Model& model, const PooledSceneGraph& sg, std::size_t nodes) {
  Tape tape;
  Var x = tape.constant(sg.features * pooled_scale(model, nodes));
  Var logits = model.classifier().forward(tape, tape.constant(sg.adjacency),
                                          tape.constant(sg.edge_weights), x);
  return prediction_from_logits(logits.value());
}

bool deterministic_mode() {
  const char* v = std::getenv("DSG_DETERMINISTIC");
  return v != nullptr && std::string(v) == "1";
}

namespace {

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested;
  if (deterministic_mode()) n = 1;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs fn(i) for i in [0, jobs). Results must be written to per-index slots;
// the first exception (by index) is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t jobs, std::size_t threads, Fn fn) {
  const std::size_t workers = worker_count(threads, jobs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < jobs; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

struct ClipGradient {
  JointLossReport report;
  std::vector<std::pair<Parameter*, Tensor2>> grads;
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string history_to_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,L_u,L_CE,L_joint,val_acc,val_f1\n";
  for (const EpochRecord& r : history) {
    out += std::to_string(r.epoch) + "," + format_double(r.unsupervised) + "," +
           format_double(r.supervised) + "," + format_double(r.joint) + "," +
           format_double(r.val_accuracy) + "," + format_double(r.val_f1) + "\n";
  }
  return out;
}

PhaseEvaluation evaluate_phases(Model& model, std::span<const PreparedClip> clips,
                                std::size_t threads) {
  PhaseEvaluation out;
  out.predictions.resize(clips.size());
  out.labels.resize(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (!clips[i].label) throw InvalidArgument("evaluation clip " + std::to_string(i) + " has no label");
    out.labels[i] = *clips[i].label;
  }
  parallel_for(clips.size(), threads,
               [&](std::size_t i) { out.predictions[i] = infer(model, clips[i]).phase.predicted; });
  if (!clips.empty()) {
    const PhaseMetrics m = phase_metrics(out.predictions, out.labels);
    out.accuracy = m.accuracy;
    out.macro_f1 = m.macro_f1;
  }
  return out;
}

TrainResult train(Model& model, std::span<const PreparedClip> train_set,
                  std::span<const PreparedClip> val_set, const TrainConfig& config,
                  const TrainOutputs& outputs) {
  if (train_set.empty()) throw InvalidArgument("train: empty training set");
  if (config.batch_size == 0) throw ConfigError("batch must be positive");
  const std::size_t phases = model.classifier().phases();
  auto check_labels = [phases](std::span<const PreparedClip> clips, const char* split) {
    for (std::size_t i = 0; i < clips.size(); ++i) {
      if (!clips[i].label)
        throw InvalidArgument(std::string(split) + " clip " + std::to_string(i) + " has no label");
      if (*clips[i].label >= phases) {
        throw InvalidArgument(std::string(split) + " clip " + std::to_string(i) + ": label " +
                              std::to_string(*clips[i].label) + " >= phase count " +
                              std::to_string(phases));
      }
    }
  };
  check_labels(train_set, "train");
  check_labels(val_set, "val");

  const std::vector<Parameter*> all = model.parameters();
  const std::vector<Parameter*> trainable =
      config.freeze_clustering ? model.downstream_parameters() : all;
  Adam adam(trainable, AdamConfig{.learning_rate = config.learning_rate});
  Rng order_rng(config.seed ^ 0x5DEECE66DULL);

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  std::vector<Tensor2> best_values;
  auto snapshot = [&] {
    best_values.clear();
    for (Parameter* p : all) best_values.push_back(p->value);
  };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(order);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      std::vector<ClipGradient> grads(count);
      parallel_for(count, config.threads, [&](std::size_t b) {
        Tape tape;
        JointLoss loss = joint_loss(model, tape, train_set[order[start + b]], config.objective);
        tape.backward(loss.total);
        grads[b].report = loss.report;
        grads[b].grads = tape.parameter_gradients();
      });
      for (Parameter* p : all) p->zero_grad();
      for (const ClipGradient& g : grads) {
        for (const auto& [p, value] : g.grads) p->grad += value;
        rec.unsupervised += g.report.unsupervised;
        rec.supervised += g.report.supervised;
        rec.joint += g.report.joint;
      }
      for (Parameter* p : all) p->grad *= 1.0 / static_cast<double>(count);
      adam.step();
    }
    const double n = static_cast<double>(train_set.size());
    rec.unsupervised /= n;
    rec.supervised /= n;
    rec.joint /= n;

    bool improved = false;
    if (!val_set.empty()) {
      const PhaseEvaluation ev = evaluate_phases(model, val_set, config.threads);
      rec.val_accuracy = ev.accuracy;
      rec.val_f1 = ev.macro_f1;
      improved = ev.macro_f1 > result.best_val_f1;
    } else {
      rec.val_accuracy = rec.val_f1 = std::numeric_limits<double>::quiet_NaN();
      improved = true;
    }
    if (improved) {
      result.best_epoch = epoch;
      result.best_val_f1 = val_set.empty() ? -1.0 : rec.val_f1;
      snapshot();
      if (outputs.checkpoint) save_checkpoint(*outputs.checkpoint, all, &adam);
    }
    result.history.push_back(rec);
    if (outputs.history_csv) {
      std::ofstream os(*outputs.history_csv, std::ios::binary | std::ios::trunc);
      if (!os) throw Error("cannot write " + outputs.history_csv->string());
      os << history_to_csv(result.history);
    }
    if (outputs.on_epoch) outputs.on_epoch(rec);
  }

  if (!best_values.empty()) {
    for (std::size_t i = 0; i < all.size(); ++i) all[i]->value = best_values[i];
  } else if (outputs.checkpoint) {
    save_checkpoint(*outputs.checkpoint, all, &adam);
  }
  return result;
}

}  // namespace dsg
