// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Set DSG_ACCEPT_ONLY=<substring> to run a subset.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "dsg/clustering.hpp"
#include "dsg/config.hpp"
#include "dsg/gradcheck.hpp"
#include "dsg/matcher.hpp"
#include "dsg/metrics.hpp"
#include "dsg/pipeline.hpp"
#include "dsg/synthetic.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace dsg;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Run {
  int status = -1;
  std::string output;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + DSG_CLI_PATH + "\" " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), got);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("dsg_accept_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Tensor2 random_graph(std::size_t n, double p, Rng& rng) {
  Tensor2 a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < p) a(i, j) = a(j, i) = rng.uniform(0.1, 1.0);
  return a;
}

// ---------------------------------------------------------------------------

Verdict gradient_suite() {
  const auto results = run_gradient_suite(1, 5);
  double worst = 0.0;
  std::string worst_name;
  bool ok = !results.empty();
  for (const GradcheckResult& r : results) {
    ok = ok && r.passed && r.max_relative_error <= 1e-4;
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = r.name;
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Run cli = run_cli("gradcheck");
  const double secs = seconds_since(t0);
  ok = ok && cli.status == 0 && secs < 60.0;
  return {ok, fmt("%zu checks over 5 seeds, worst rel err %.2e (%s); CLI exit %d in %.1fs (limit 60s)",
                  results.size(), worst, worst_name.c_str(), cli.status, secs)};
}

Verdict modularity_oracle() {
  Rng rng(20240601);
  double worst = 0.0;
  std::size_t partitions = 0;
  for (int draw = 0; draw < 50; ++draw) {
    const std::size_t n = 2 + rng.index(7);  // 2..8 nodes
    Tensor2 dense = random_graph(n, rng.uniform(0.2, 0.9), rng);
    if (SparseMatrix::from_dense(dense).total() == 0.0) dense(0, 1) = dense(1, 0) = 1.0;
    const SparseMatrix a = SparseMatrix::from_dense(dense);
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    std::vector<std::size_t> labels(n);
    for (std::size_t code = 0; code < total; ++code, ++partitions) {
      std::size_t c = code;
      for (std::size_t i = 0; i < n; ++i, c /= 3) labels[i] = c % 3;
      const double got = dmon_loss(one_hot_assignment(labels, 3), a).modularity_term;
      worst = std::max(worst, std::abs(got + oracle::modularity(dense, labels)));
    }
  }
  return {worst <= 1e-10, fmt("%zu partitions over 50 graphs, max |diff| %.2e (tol 1e-10)", partitions, worst)};
}

Verdict two_triangle_anchors() {
  Tensor2 dense(6, 6);
  for (auto [i, j] : {std::pair{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}})
    dense(i, j) = dense(j, i) = 1.0;
  const SparseMatrix a = SparseMatrix::from_dense(dense);
  const std::vector<std::size_t> ideal{0, 0, 0, 1, 1, 1};
  const ClusterAssignment c = one_hot_assignment(ideal, 2);
  const double mod = dmon_loss(c, a).modularity_term;
  const double cut = mincut_loss(c, a).cut_term;
  const double uniform = dmon_loss({Tensor2(6, 2, 0.5)}, a).collapse_term;
  double worst_one = 0.0;
  for (std::size_t k = 2; k <= 6; ++k) {
    Tensor2 one(6, k);
    for (std::size_t i = 0; i < 6; ++i) one(i, 0) = 1.0;
    worst_one = std::max(worst_one, std::abs(dmon_loss({one}, a).collapse_term - (std::sqrt(double(k)) - 1.0)));
  }
  const bool ok = std::abs(mod + 0.5) <= 1e-10 && std::abs(cut + 1.0) <= 1e-10 &&
                  std::abs(uniform) <= 1e-10 && worst_one <= 1e-10;
  return {ok, fmt("modularity %.12f, cut %.12f, uniform collapse %.1e, one-cluster max err %.1e",
                  mod, cut, uniform, worst_one)};
}

Verdict planted_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticSpec spec;  // 3 classes, d = 32, sigma = 0.1, WS = 4
  spec.clips = 200;
  spec.test_clips = 50;
  spec.grid = {6, 6};
  spec.min_side = spec.max_side = 3;
  spec.presence = 0.7;
  spec.seed = 7;
  const SyntheticData data = generate_synthetic(spec);
  TrainConfig cfg = train_config_from(ConfigFile::load(fs::path(DSG_SOURCE_DIR) / "configs/planted.toml"));
  cfg.threads = 1;
  const ClipDataset& ds = data.dataset;
  Model model(model_config_for(ds, cfg), cfg.seed);
  const auto train_set = prepare_split(ds, "train", cfg.prepare);
  train(model, train_set, {}, cfg);
  const PrototypeBank bank =
      build_prototypes(resolve_annotations(ds, data.annotations), ds.classes, cfg.prepare.graph.normalize);
  const EvaluationReport r = evaluate_split(model, ds, "test", cfg.prepare, &bank);
  const double secs = seconds_since(t0);
  const double nmi = r.nmi.value_or(0.0), miou = r.segmentation ? r.segmentation->miou : 0.0;
  const double acc = r.phase ? r.phase->accuracy : 0.0;
  const bool ok = nmi >= 0.9 && miou >= 0.9 && acc >= 0.95 && secs <= 600.0;
  return {ok, fmt("K=%zu lr=%g epochs=%zu batch=%zu on %zu test clips: NMI %.3f (>=0.9), mIoU %.3f (>=0.9), "
                  "accuracy %.3f (>=0.95), %.0fs (<=600s)",
                  cfg.model.clustering.clusters, cfg.learning_rate, cfg.epochs, cfg.batch_size,
                  r.clips, nmi, miou, acc, secs)};
}

Verdict joint_vs_frozen() {
  std::string detail;
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    // Phase = presence of class 1, whose mean sits at cosine 0.95 to the
    // background and which covers at most a 2x2 region.
    SyntheticSpec spec;
    spec.rule = PhaseRule::kKeyClass;
    spec.key_class = 1;
    spec.key_background_cosine = 0.95;
    spec.key_min_side = 1;
    spec.key_max_side = 2;
    spec.grid = {6, 6};
    spec.min_side = spec.max_side = 3;
    spec.clips = 200;
    spec.test_clips = 50;
    spec.seed = seed;
    const SyntheticData data = generate_synthetic(spec);
    const ClipDataset& ds = data.dataset;
    const PrototypeBank bank = build_prototypes(resolve_annotations(ds, data.annotations), ds.classes);

    TrainConfig cfg;
    cfg.model.clustering.clusters = 4;
    cfg.learning_rate = 3e-3;
    cfg.epochs = 30;
    cfg.seed = seed;
    cfg.threads = 1;
    Model model(model_config_for(ds, cfg), seed);
    train(model, prepare_split(ds, "train", cfg.prepare), {}, cfg);

    const auto test = prepare_split(ds, "test", cfg.prepare);
    const auto entries = ds.split("test");
    std::vector<SegmentationMap> joint_maps, frozen_maps, truth;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const std::vector<std::int64_t>& ids = entries[i]->clip.frame_ids;
      ClipSegmentation seg = segment_clip(model, test[i], bank, ids);
      joint_maps.insert(joint_maps.end(), seg.maps.begin(), seg.maps.end());
      PerClipClusteringOptions per_clip;
      per_clip.head = cfg.model.clustering;
      per_clip.seed = seed * 1000 + i;
      const ClusterAssignment c = optimize_clustering(test[i].graph, per_clip);
      const ClusterLabels labels = label_hard_clusters(c, test[i].graph, bank);
      const auto maps = render_segmentation(c, labels.labels, test[i].grid, ids);
      frozen_maps.insert(frozen_maps.end(), maps.begin(), maps.end());
      truth.insert(truth.end(), entries[i]->masks.begin(), entries[i]->masks.end());
    }
    const double joint = segmentation_metrics(joint_maps, truth, ds.classes).class_iou[1].value_or(0.0);
    const double frozen = segmentation_metrics(frozen_maps, truth, ds.classes).class_iou[1].value_or(0.0);
    wins += joint > frozen;
    detail += fmt("%sseed %d %.3f vs %.3f", seed > 1 ? ", " : "", int(seed), joint, frozen);
  }
  return {wins == 5, fmt("key-class IoU joint vs per-clip, %d/5 strict wins (need 5/5): ", wins) + detail};
}

Verdict temporal_ablation() {
  double sum8 = 0.0, sum1 = 0.0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticSpec spec;
    spec.rule = PhaseRule::kTemporalEvent;
    spec.window = 8;
    spec.grid = {6, 6};
    spec.min_side = spec.max_side = 3;
    spec.clips = 250;
    spec.test_clips = 50;
    spec.seed = seed;
    const SyntheticData data = generate_synthetic(spec);
    const ClipDataset& ds = data.dataset;
    double acc[2];
    for (int mode = 0; mode < 2; ++mode) {
      TrainConfig cfg;
      cfg.model.clustering.clusters = 4;
      cfg.learning_rate = 3e-3;
      cfg.epochs = 30;
      cfg.seed = seed;
      cfg.threads = 1;
      cfg.prepare.window_size = mode == 0 ? 8 : 1;
      cfg.prepare.graph.encodings.temporal = mode == 0;
      Model model(model_config_for(ds, cfg), seed);
      train(model, prepare_split(ds, "train", cfg.prepare), {}, cfg);
      acc[mode] = evaluate_phases(model, prepare_split(ds, "test", cfg.prepare)).accuracy;
    }
    sum8 += acc[0];
    sum1 += acc[1];
    detail += fmt("%s%.2f/%.2f", seed > 1 ? " " : "", acc[0], acc[1]);
  }
  const double gap = (sum8 - sum1) / 5.0 * 100.0;
  return {gap >= 10.0, fmt("mean accuracy WS8 %.3f vs WS1 %.3f, gap %.1f points (need >=10); per seed WS8/WS1: ",
                           sum8 / 5, sum1 / 5, gap) + detail};
}

Verdict metrics_oracle() {
  Rng rng(99);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t frames = 1 + rng.index(3);
    std::vector<SegmentationMap> pred(frames), gt(frames);
    for (std::size_t f = 0; f < frames; ++f) {
      pred[f] = gt[f] = {std::int64_t(f), {4, 4}, std::vector<std::int64_t>(16)};
      for (std::size_t i = 0; i < 16; ++i) {
        pred[f].labels[i] = std::int64_t(rng.index(3));
        gt[f].labels[i] = std::int64_t(rng.index(3));
      }
    }
    const SegmentationMetrics m = segmentation_metrics(pred, gt, 3);
    const oracle::SegTally t = oracle::seg_tally(pred, gt);
    mismatches += m.pac != t.pac || std::abs(m.miou - t.miou) > 1e-15;

    const std::size_t n = 1 + rng.index(20);
    std::vector<std::size_t> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.index(4);
      g[i] = rng.index(4);
    }
    const PhaseMetrics pm = phase_metrics(p, g);
    const oracle::PhaseTally pt = oracle::phase_tally(p, g);
    mismatches += pm.accuracy != pt.accuracy || std::abs(pm.macro_f1 - pt.macro_f1) > 1e-15;
  }
  using L = std::vector<std::size_t>;
  const PhaseMetrics same = phase_metrics(L{0, 1, 1}, L{0, 1, 1});
  const PhaseMetrics binary = phase_metrics(L{1, 1, 0, 0}, L{1, 0, 1, 0});
  const PhaseMetrics constant = phase_metrics(L{1, 1, 1, 1}, L{0, 0, 1, 1});
  std::vector<SegmentationMap> a{{0, {2, 2}, {0, 0, 1, 1}}}, b{{0, {2, 2}, {0, 1, 1, 1}}};
  const SegmentationMetrics seg = segmentation_metrics(a, b, 3);
  const SegmentationMetrics perfect = segmentation_metrics(b, b, 3);
  const bool hand = same.accuracy == 1.0 && same.macro_f1 == 1.0 && binary.accuracy == 0.5 &&
                    binary.macro_f1 == 0.5 && constant.accuracy == 0.5 &&
                    std::abs(constant.macro_f1 - 1.0 / 3) < 1e-15 && seg.pac == 0.75 &&
                    std::abs(seg.miou - 7.0 / 12) < 1e-15 && !seg.class_iou[2] &&
                    perfect.pac == 1.0 && perfect.miou == 1.0;
  return {mismatches == 0 && hand,
          fmt("%zu mismatches over 200 segmentation + 200 phase cases; hand examples %s", mismatches,
              hand ? "hold" : "FAIL")};
}

Verdict determinism() {
  const fs::path dir = scratch_dir("det");
  Run synth = run_cli("synth --out " + (dir / "data").string() +
                      " --clips 24 --val 4 --test 4 --window 3 --grid 4x4 --dim 16 --seed 5");
  std::ofstream(dir / "c.toml") << "K = 4\nepochs = 3\nlr = 0.005\nbatch = 8\nthreads = 4\n";
  ::setenv("DSG_DETERMINISTIC", "1", 1);
  std::vector<std::string> history, ckpt, metrics;
  int failures = synth.status != 0;
  for (int run = 0; run < 2; ++run) {
    const fs::path out = dir / ("run" + std::to_string(run));
    const Run t = run_cli("train --config " + (dir / "c.toml").string() + " --seed 7 --data " +
                          (dir / "data").string() + " --out " + out.string());
    const Run e = run_cli("eval --model " + out.string() + " --data " + (dir / "data").string() +
                          " --split test --csv " + (out / "metrics.csv").string());
    failures += t.status != 0 || e.status != 0;
    history.push_back(slurp(out / "history.csv"));
    ckpt.push_back(slurp(out / "model.dsgw"));
    metrics.push_back(slurp(out / "metrics.csv"));
  }
  ::unsetenv("DSG_DETERMINISTIC");
  fs::remove_all(dir);
  const bool same = history[0] == history[1] && ckpt[0] == ckpt[1] && metrics[0] == metrics[1];
  const bool ok = failures == 0 && same && !ckpt[0].empty() && !history[0].empty();
  return {ok, fmt("history.csv %s, metrics.csv %s, model.dsgw %s (%zu bytes); command failures %d",
                  history[0] == history[1] ? "identical" : "DIFFER",
                  metrics[0] == metrics[1] ? "identical" : "DIFFER",
                  ckpt[0] == ckpt[1] ? "identical" : "DIFFER", ckpt[0].size(), failures)};
}

Verdict matcher_properties() {
  Rng rng(7);
  auto normal = [&](std::size_t r, std::size_t c) {
    Tensor2 t(r, c);
    for (double& v : t.values()) v = rng.normal();
    return t;
  };
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t na = 1 + rng.index(9), nb = 1 + rng.index(9), d = 1 + rng.index(5);
    const Tensor2 a = normal(na, d), b = normal(nb, d);
    const double conf = rng.uniform(-0.2, 0.9);
    const MatchList m = mutual_nn_match(a, b, conf);
    std::set<std::size_t> left, right;
    for (const Match& p : m.pairs)
      violations += !left.insert(p.left).second || !right.insert(p.right).second ||
                    p.confidence < 0.0 || p.confidence > 1.0;
    const MatchList want = oracle::mutual_nn(a, b, conf);
    violations += m.pairs.size() != want.pairs.size();
    for (std::size_t k = 0; k < std::min(m.pairs.size(), want.pairs.size()); ++k)
      violations += m.pairs[k].left != want.pairs[k].left || m.pairs[k].right != want.pairs[k].right;
  }
  const Tensor2 x = normal(12, 6);
  const MatchList self = mutual_nn_match(x, x, 0.7);
  bool identity = self.pairs.size() == 12;
  for (std::size_t i = 0; i < self.pairs.size(); ++i)
    identity = identity && self.pairs[i].left == i && self.pairs[i].right == i;
  const Tensor2 a(3, 2, {1.0, 0.0, 0.0, 1.0, 0.8, 0.6});
  const Tensor2 b(3, 2, {-1.0, 0.0, 0.707, 0.707, 0.0, -1.0});
  bool asymmetric = true;
  for (const Match& p : mutual_nn_match(a, b, 0.0).pairs) asymmetric = asymmetric && !(p.left == 0 && p.right == 1);
  return {violations == 0 && identity && asymmetric,
          fmt("1000 random pairs: %zu violations; identity %s; asymmetric case %s", violations,
              identity ? "holds" : "FAILS", asymmetric ? "gives no pair" : "PAIRS")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient-suite", gradient_suite},
      {"modularity-oracle", modularity_oracle},
      {"two-triangle-anchors", two_triangle_anchors},
      {"planted-recovery", planted_recovery},
      {"joint-vs-frozen", joint_vs_frozen},
      {"temporal-ablation", temporal_ablation},
      {"metrics-oracle", metrics_oracle},
      {"determinism", determinism},
      {"matcher-properties", matcher_properties},
  };
  const char* only = std::getenv("DSG_ACCEPT_ONLY");
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    if (only != nullptr && name.find(only) == std::string::npos) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %-22s %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
