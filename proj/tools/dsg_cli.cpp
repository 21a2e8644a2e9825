// Command-line front end: synth, train, eval, segment, export-graph, gradcheck.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dsg/config.hpp"
#include "dsg/downstream.hpp"
#include "dsg/error.hpp"
#include "dsg/gradcheck.hpp"
#include "dsg/io.hpp"
#include "dsg/pipeline.hpp"
#include "dsg/prototype.hpp"
#include "dsg/synthetic.hpp"

namespace fs = std::filesystem;
using namespace dsg;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
}

Grid parse_grid(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) throw ConfigError("grid must look like 5x5, got '" + text + "'");
  try {
    return {std::stoul(text.substr(0, x)), std::stoul(text.substr(x + 1))};
  } catch (const std::exception&) {
    throw ConfigError("grid must look like 5x5, got '" + text + "'");
  }
}

PhaseRule parse_rule(const std::string& s) {
  if (s == "present") return PhaseRule::kPresentSet;
  if (s == "key") return PhaseRule::kKeyClass;
  if (s == "temporal") return PhaseRule::kTemporalEvent;
  throw ConfigError("unknown phase rule '" + s + "' (present, key, temporal)");
}

struct ModelDir {
  TrainConfig config;
  fs::path checkpoint;
};

ModelDir open_model_dir(const fs::path& dir) {
  ModelDir m;
  m.config = train_config_from(ConfigFile::load(dir / "config.toml"));
  m.checkpoint = dir / "model.dsgw";
  if (!fs::exists(m.checkpoint)) throw FormatError("missing checkpoint " + m.checkpoint.string());
  return m;
}

Model load_model(const ModelDir& md, const ClipDataset& ds) {
  Model model(model_config_for(ds, md.config), md.config.seed);
  const std::vector<Parameter*> params = model.parameters();
  load_checkpoint(md.checkpoint, params);
  return model;
}

PrototypeBank bank_from_annotations(const ClipDataset& ds, const fs::path& file,
                                    const TrainConfig& cfg) {
  const std::vector<AnnotatedFrame> frames = resolve_annotations(ds, load_annotations(file));
  PrototypeBank bank = build_prototypes(frames, ds.classes, cfg.prepare.graph.normalize);
  for (std::size_t c : bank.excluded)
    std::cerr << "warning: class " << c << " has no annotated patches and is excluded\n";
  return bank;
}

void print_scalars(const std::vector<std::pair<std::string, double>>& v) {
  for (const auto& [k, x] : v) std::printf("%s=%.6f\n", k.c_str(), x);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic scene graph toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a planted synthetic dataset");
  SyntheticSpec spec;
  std::string synth_out, grid_text = "5x5", rule_text = "present";
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--classes", spec.n_classes, "Classes including background");
  synth->add_option("--dim", spec.feature_dim, "Feature dimension");
  synth->add_option("--noise", spec.noise, "Per-patch noise sigma");
  synth->add_option("--jitter", spec.jitter, "Per-frame noise as a fraction of sigma");
  synth->add_option("--window", spec.window, "Frames per clip");
  synth->add_option("--clips", spec.clips, "Clip count");
  synth->add_option("--grid", grid_text, "Patch grid, e.g. 5x5");
  synth->add_option("--rule", rule_text, "Phase rule: present, key or temporal");
  synth->add_option("--key-class", spec.key_class, "Class the key/temporal rules depend on");
  synth->add_option("--key-cosine", spec.key_background_cosine,
                    "Cosine between the key class and background means");
  synth->add_option("--min-side", spec.min_side, "Smallest side of a class region");
  synth->add_option("--max-side", spec.max_side, "Largest side of a class region");
  synth->add_option("--key-side", spec.key_max_side, "Largest side of the key class region");
  synth->add_option("--presence", spec.presence, "Probability that a class appears in a clip");
  synth->add_option("--val", spec.val_clips, "Clips in the val split");
  synth->add_option("--test", spec.test_clips, "Clips in the test split");
  synth->add_flag("--matches", spec.emit_matches, "Write planted identity match files");
  synth->add_option("--seed", spec.seed, "Random seed");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train clustering and phase heads jointly");
  std::string train_config, train_data, train_out;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::size_t> train_epochs;
  train_cmd->add_option("--config", train_config, "Training config (TOML key = value)")->required();
  train_cmd->add_option("--data", train_data, "Dataset directory or manifest")->required();
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->add_option("--seed", train_seed, "Override the config seed");
  train_cmd->add_option("--epochs", train_epochs, "Override the config epoch count");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score a trained model on a split");
  std::string eval_model, eval_data, eval_split = "test", eval_csv, eval_ann, eval_groups;
  eval_cmd->add_option("--model", eval_model, "Directory written by train")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset directory or manifest")->required();
  eval_cmd->add_option("--split", eval_split, "train, val or test");
  eval_cmd->add_option("--annotations", eval_ann, "Annotated frames for prototype labeling");
  eval_cmd->add_option("--groups", eval_groups, "Class group JSON for mIoU_ana / mIoU_ins");
  eval_cmd->add_option("--csv", eval_csv, "Write metrics CSV here");

  // segment
  auto* seg_cmd = app.add_subcommand("segment", "Label clusters with prototypes and render maps");
  std::string seg_model, seg_data, seg_ann, seg_out, seg_split = "test";
  bool seg_pgm = false, seg_dot = false;
  seg_cmd->add_option("--model", seg_model, "Directory written by train")->required();
  seg_cmd->add_option("--data", seg_data, "Dataset directory or manifest")->required();
  seg_cmd->add_option("--annotations", seg_ann, "Annotated frames (<= 5 per class)")->required();
  seg_cmd->add_option("--out", seg_out, "Output directory")->required();
  seg_cmd->add_option("--split", seg_split, "train, val or test");
  seg_cmd->add_flag("--pgm", seg_pgm, "Also write one PGM per frame");
  seg_cmd->add_flag("--scene-graph", seg_dot, "Also write scene graph JSON and DOT per clip");

  // export-graph
  auto* export_cmd = app.add_subcommand("export-graph", "Export a clip's dynamic graph");
  std::string ex_data, ex_clip, ex_out, ex_format = "json", ex_config;
  std::size_t ex_ws = 0;
  std::optional<double> ex_tau;
  export_cmd->add_option("--data", ex_data, "Dataset directory or manifest")->required();
  export_cmd->add_option("--clip", ex_clip, "Clip id (default: first clip)");
  export_cmd->add_option("--ws", ex_ws, "Window size (last frames of the clip); 0 = whole clip");
  export_cmd->add_option("--tau", ex_tau, "Similarity threshold");
  export_cmd->add_option("--config", ex_config, "Training config for graph options");
  export_cmd->add_option("--format", ex_format, "json or dot")->check(CLI::IsMember({"json", "dot"}));
  export_cmd->add_option("--out", ex_out, "Output file (default stdout)");

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  std::uint64_t grad_seed = 0;
  int grad_seeds = 5;
  grad_cmd->add_option("--seed", grad_seed, "First seed");
  grad_cmd->add_option("--seeds", grad_seeds, "Number of seeds")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << msg << "\n" << app.help();
    return 2;
  }

  try {
    if (*synth) {
      spec.grid = parse_grid(grid_text);
      spec.rule = parse_rule(rule_text);
      spec.key_min_side = std::min(spec.key_min_side, spec.key_max_side);
      const SyntheticData data = generate_synthetic(spec);
      save_dataset(data.dataset, synth_out);
      save_annotations(fs::path(synth_out) / "annotations.json", data.annotations);
      std::printf("clips=%zu phases=%zu w=%zu n=%zu d=%zu\n", data.dataset.entries.size(),
                  data.dataset.phases, data.dataset.window, data.dataset.patches,
                  data.dataset.dim);
    } else if (*train_cmd) {
      TrainConfig cfg = train_config_from(ConfigFile::load(train_config));
      if (train_seed) cfg.seed = *train_seed;
      if (train_epochs) cfg.epochs = *train_epochs;
      const ClipDataset ds = load_dataset(train_data);
      const std::vector<PreparedClip> tr = prepare_split(ds, "train", cfg.prepare);
      const std::vector<PreparedClip> va = prepare_split(ds, "val", cfg.prepare);
      fs::create_directories(train_out);
      write_text(fs::path(train_out) / "config.toml", to_config_text(cfg));
      Model model(model_config_for(ds, cfg), cfg.seed);
      TrainOutputs outputs;
      outputs.checkpoint = fs::path(train_out) / "model.dsgw";
      outputs.history_csv = fs::path(train_out) / "history.csv";
      outputs.on_epoch = [](const EpochRecord& r) {
        std::fprintf(stderr, "epoch %zu L_u=%.5f L_CE=%.5f L_joint=%.5f val_acc=%.4f val_f1=%.4f\n",
                     r.epoch, r.unsupervised, r.supervised, r.joint, r.val_accuracy, r.val_f1);
      };
      const TrainResult result = train(model, tr, va, cfg, outputs);
      std::printf("best_epoch=%zu best_val_f1=%.6f\n", result.best_epoch, result.best_val_f1);
    } else if (*eval_cmd) {
      const ModelDir md = open_model_dir(eval_model);
      const ClipDataset ds = load_dataset(eval_data);
      Model model = load_model(md, ds);
      std::optional<PrototypeBank> bank;
      if (!eval_ann.empty()) bank = bank_from_annotations(ds, eval_ann, md.config);
      std::optional<ClassGroups> groups;
      if (!eval_groups.empty()) groups = load_class_groups(eval_groups);
      const EvaluationReport report =
          evaluate_split(model, ds, eval_split, md.config.prepare, bank ? &*bank : nullptr,
                         groups ? &*groups : nullptr);
      if (report.clips == 0) throw InvalidArgument("split '" + eval_split + "' has no clips");
      print_scalars(report.scalars());
      if (!eval_csv.empty()) write_text(eval_csv, metrics_csv(report.scalars()));
    } else if (*seg_cmd) {
      const ModelDir md = open_model_dir(seg_model);
      const ClipDataset ds = load_dataset(seg_data);
      Model model = load_model(md, ds);
      const PrototypeBank bank = bank_from_annotations(ds, seg_ann, md.config);
      fs::create_directories(seg_out);
      write_text(fs::path(seg_out) / "prototypes.json", prototypes_to_json(bank) + "\n");
      const auto entries = ds.split(seg_split);
      if (entries.empty()) throw InvalidArgument("split '" + seg_split + "' has no clips");
      const std::vector<PreparedClip> clips = prepare_split(ds, seg_split, md.config.prepare);
      std::size_t classes = ds.classes;
      for (const auto& [cls, proto] : bank.prototypes) classes = std::max(classes, cls + 1);
      for (std::size_t i = 0; i < clips.size(); ++i) {
        const DatasetEntry& e = *entries[i];
        const std::size_t frames = clips[i].graph.window;
        const std::vector<std::int64_t> ids(e.clip.frame_ids.end() - static_cast<std::ptrdiff_t>(frames),
                                            e.clip.frame_ids.end());
        const ClipSegmentation seg = segment_clip(model, clips[i], bank, ids);
        save_segmentation(fs::path(seg_out) / (e.id + ".maps.json"), seg.maps);
        if (seg_pgm) {
          for (const SegmentationMap& m : seg.maps)
            write_text(fs::path(seg_out) / (e.id + "_" + std::to_string(m.frame_id) + ".pgm"),
                       segmentation_to_pgm(m, classes));
        }
        if (seg_dot) {
          write_text(fs::path(seg_out) / (e.id + ".scene.json"),
                     scene_graph_to_json(seg.inference.scene_graph) + "\n");
          write_text(fs::path(seg_out) / (e.id + ".scene.dot"),
                     scene_graph_to_dot(seg.inference.scene_graph));
        }
      }
      const EvaluationReport report =
          evaluate_split(model, ds, seg_split, md.config.prepare, &bank, nullptr);
      print_scalars(report.scalars());
    } else if (*export_cmd) {
      TrainConfig cfg;
      if (!ex_config.empty()) cfg = train_config_from(ConfigFile::load(ex_config));
      if (ex_tau) cfg.prepare.graph.tau = *ex_tau;
      const ClipDataset ds = load_dataset(ex_data);
      if (ds.entries.empty()) throw InvalidArgument("dataset has no clips");
      const DatasetEntry* entry = &ds.entries.front();
      if (!ex_clip.empty()) {
        entry = nullptr;
        for (const DatasetEntry& e : ds.entries)
          if (e.id == ex_clip) entry = &e;
        if (entry == nullptr) throw InvalidArgument("no clip with id '" + ex_clip + "'");
      }
      const std::size_t ws = ex_ws == 0 ? entry->clip.window : ex_ws;
      if (ws > entry->clip.window)
        throw InvalidArgument("--ws " + std::to_string(ws) + " exceeds the clip's " +
                              std::to_string(entry->clip.window) + " frames");
      const FeatureClip clip = entry->clip.last_frames(ws);
      ClipMatches links;
      if (entry->matches) {
        const std::size_t offset = entry->clip.window - ws;
        for (const auto& [t, list] : *entry->matches)
          if (t >= offset) links[t - offset] = list;
      } else {
        links = match_clip(MutualNearestNeighborMatcher(cfg.prepare.match_min_confidence),
                           clip.features, clip.window, clip.patches);
      }
      const DynamicGraph g = build_dynamic_graph(clip, cfg.prepare.graph, links);
      const std::string text = ex_format == "json" ? graph_to_json(g) + "\n" : graph_to_dot(g);
      if (ex_out.empty()) std::cout << text;
      else write_text(ex_out, text);
    } else if (*grad_cmd) {
      const auto start = std::chrono::steady_clock::now();
      const std::vector<GradcheckResult> results = run_gradient_suite(grad_seed, grad_seeds);
      std::map<std::string, std::pair<double, bool>> worst;
      std::vector<std::string> order;
      for (const GradcheckResult& r : results) {
        if (!worst.contains(r.name)) {
          order.push_back(r.name);
          worst[r.name] = {0.0, true};
        }
        worst[r.name].first = std::max(worst[r.name].first, r.max_relative_error);
        worst[r.name].second = worst[r.name].second && r.passed;
      }
      bool ok = true;
      for (const std::string& name : order) {
        std::printf("%-24s max_rel_err=%.3e %s\n", name.c_str(), worst[name].first,
                    worst[name].second ? "ok" : "FAIL");
        ok = ok && worst[name].second;
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("seeds=%d checks=%zu elapsed=%.2fs\n", grad_seeds, results.size(), secs);
      if (!ok) {
        std::cerr << "error: gradient check failed\n";
        return 1;
      }
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << msg << "\n";
    return 1;
  }
  return 0;
}
