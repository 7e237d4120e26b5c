#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolgrasp/concept.hpp"
#include "toolgrasp/dataset.hpp"
#include "toolgrasp/detect.hpp"
#include "toolgrasp/errors.hpp"
#include "toolgrasp/ggcnn.hpp"
#include "toolgrasp/kvconfig.hpp"
#include "toolgrasp/pipeline.hpp"
#include "toolgrasp/planner.hpp"
#include "toolgrasp/safety.hpp"
#include "toolgrasp/synth.hpp"

namespace fs = std::filesystem;
using namespace toolgrasp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

// Flag values win over the key=value config file, which wins over defaults.
class Settings {
 public:
  void load(const std::string& path) {
    if (!path.empty()) kv_ = KeyValueConfig::load(path);
  }
  void flag(const CLI::Option* opt, const std::string& key, const std::string& value) {
    if (opt->count() > 0) kv_.set(key, value);
  }
  std::string str(const std::string& key, const std::string& fallback) const {
    return kv_.get_or(key, fallback);
  }
  double real(const std::string& key, double fallback) const {
    return kv_.get_double_or(key, fallback);
  }
  long long integer(const std::string& key, long long fallback) const {
    return kv_.get_int_or(key, fallback);
  }
  const KeyValueConfig& kv() const { return kv_; }

 private:
  KeyValueConfig kv_;
};

struct CommonFlags {
  std::string config;
  std::string scene;
  std::string model;
  std::string rules;
  std::string calib;
  std::string out_dir;
  long long seed = 0;
  long long k = 5;
  bool strict = false;
  long long n = 0;
  long long epochs = 0;
  double lr = 0.0;
  double iou_min = 0.0;
  double angle_max = 0.0;
  bool oracle = false;
  std::string optimizer;
  bool intensity = false;
  std::string intensity_image;
};

Settings resolve(const CommonFlags& f, const CLI::App& sub) {
  Settings s;
  s.load(f.config);
  auto num = [](double v) { return format_double(v); };
  auto flag = [&](const std::string& name, const std::string& key, const std::string& value) {
    for (const CLI::Option* opt : sub.get_options()) {
      if (opt->get_name() == name) s.flag(opt, key, value);
    }
  };
  flag("--scene", "scene", f.scene);
  flag("--model", "model", f.model);
  flag("--rules", "rules", f.rules);
  flag("--calib", "calib", f.calib);
  flag("--out-dir", "out_dir", f.out_dir);
  flag("--seed", "seed", std::to_string(f.seed));
  flag("--k", "k", std::to_string(f.k));
  flag("--strict", "strict", f.strict ? "1" : "0");
  flag("--n", "n", std::to_string(f.n));
  flag("--epochs", "epochs", std::to_string(f.epochs));
  flag("--lr", "lr", num(f.lr));
  flag("--iou-min", "iou_min", num(f.iou_min));
  flag("--angle-max", "angle_max", num(f.angle_max));
  flag("--oracle", "oracle", f.oracle ? "1" : "0");
  flag("--optimizer", "optimizer", f.optimizer);
  flag("--intensity", "input_channels", f.intensity ? "2" : "1");
  flag("--intensity-image", "intensity_image", f.intensity_image);
  return s;
}

std::string require(const Settings& s, const std::string& key) {
  const std::string v = s.str(key, "");
  if (v.empty()) throw ConfigError("missing --" + key);
  return v;
}

std::uint64_t seed_of(const Settings& s) {
  const long long v = s.integer("seed", 0);
  if (v < 0) throw ConfigError("seed must be non-negative");
  return static_cast<std::uint64_t>(v);
}

fs::path out_dir_of(const Settings& s) {
  const fs::path dir = s.str("out_dir", ".");
  fs::create_directories(dir);
  return dir;
}

std::vector<SceneRecord> load_manifest(const fs::path& manifest) {
  const auto entries = parse_manifest(read_text_file(manifest));
  std::vector<SceneRecord> scenes;
  for (const SceneFiles& e : entries) scenes.push_back(read_scene(manifest.parent_path(), e));
  return scenes;
}

// Two-channel models read the intensity image of every scene.
void require_intensity(const std::vector<SceneRecord>& scenes, std::size_t channels) {
  if (channels != 2) return;
  for (const SceneRecord& scene : scenes) {
    if (!scene.intensity) throw ConfigError("intensity input needs intensity images in the manifest");
  }
}

fs::path concepts_path(const fs::path& model) {
  fs::path p = model;
  p += ".concepts";
  return p;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

int cmd_synth(const Settings& s) {
  const long long n = s.integer("n", 10);
  const long long tools = s.integer("tools", 1);
  const long long size = s.integer("size", 160);
  if (n < 1 || tools < 0 || size < 32) throw ConfigError("synth: need n >= 1, tools >= 0, size >= 32");
  const std::uint64_t seed = seed_of(s);
  const fs::path dir = out_dir_of(s);
  std::vector<SceneFiles> entries;
  for (long long i = 0; i < n; ++i) {
    const SceneRecord scene =
        random_scene(static_cast<std::size_t>(tools), static_cast<std::size_t>(size),
                     static_cast<std::size_t>(size), seed + static_cast<std::uint64_t>(i));
    char stem[32];
    std::snprintf(stem, sizeof(stem), "scene_%04lld", i);
    entries.push_back(write_scene(dir, stem, scene));
  }
  write_text_file(dir / "manifest.txt", write_manifest(entries));
  std::cout << "wrote " << n << " scenes to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const Settings& s) {
  const auto scenes = load_manifest(require(s, "scene"));
  KeyValueConfig kv = training_config().to_kv();
  kv.merge(s.kv());
  GgcnnConfig cfg = GgcnnConfig::from_kv(kv);
  cfg.epochs = static_cast<std::size_t>(s.integer("epochs", static_cast<long long>(cfg.epochs)));
  cfg.learning_rate = s.real("lr", cfg.learning_rate);
  cfg.seed = seed_of(s);
  cfg.optimizer = s.str("optimizer", cfg.optimizer);
  if (cfg.optimizer != "sgd" && cfg.optimizer != "adam") {
    throw ConfigError("optimizer must be sgd or adam");
  }
  if (cfg.input_channels != 1 && cfg.input_channels != 2) {
    throw ConfigError("input_channels must be 1 or 2");
  }
  require_intensity(scenes, cfg.input_channels);
  const fs::path dir = out_dir_of(s);
  const fs::path model = s.str("model", (dir / "model.ckpt").string());

  std::vector<GraspSample> grasp_data;
  std::vector<ConceptSample> concept_data;
  for (const SceneRecord& scene : scenes) {
    for (GraspSample& g : grasp_samples(scene, cfg.input_channels)) {
      grasp_data.push_back(std::move(g));
    }
    for (ConceptSample& c : concept_samples(scene, cfg.input_channels)) {
      concept_data.push_back(std::move(c));
    }
  }
  GraspNet net(cfg);
  const TrainResult tr = train(net, grasp_data, cfg);
  net.save(model);

  const auto features = static_cast<std::size_t>(s.integer("concept_features", 12));
  ConceptLayer layer = attach(net, features, cfg.seed);
  const auto concept_history = finetune_concepts(
      layer, concept_data, static_cast<std::size_t>(s.integer("concept_epochs", 200)),
      s.real("concept_lr", 0.5), cfg.seed);
  save_concept_layer(layer, concepts_path(model));

  nlohmann::ordered_json j;
  j["model"] = model.string();
  j["samples"] = grasp_data.size();
  j["loss_history"] = tr.loss_history;
  j["concept_loss_history"] = concept_history;
  j["checksum"] = net.checksum();
  write_json(dir / "train.json", j);
  std::cout << "trained " << grasp_data.size() << " samples, final loss "
            << (tr.loss_history.empty() ? 0.0 : tr.loss_history.back()) << "\n";
  return kExitOk;
}

int cmd_eval_detect(const Settings& s) {
  const auto scenes = load_manifest(require(s, "scene"));
  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<BBox>> gts;
  for (const SceneRecord& scene : scenes) {
    dets.push_back(baseline_detect(scene.depth));
    std::vector<BBox> g;
    for (const SceneObject& o : scene.objects) g.push_back(o.box);
    gts.push_back(std::move(g));
  }
  const EvalReport report = compute_map(dets, gts, coco_thresholds());
  const nlohmann::ordered_json j = report.to_json();
  write_json(out_dir_of(s) / "eval_detect.json", j);
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_eval_grasp(const Settings& s) {
  const auto scenes = load_manifest(require(s, "scene"));
  MatchThresholds th;
  th.iou_min = s.real("iou_min", th.iou_min);
  th.angle_max = s.real("angle_max", th.angle_max * 180.0 / kPi) * kPi / 180.0;
  const bool oracle = s.integer("oracle", 0) != 0;
  std::optional<GraspNet> net;
  if (!oracle) {
    net.emplace(GraspNet::load(require(s, "model")));
    require_intensity(scenes, net->config().input_channels);
  }
  const GraspEvalResult r = evaluate_grasps(scenes, net ? &*net : nullptr, th);
  write_json(out_dir_of(s) / "eval_grasp.json", r.to_json());
  std::cout << "success rate " << format_rate(r.successes, r.attempts) << " ("
            << r.successes << "/" << r.attempts << ")\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (r.class_attempts[c] == 0) continue;
    std::cout << "  " << kClassNames[c] << " "
              << format_rate(r.class_successes[c], r.class_attempts[c]) << " ("
              << r.class_successes[c] << "/" << r.class_attempts[c] << ")\n";
  }
  return kExitOk;
}

int cmd_explain(const Settings& s) {
  const auto scenes = load_manifest(require(s, "scene"));
  const fs::path model = require(s, "model");
  const GraspNet net = GraspNet::load(model);
  const ConceptLayer layer = load_concept_layer(net, concepts_path(model));
  const std::size_t channels = net.config().input_channels;
  require_intensity(scenes, channels);
  std::vector<ConceptSample> data;
  for (const SceneRecord& scene : scenes) {
    for (ConceptSample& c : concept_samples(scene, channels)) data.push_back(std::move(c));
  }
  std::vector<std::string> warnings;
  const CorrelationMatrix m = compute_correlation(layer, data, &warnings);
  const fs::path dir = out_dir_of(s);
  export_heatmap(m, dir / "heatmap.ppm");
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote " << (dir / "heatmap.ppm").string() << " and "
            << (dir / "heatmap.txt").string() << "\n";
  return kExitOk;
}

// `synth:<seed>[:<tools>]` generates a scene instead of reading one; a depth
// file takes its intensity image from `intensity_image`, if given.
SceneRecord load_scene_input(const Settings& s) {
  const std::string spec = require(s, "scene");
  if (spec.rfind("synth:", 0) == 0) {
    const auto parts = split(spec.substr(6), ':');
    if (parts.empty() || parts.size() > 2) throw ConfigError("bad scene spec " + spec);
    const auto seed = static_cast<std::uint64_t>(parse_int(parts[0]));
    const auto tools = parts.size() == 2 ? static_cast<std::size_t>(parse_int(parts[1])) : 1;
    try {
      return random_scene(tools, 160, 160, seed);
    } catch (const PlacementError& e) {
      throw ConfigError("scene spec " + spec + ": " + e.what());
    }
  }
  SceneRecord scene;
  scene.depth = read_depth(spec);
  const std::string intensity = s.str("intensity_image", "");
  if (!intensity.empty()) {
    scene.intensity = read_depth(intensity);
    if (scene.intensity->height != scene.depth.height ||
        scene.intensity->width != scene.depth.width) {
      throw ConfigError("intensity image size differs from the depth image");
    }
  }
  return scene;
}

int cmd_run(const Settings& s) {
  const SceneRecord scene = load_scene_input(s);
  const Plane& depth = scene.depth;
  const fs::path model = require(s, "model");
  const GraspNet net = GraspNet::load(model);
  require_intensity({scene}, net.config().input_channels);
  std::optional<ConceptLayer> layer;
  if (fs::exists(concepts_path(model))) layer.emplace(load_concept_layer(net, concepts_path(model)));
  const std::string rules_path = s.str("rules", "");
  const auto rules = rules_path.empty() ? parse_rules(default_rules_text()) : load_rules(rules_path);
  const std::string calib_path = s.str("calib", "");
  const CameraCalib calib =
      calib_path.empty() ? default_calib() : parse_calib(read_text_file(calib_path));
  calib.validate();

  RunOptions opt;
  const long long k = s.integer("k", 5);
  if (k < 1) throw ConfigError("k must be at least 1");
  opt.k = static_cast<std::size_t>(k);
  opt.strict = s.integer("strict", 0) != 0;
  opt.seed = seed_of(s);
  opt.smoothing_sigma = s.real("smoothing_sigma", opt.smoothing_sigma);
  opt.worker_direction = s.real("worker_direction", opt.worker_direction);
  opt.dt = s.real("dt", opt.dt);
  if (scene.intensity) opt.intensity = &*scene.intensity;

  const fs::path dir = out_dir_of(s);
  const RunResult r = run_pipeline(depth, net, layer ? &*layer : nullptr, rules, calib, opt, dir);
  write_json(dir / "report.json", r.report);
  write_json(dir / "timing.json", r.timing);
  std::cout << "objects " << r.report["objects"].size() << ", exit " << r.exit_code << "\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tool detection, grasp estimation and safe handover planning"};
  app.require_subcommand(1);
  CommonFlags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "key=value config file");
    sub->add_option("--out-dir", f.out_dir, "output directory");
    sub->add_option("--seed", f.seed, "random seed");
  };
  auto scene_flag = [&](CLI::App* sub, const std::string& help) {
    sub->add_option("--scene", f.scene, help);
  };

  CLI::App* synth = app.add_subcommand("synth", "generate seeded synthetic scenes");
  common(synth);
  synth->add_option("--n", f.n, "number of scenes");

  CLI::App* train_cmd = app.add_subcommand("train", "train the grasp model and concept layer");
  common(train_cmd);
  scene_flag(train_cmd, "scene manifest");
  train_cmd->add_option("--model", f.model, "output model path");
  train_cmd->add_option("--epochs", f.epochs, "training epochs");
  train_cmd->add_option("--lr", f.lr, "learning rate");
  train_cmd->add_option("--optimizer", f.optimizer, "sgd or adam");
  train_cmd->add_flag("--intensity", f.intensity, "add the intensity image as a second input channel");

  CLI::App* eval_detect = app.add_subcommand("eval-detect", "mAP and confusion of the detector");
  common(eval_detect);
  scene_flag(eval_detect, "scene manifest");

  CLI::App* eval_grasp = app.add_subcommand("eval-grasp", "grasp success rate");
  common(eval_grasp);
  scene_flag(eval_grasp, "scene manifest");
  eval_grasp->add_option("--model", f.model, "model path");
  eval_grasp->add_option("--iou-min", f.iou_min, "minimum rectangle IoU");
  eval_grasp->add_option("--angle-max", f.angle_max, "maximum angle error, degrees");
  eval_grasp->add_flag("--oracle", f.oracle, "score the first ground-truth grasp");

  CLI::App* explain = app.add_subcommand("explain", "concept/class correlation heatmap");
  common(explain);
  scene_flag(explain, "scene manifest");
  explain->add_option("--model", f.model, "model path");

  CLI::App* run = app.add_subcommand("run", "full pipeline on one scene");
  common(run);
  scene_flag(run, "depth image or synth:<seed>[:<tools>]");
  run->add_option("--model", f.model, "model path");
  run->add_option("--rules", f.rules, "safety rules file");
  run->add_option("--calib", f.calib, "camera calibration file");
  run->add_option("--k", f.k, "grasp candidates per object");
  run->add_flag("--strict", f.strict, "stop at the first failing stage");
  run->add_option("--intensity-image", f.intensity_image,
                  "intensity image for a depth-file scene (two-channel models)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const CLI::App& sub = *app.get_subcommands().front();
    const Settings s = resolve(f, sub);
    if (synth->parsed()) return cmd_synth(s);
    if (train_cmd->parsed()) return cmd_train(s);
    if (eval_detect->parsed()) return cmd_eval_detect(s);
    if (eval_grasp->parsed()) return cmd_eval_grasp(s);
    if (explain->parsed()) return cmd_explain(s);
    if (run->parsed()) return cmd_run(s);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return kExitConfig;
}
