#include "toolgrasp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "toolgrasp/dataset.hpp"
#include "toolgrasp/errors.hpp"

namespace toolgrasp {

Crop crop_around(const Plane& scene_depth, const BBox& box, std::size_t out_size,
                 double padding, const Plane* scene_intensity) {
  const double w = static_cast<double>(scene_depth.width);
  const double h = static_cast<double>(scene_depth.height);
  const double side = padding * std::max(box.bw * w, box.bh * h);
  // Box coordinates are pixel edges; pixel centres sit at integers.
  const Vec2 center{box.cx * w - 0.5, box.cy * h - 0.5};
  Crop crop;
  crop.window = square_window(center, side, out_size);
  crop.depth = crop_resample(scene_depth, crop.window, median(scene_depth.values));
  if (scene_intensity != nullptr) {
    if (scene_intensity->height != scene_depth.height ||
        scene_intensity->width != scene_depth.width) {
      throw DomainError("crop_around: intensity and depth sizes differ");
    }
    crop.intensity =
        crop_resample(*scene_intensity, crop.window, median(scene_intensity->values));
  }
  return crop;
}

Tensor crop_input(const Crop& crop, std::size_t channels) {
  if (channels == 1) return to_tensor(normalize_depth(crop.depth));
  if (channels != 2) {
    throw DomainError("crop_input: " + std::to_string(channels) + " channels unsupported");
  }
  if (!crop.intensity) throw DomainError("crop_input: two channels need an intensity image");
  const Plane depth = normalize_depth(crop.depth);
  const std::size_t n = depth.values.size();
  Tensor t({2, depth.height, depth.width});
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = depth.values[i];
    t[n + i] = 2.0 * std::clamp(crop.intensity->values[i], 0.0, 1.0) - 1.0;
  }
  return t;
}

namespace {

const Plane* intensity_of(const SceneRecord& scene) {
  return scene.intensity ? &*scene.intensity : nullptr;
}

}  // namespace

GraspRect grasp_to_crop(const GraspRect& g, const CropWindow& win) {
  const Vec2 c = win.to_crop(g.center());
  const double s = win.scale();
  return {c.x, c.y, g.w() * s, g.h() * s, g.theta()};
}

GraspRect grasp_to_scene(const GraspRect& g, const CropWindow& win) {
  const Vec2 c = win.to_source(g.center());
  const double s = win.scale();
  return {c.x, c.y, g.w() / s, g.h() / s, g.theta()};
}

std::vector<GraspSample> grasp_samples(const SceneRecord& scene, std::size_t channels) {
  std::vector<GraspSample> out;
  for (const SceneObject& obj : scene.objects) {
    const Crop crop =
        crop_around(scene.depth, obj.box, kCropSize, kCropPadding, intensity_of(scene));
    GraspSample s;
    s.input = crop_input(crop, channels);
    for (const GraspRect& g : obj.grasps) s.grasps.push_back(grasp_to_crop(g, crop.window));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ConceptSample> concept_samples(const SceneRecord& scene,
                                           std::size_t channels) {
  std::vector<ConceptSample> out;
  for (const SceneObject& obj : scene.objects) {
    const Crop crop =
        crop_around(scene.depth, obj.box, kCropSize, kCropPadding, intensity_of(scene));
    out.push_back({crop_input(crop, channels), obj.class_id});
  }
  return out;
}

std::vector<SceneRecord> single_tool_scenes(std::size_t count, std::uint64_t seed,
                                            std::size_t size) {
  std::vector<SceneRecord> out;
  for (std::size_t i = 0; i < count; ++i) {
    const int cls = static_cast<int>(i % kNumClasses);
    out.push_back(random_scene_of({cls}, size, size, seed + i));
  }
  return out;
}

nlohmann::ordered_json GraspEvalResult::to_json() const {
  nlohmann::ordered_json j;
  j["attempts"] = attempts;
  j["successes"] = successes;
  j["success_rate"] = format_rate(successes, attempts);
  auto per = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (class_attempts[c] == 0) continue;
    nlohmann::ordered_json e;
    e["class"] = std::string(kClassNames[c]);
    e["attempts"] = class_attempts[c];
    e["successes"] = class_successes[c];
    e["success_rate"] = format_rate(class_successes[c], class_attempts[c]);
    per.push_back(e);
  }
  j["per_class"] = per;
  return j;
}

std::string format_rate(std::size_t successes, std::size_t attempts) {
  if (attempts == 0) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%",
                100.0 * static_cast<double>(successes) / static_cast<double>(attempts));
  return buf;
}

GraspEvalResult evaluate_grasps(const std::vector<SceneRecord>& scenes,
                                const GraspNet* net, const MatchThresholds& thresholds,
                                double smoothing_sigma) {
  GraspEvalResult res;
  for (const SceneRecord& scene : scenes) {
    for (const SceneObject& obj : scene.objects) {
      if (obj.grasps.empty()) continue;
      std::optional<GraspRect> pred;
      if (net == nullptr) {
        pred = obj.grasps.front();
      } else {
        const Crop crop =
            crop_around(scene.depth, obj.box, kCropSize, kCropPadding, intensity_of(scene));
        const auto top = decode_grasps(
            net->forward(crop_input(crop, net->config().input_channels)), 1, smoothing_sigma);
        if (!top.empty()) pred = grasp_to_scene(top.front().grasp, crop.window);
      }
      const bool ok = pred && std::any_of(obj.grasps.begin(), obj.grasps.end(),
                                          [&](const GraspRect& gt) {
                                            return grasp_match(*pred, gt, thresholds);
                                          });
      ++res.attempts;
      res.successes += ok ? 1 : 0;
      if (obj.class_id >= 0 && static_cast<std::size_t>(obj.class_id) < kNumClasses) {
        ++res.class_attempts[static_cast<std::size_t>(obj.class_id)];
        res.class_successes[static_cast<std::size_t>(obj.class_id)] += ok ? 1 : 0;
      }
    }
  }
  return res;
}

namespace {

nlohmann::ordered_json grasp_json(const GraspRect& g, std::optional<double> score = {}) {
  nlohmann::ordered_json j;
  j["x"] = g.x();
  j["y"] = g.y();
  j["theta"] = g.theta();
  j["w"] = g.w();
  j["h"] = g.h();
  if (score) j["score"] = *score;
  return j;
}

const char* action_name(ActionKind k) {
  switch (k) {
    case ActionKind::kRejectRegion:
      return "REJECT_REGION";
    case ActionKind::kRequireRotation:
      return "REQUIRE_ROTATION";
    case ActionKind::kNone:
      return "NO_ACTION";
  }
  return "NO_ACTION";
}

Plane height_plane(const Plane& depth) {
  const double table = median(depth.values);
  Plane h(depth.height, depth.width);
  for (std::size_t i = 0; i < h.values.size(); ++i) h.values[i] = table - depth.values[i];
  return h;
}

void draw_grasp(RgbImage& img, const GraspRect& g, Rgb color) {
  const Quad q = rect_corners(g);
  draw_polygon(img, {q.begin(), q.end()}, color);
}

void draw_bbox(RgbImage& img, const BBox& b, Rgb color) {
  const double w = static_cast<double>(img.width);
  const double h = static_cast<double>(img.height);
  const Vec2 p0{b.x0() * w, b.y0() * h};
  const Vec2 p1{b.x1() * w - 1.0, b.y1() * h - 1.0};
  draw_polygon(img, {p0, {p1.x, p0.y}, p1, {p0.x, p1.y}}, color);
}

class StageTimer {
 public:
  explicit StageTimer(nlohmann::ordered_json& sink) : sink_(sink) {}
  template <typename F>
  auto operator()(const std::string& stage, F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Record {
      nlohmann::ordered_json& sink;
      std::string stage;
      std::chrono::steady_clock::time_point t0;
      ~Record() {
        const auto dt = std::chrono::steady_clock::now() - t0;
        sink[stage] = std::chrono::duration<double, std::milli>(dt).count();
      }
    } record{sink_, stage, t0};
    return fn();
  }

 private:
  nlohmann::ordered_json& sink_;
};

}  // namespace

RunResult run_pipeline(const Plane& depth, const GraspNet& net,
                       const ConceptLayer* concepts, const std::vector<SafetyRule>& rules,
                       const CameraCalib& calib, const RunOptions& options,
                       const std::filesystem::path& out_dir) {
  const std::size_t channels = net.config().input_channels;
  if (channels == 2 && options.intensity == nullptr) {
    throw DomainError("run_pipeline: the model needs an intensity image");
  }
  RunResult result;
  auto& report = result.report;
  report["seed"] = options.seed;
  nlohmann::ordered_json cfg;
  cfg["k"] = options.k;
  cfg["strict"] = options.strict;
  cfg["smoothing_sigma"] = options.smoothing_sigma;
  cfg["worker_direction"] = options.worker_direction;
  cfg["crop_size"] = kCropSize;
  cfg["crop_padding"] = kCropPadding;
  cfg["dt"] = options.dt;
  cfg["input_channels"] = channels;
  cfg["model_checksum"] = net.checksum();
  cfg["rules"] = format_rules(rules);
  report["config"] = cfg;
  report["scene"] = {{"height", depth.height}, {"width", depth.width}};
  result.timing["objects"] = nlohmann::ordered_json::array();

  nlohmann::ordered_json scene_timing;
  StageTimer scene_timer(scene_timing);
  std::vector<Detection> dets;
  try {
    dets = scene_timer("detect", [&] { return baseline_detect(depth, options.detector); });
  } catch (const std::exception& e) {
    report["objects"] = nlohmann::ordered_json::array();
    report["failed_stage"] = "detect";
    report["error"] = e.what();
    result.timing["scene"] = scene_timing;
    result.exit_code = 3;
    return result;
  }
  result.timing["scene"] = scene_timing;

  RgbImage overlay = gray_image(height_plane(depth), 0.0, 0.08);
  const PlanarArm arm;
  auto objects = nlohmann::ordered_json::array();
  bool stop = false;

  for (std::size_t i = 0; i < dets.size() && !stop; ++i) {
    const Detection& det = dets[i];
    nlohmann::ordered_json obj;
    nlohmann::ordered_json timing;
    StageTimer timer(timing);
    obj["index"] = i;
    obj["detection"] = {{"class_id", det.bbox.class_id},
                        {"class_name", std::string(kClassNames[static_cast<std::size_t>(det.bbox.class_id)])},
                        {"confidence", det.confidence},
                        {"bbox", {det.bbox.cx, det.bbox.cy, det.bbox.bw, det.bbox.bh}}};
    obj["oriented_box"] = {{"center", {det.obox.center.x, det.obox.center.y}},
                           {"length", det.obox.length},
                           {"breadth", det.obox.breadth},
                           {"heading", det.obox.heading}};
    draw_bbox(overlay, det.bbox, {0, 200, 0});

    std::string stage;
    try {
      stage = "crop";
      const Crop crop = timer(stage, [&] {
        return crop_around(depth, det.bbox, kCropSize, kCropPadding,
                           channels == 2 ? options.intensity : nullptr);
      });
      const Tensor input = crop_input(crop, channels);

      stage = "grasp";
      const GraspMaps maps = timer(stage, [&] { return net.forward(input); });
      const std::string qname = "quality_" + std::to_string(i) + ".ppm";
      write_ppm(out_dir / qname, gray_image(maps.quality, 0.0, 1.0));
      result.artifacts.push_back(qname);
      obj["quality_map"] = qname;

      stage = "decode";
      std::vector<ScoredGrasp> candidates = timer(stage, [&] {
        auto local = decode_grasps(maps, options.k, options.smoothing_sigma);
        for (ScoredGrasp& g : local) g.grasp = grasp_to_scene(g.grasp, crop.window);
        return local;
      });
      auto cand_json = nlohmann::ordered_json::array();
      for (const ScoredGrasp& g : candidates) cand_json.push_back(grasp_json(g.grasp, g.score));
      obj["grasps"] = cand_json;

      stage = "concepts";
      const std::vector<double> acts = timer(stage, [&] {
        return concepts ? extract_concepts(*concepts, input) : std::vector<double>{};
      });
      obj["concepts"] = acts;

      stage = "rules";
      const auto triggered = timer(stage, [&] {
        return evaluate_rules(acts, det.bbox.class_id, rules);
      });
      auto trig_json = nlohmann::ordered_json::array();
      double cone = 0.0;
      for (const TriggeredAction& t : triggered) {
        trig_json.push_back({{"rule_id", t.rule_id}, {"action", action_name(t.action.kind)}});
        if (t.action.kind == ActionKind::kRequireRotation) cone = std::max(cone, t.action.cone);
      }
      obj["triggered"] = trig_json;

      stage = "filter";
      const auto safe = timer(stage, [&] { return filter_grasps(candidates, det.obox, triggered); });
      auto safe_json = nlohmann::ordered_json::array();
      for (const ScoredGrasp& g : safe) safe_json.push_back(grasp_json(g.grasp, g.score));
      obj["safe_grasps"] = safe_json;
      for (const ScoredGrasp& g : candidates) draw_grasp(overlay, g.grasp, {60, 60, 255});
      for (const ScoredGrasp& g : safe) draw_grasp(overlay, g.grasp, {255, 220, 0});
      if (safe.empty()) {
        obj["status"] = "rejected";
        obj["error"] = "every candidate grasp lies in a rejected region";
        result.exit_code = std::max(result.exit_code, 4);
        objects.push_back(obj);
        result.timing["objects"].push_back(timing);
        if (options.strict) stop = true;
        continue;
      }
      const GraspRect chosen = safe.front().grasp;
      obj["chosen_grasp"] = grasp_json(chosen, safe.front().score);
      draw_grasp(overlay, chosen, {255, 0, 0});

      stage = "handover";
      const HandoverPose hp = timer(stage, [&] {
        return refine_handover(chosen, det.obox.heading, cone, options.worker_direction);
      });
      obj["handover"] = {{"approach_heading", hp.approach_heading},
                         {"rotation", hp.rotation},
                         {"cone", cone},
                         {"safe", hp.safe}};

      stage = "plan";
      const auto sps = timer(stage, [&] {
        return plan_task(grasp_to_pose(chosen, calib, options.task.workspace), hp,
                         options.task, calib.yaw());
      });
      obj["setpoints"] = setpoints_to_json(sps);

      stage = "trajectory";
      const JointTrajectory traj = timer(stage, [&] {
        return plan_trajectory(sps, [&](const Setpoint& sp) { return arm.ik(sp); },
                               default_limits(), options.dt);
      });
      const std::string tname = "trajectory_" + std::to_string(i) + ".txt";
      write_text_file(out_dir / tname, format_trajectory(traj));
      result.artifacts.push_back(tname);
      obj["trajectory"] = {{"file", tname},
                           {"samples", traj.times.size()},
                           {"duration", traj.times.empty() ? 0.0 : traj.times.back()}};
      obj["status"] = "ok";
    } catch (const std::exception& e) {
      obj["status"] = "failed";
      obj["failed_stage"] = stage;
      obj["error"] = e.what();
      result.exit_code = std::max(result.exit_code, 3);
      if (options.strict) stop = true;
    }
    objects.push_back(obj);
    result.timing["objects"].push_back(timing);
  }
  report["objects"] = objects;
  write_ppm(out_dir / "overlay.ppm", overlay);
  result.artifacts.insert(result.artifacts.begin(), "overlay.ppm");
  report["artifacts"] = result.artifacts;
  // Stage failures take precedence over rejections.
  if (result.exit_code == 4 &&
      std::any_of(objects.begin(), objects.end(),
                  [](const auto& o) { return o["status"] == "failed"; })) {
    result.exit_code = 3;
  }
  return result;
}

}  // namespace toolgrasp
