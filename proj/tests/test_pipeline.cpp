#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "toolgrasp/classes.hpp"
#include "toolgrasp/dataset.hpp"
#include "toolgrasp/errors.hpp"
#include "toolgrasp/pipeline.hpp"

using namespace toolgrasp;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("toolgrasp_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Concept layer that reports only `feature` as active, whatever the input.
ConceptLayer constant_concepts(const GraspNet& net, std::size_t feature) {
  ConceptLayer layer = attach(net, 12, 1);
  for (double& v : layer.projection.value.data()) v = 0.0;
  for (double& v : layer.bias.value.data()) v = -10.0;
  layer.bias.value[feature] = 10.0;
  return layer;
}

}  // namespace

TEST(CropMapping, GraspRoundTrip) {
  const CropWindow win = square_window({80.5, 60.25}, 48.0, kCropSize);
  const GraspRect g(70.0, 55.0, 20.0, 10.0, 0.4);
  const GraspRect c = grasp_to_crop(g, win);
  EXPECT_NEAR(c.w(), 20.0 * kCropSize / 48.0, 1e-9);
  const GraspRect back = grasp_to_scene(c, win);
  EXPECT_NEAR(back.x(), g.x(), 1e-9);
  EXPECT_NEAR(back.y(), g.y(), 1e-9);
  EXPECT_NEAR(back.w(), g.w(), 1e-9);
  EXPECT_NEAR(back.theta(), g.theta(), 1e-12);
}

TEST(CropMapping, CropCoversThePaddedBox) {
  const SceneRecord s = random_scene_of({kHammer}, 160, 160, 3);
  const BBox& b = s.objects[0].box;
  const Crop crop = crop_around(s.depth, b);
  EXPECT_EQ(crop.depth.height, kCropSize);
  EXPECT_NEAR(crop.window.side, kCropPadding * std::max(b.bw, b.bh) * 160.0, 1e-9);
  // Every ground-truth grasp lands inside the crop.
  for (const GraspRect& g : grasp_samples(s)[0].grasps) {
    EXPECT_GE(g.x(), 0.0);
    EXPECT_LE(g.x(), static_cast<double>(kCropSize));
  }
}

TEST(GraspEval, OracleScoresPerfectly) {
  const auto scenes = single_tool_scenes(16, 500);
  const GraspEvalResult r = evaluate_grasps(scenes, nullptr, {});
  EXPECT_EQ(r.attempts, 16u);
  EXPECT_EQ(r.successes, 16u);
  for (std::size_t c = 0; c < kNumClasses; ++c) EXPECT_EQ(r.class_attempts[c], 2u);
}

TEST(GraspEval, RateFormatting) {
  EXPECT_EQ(format_rate(57, 70), "81.4%");
  EXPECT_EQ(format_rate(70, 70), "100.0%");
  EXPECT_EQ(format_rate(0, 0), "n/a");
  GraspEvalResult r;
  r.attempts = 70;
  r.successes = 57;
  EXPECT_NEAR(r.rate(), 57.0 / 70.0, 1e-15);
  EXPECT_EQ(r.to_json()["success_rate"], "81.4%");
}

TEST(RunPipeline, EmptySceneHasNoObjects) {
  const fs::path dir = fresh_dir("run_empty");
  const GraspNet net(GgcnnConfig{});
  const SceneRecord s = random_scene(0, 128, 128, 2);
  const RunResult r =
      run_pipeline(s.depth, net, nullptr, parse_rules(default_rules_text()), default_calib(), {}, dir);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_TRUE(r.report["objects"].empty());
  EXPECT_TRUE(fs::exists(dir / "overlay.ppm"));
}

TEST(RunPipeline, WrenchIsPlannedEndToEnd) {
  const fs::path dir = fresh_dir("run_wrench");
  const GraspNet net(GgcnnConfig{});
  const ConceptLayer concepts = constant_concepts(net, kWrench);
  const SceneRecord s = random_scene_of({kWrench}, 160, 160, 8);
  const RunResult r = run_pipeline(s.depth, net, &concepts, parse_rules(default_rules_text()),
                                   default_calib(), {}, dir);
  ASSERT_EQ(r.exit_code, 0) << r.report.dump(2);
  ASSERT_EQ(r.report["objects"].size(), 1u);
  const auto& obj = r.report["objects"][0];
  EXPECT_EQ(obj["status"], "ok");
  EXPECT_EQ(obj["detection"]["class_id"], kWrench);
  EXPECT_TRUE(obj["triggered"].empty());
  EXPECT_GE(obj["safe_grasps"].size(), 1u);
  EXPECT_EQ(obj["setpoints"].size(), 5u);
  EXPECT_TRUE(fs::exists(dir / "trajectory_0.txt"));
  EXPECT_TRUE(fs::exists(dir / "quality_0.ppm"));
}

TEST(RunPipeline, KnifeBladeGraspsAreRejected) {
  const GraspNet net(GgcnnConfig{});
  const ConceptLayer concepts = constant_concepts(net, kKnife);
  const auto rules = parse_rules(default_rules_text());
  RunOptions opts;
  opts.k = 20;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const fs::path dir = fresh_dir("run_knife");
    const SceneRecord s = random_scene_of({kKnife}, 160, 160, seed);
    const RunResult r = run_pipeline(s.depth, net, &concepts, rules, default_calib(), opts, dir);
    ASSERT_EQ(r.report["objects"].size(), 1u);
    const auto& obj = r.report["objects"][0];
    ASSERT_EQ(obj["triggered"].size(), 2u);
    EXPECT_EQ(obj["triggered"][0]["action"], "REJECT_REGION");
    EXPECT_EQ(obj["triggered"][1]["action"], "REQUIRE_ROTATION");
    OrientedBox box;
    box.center = {obj["oriented_box"]["center"][0], obj["oriented_box"]["center"][1]};
    box.length = obj["oriented_box"]["length"];
    box.breadth = obj["oriented_box"]["breadth"];
    box.heading = obj["oriented_box"]["heading"];
    const auto on_blade = [&box](const auto& g) {
      const Vec2 f = box.to_fraction({g["x"], g["y"]});
      return f.x >= 0.5 && f.x <= 1.0 && f.y >= 0.0 && f.y <= 1.0;
    };
    std::size_t blade = 0;
    for (const auto& g : obj["grasps"]) blade += on_blade(g) ? 1 : 0;
    EXPECT_EQ(obj["safe_grasps"].size() + blade, obj["grasps"].size());
    for (const auto& g : obj["safe_grasps"]) EXPECT_FALSE(on_blade(g));
    if (obj["status"] == "ok") {
      EXPECT_GE(std::abs(wrap_full_angle(obj["handover"]["approach_heading"].get<double>() -
                                         kWorkerDirection)),
                kPi / 2.0 - 1e-9);
      EXPECT_EQ(r.exit_code, 0);
    } else {
      EXPECT_EQ(obj["status"], "rejected");
      EXPECT_EQ(r.exit_code, 4);
    }
  }
}

TEST(RunPipeline, WholeBoxRejectionExitsWithFour) {
  const fs::path dir = fresh_dir("run_reject");
  const GraspNet net(GgcnnConfig{});
  const auto rules = parse_rules("1; class:7; 0.5; reject_region:0,1,0,1\n");
  const SceneRecord s = random_scene_of({kWrench}, 160, 160, 8);
  RunOptions opts;
  opts.k = 3;
  const RunResult r = run_pipeline(s.depth, net, nullptr, rules, default_calib(), opts, dir);
  ASSERT_EQ(r.report["objects"].size(), 1u);
  // Candidates may fall outside the box; only those inside are dropped.
  if (r.report["objects"][0]["safe_grasps"].empty()) {
    EXPECT_EQ(r.exit_code, 4);
    EXPECT_EQ(r.report["objects"][0]["status"], "rejected");
  } else {
    EXPECT_EQ(r.exit_code, 0);
  }
}

TEST(RunPipeline, StageFailureExitsWithThree) {
  const fs::path dir = fresh_dir("run_fail");
  const GraspNet net(GgcnnConfig{});
  const SceneRecord s = random_scene_of({kWrench, kHammer}, 160, 160, 8);
  // A concept rule without a concept layer fails the rules stage.
  const auto rules = parse_rules("1; concept:3; 0.5; none\n");
  RunOptions opts;
  const RunResult r = run_pipeline(s.depth, net, nullptr, rules, default_calib(), opts, dir);
  EXPECT_EQ(r.exit_code, 3);
  ASSERT_EQ(r.report["objects"].size(), 2u);
  EXPECT_EQ(r.report["objects"][0]["failed_stage"], "rules");
  opts.strict = true;
  const RunResult strict = run_pipeline(s.depth, net, nullptr, rules, default_calib(), opts, dir);
  EXPECT_EQ(strict.exit_code, 3);
  EXPECT_EQ(strict.report["objects"].size(), 1u);
}

TEST(RunPipeline, ReportsAreDeterministic) {
  const GraspNet net(GgcnnConfig{});
  const ConceptLayer concepts = constant_concepts(net, kScrewdriver);
  const SceneRecord s = random_scene(2, 160, 160, 12);
  const auto rules = parse_rules(default_rules_text());
  const fs::path a = fresh_dir("run_det_a");
  const fs::path b = fresh_dir("run_det_b");
  const RunResult ra = run_pipeline(s.depth, net, &concepts, rules, default_calib(), {}, a);
  const RunResult rb = run_pipeline(s.depth, net, &concepts, rules, default_calib(), {}, b);
  EXPECT_EQ(ra.report.dump(), rb.report.dump());
  EXPECT_EQ(read_text_file(a / "overlay.ppm"), read_text_file(b / "overlay.ppm"));
  EXPECT_EQ(ra.artifacts, rb.artifacts);
}

TEST(CropInput, IntensityIsTheSecondChannel) {
  const SceneRecord s = random_scene_of({kHammer}, 160, 160, 4);
  ASSERT_TRUE(s.intensity.has_value());
  const Crop crop = crop_around(s.depth, s.objects[0].box, kCropSize, kCropPadding, &*s.intensity);
  ASSERT_TRUE(crop.intensity.has_value());
  const Tensor one = crop_input(crop);
  const Tensor two = crop_input(crop, 2);
  ASSERT_EQ(two.dim(0), 2u);
  const std::size_t n = kCropSize * kCropSize;
  double lo = 1.0, hi = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(two[i], one[i]);
    EXPECT_NEAR(two[n + i], 2.0 * crop.intensity->values[i] - 1.0, 1e-12);
    lo = std::min(lo, two[n + i]);
    hi = std::max(hi, two[n + i]);
  }
  EXPECT_GE(lo, -1.0);
  EXPECT_LE(hi, 1.0);
  EXPECT_THROW(crop_input(crop_around(s.depth, s.objects[0].box), 2), DomainError);
  EXPECT_THROW(crop_input(crop, 3), DomainError);
}

TEST(RunPipeline, TwoChannelModelUsesIntensity) {
  GgcnnConfig cfg;
  cfg.input_channels = 2;
  const GraspNet net(cfg);
  const ConceptLayer concepts = constant_concepts(net, kWrench);
  const SceneRecord s = random_scene_of({kWrench}, 160, 160, 8);
  const auto rules = parse_rules(default_rules_text());
  RunOptions opt;
  EXPECT_THROW(run_pipeline(s.depth, net, &concepts, rules, default_calib(), opt,
                            fresh_dir("run_two_none")),
               DomainError);
  opt.intensity = &*s.intensity;
  const RunResult r =
      run_pipeline(s.depth, net, &concepts, rules, default_calib(), opt, fresh_dir("run_two"));
  EXPECT_EQ(r.exit_code, 0) << r.report.dump(2);
  EXPECT_EQ(r.report["config"]["input_channels"], 2);
  ASSERT_EQ(r.report["objects"].size(), 1u);
  EXPECT_EQ(r.report["objects"][0]["status"], "ok");
}
