#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolgrasp/concept.hpp"
#include "toolgrasp/detect.hpp"
#include "toolgrasp/ggcnn.hpp"
#include "toolgrasp/planner.hpp"
#include "toolgrasp/safety.hpp"
#include "toolgrasp/synth.hpp"

namespace toolgrasp {

constexpr std::size_t kCropSize = 96;
constexpr double kCropPadding = 1.25;

// Padded square around a normalized box, resampled to kCropSize; pixels
// outside the scene take the table value (scene median).
struct Crop {
  CropWindow window;
  Plane depth;
  std::optional<Plane> intensity;
};
Crop crop_around(const Plane& scene_depth, const BBox& box,
                 std::size_t out_size = kCropSize, double padding = kCropPadding,
                 const Plane* scene_intensity = nullptr);

// Normalized network input [C,S,S] of a crop: normalized depth, then for
// C = 2 the intensity rescaled to [-1, 1]. Throws DomainError when C is not
// 1 or 2, or C = 2 and the crop has no intensity.
Tensor crop_input(const Crop& crop, std::size_t channels = 1);

// Grasp mapping between the scene and a crop frame.
GraspRect grasp_to_crop(const GraspRect& g, const CropWindow& win);
GraspRect grasp_to_scene(const GraspRect& g, const CropWindow& win);

// One crop per ground-truth object, with its grasps in the crop frame.
std::vector<GraspSample> grasp_samples(const SceneRecord& scene, std::size_t channels = 1);
std::vector<ConceptSample> concept_samples(const SceneRecord& scene,
                                           std::size_t channels = 1);

// Single-tool scenes of round-robin classes, seeds seed, seed+1, ...
std::vector<SceneRecord> single_tool_scenes(std::size_t count, std::uint64_t seed,
                                            std::size_t size = 160);

struct GraspEvalResult {
  std::size_t attempts = 0;
  std::size_t successes = 0;
  std::vector<std::size_t> class_attempts = std::vector<std::size_t>(kNumClasses, 0);
  std::vector<std::size_t> class_successes = std::vector<std::size_t>(kNumClasses, 0);

  double rate() const {
    return attempts ? static_cast<double>(successes) / static_cast<double>(attempts) : 0.0;
  }
  nlohmann::ordered_json to_json() const;
};

// Success rate formatted as a percentage with one decimal, e.g. "81.4%".
std::string format_rate(std::size_t successes, std::size_t attempts);

// One attempt per ground-truth object: crop around its box, decode the top
// grasp and test grasp_match against every ground-truth grasp. Without a
// model the first ground-truth grasp is used (oracle upper bound). Input
// channels follow the model's config.
GraspEvalResult evaluate_grasps(const std::vector<SceneRecord>& scenes,
                                const GraspNet* net, const MatchThresholds& thresholds,
                                double smoothing_sigma = 2.0);

struct RunOptions {
  std::size_t k = 5;
  bool strict = false;
  std::uint64_t seed = 0;
  double smoothing_sigma = 2.0;
  double worker_direction = kWorkerDirection;
  DetectorConfig detector;
  TaskConfig task;
  double dt = 0.008;
  const Plane* intensity = nullptr;  // needed by two-channel models
};

struct RunResult {
  nlohmann::ordered_json report;  // deterministic
  nlohmann::ordered_json timing;  // per-stage milliseconds
  int exit_code = 0;              // 0 ok, 3 stage failure, 4 safety rejection
  std::vector<std::string> artifacts;
};

// detect -> crop -> grasp maps -> decode -> concepts -> rules -> filter ->
// handover -> setpoints -> trajectory, per detected object. Failures are
// recorded per stage; with `strict` the run stops at the first one. Writes
// overlay.ppm, quality_<i>.ppm and trajectory_<i>.txt under out_dir.
RunResult run_pipeline(const Plane& depth, const GraspNet& net,
                       const ConceptLayer* concepts, const std::vector<SafetyRule>& rules,
                       const CameraCalib& calib, const RunOptions& options,
                       const std::filesystem::path& out_dir);

}  // namespace toolgrasp
