#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "toolgrasp/classes.hpp"
#include "toolgrasp/geometry.hpp"
#include "toolgrasp/image.hpp"
#include "toolgrasp/rng.hpp"

namespace toolgrasp {

// Building block of a tool, in the tool frame (u along the major axis
// towards the head, v across it), pixels at unit scale.
struct Primitive {
  enum class Kind { kRect, kWedge, kRing, kCut };
  Kind kind = Kind::kRect;
  double u0 = 0.0, u1 = 0.0;    // rect, wedge, cut: extent along u
  double v0 = 0.0, v1 = 0.0;    // rect, cut: extent across
  double hw0 = 0.0, hw1 = 0.0;  // wedge: half-width at u0 and u1
  double cu = 0.0, cv = 0.0;    // ring centre
  double r_in = 0.0, r_out = 0.0;
  double height = 0.0;          // extrusion height, scene units

  // Height at (u, v), or a negative value outside the primitive.
  double height_at(double u, double v) const;
};

Primitive rect_prim(double u0, double u1, double v0, double v1, double height);
Primitive wedge_prim(double u0, double u1, double hw0, double hw1, double height);
Primitive ring_prim(double cu, double cv, double r_in, double r_out, double height);
Primitive cut_prim(double u0, double u1, double v0, double v1);

// Stretch of the tool where the gripper may close across it.
struct GraspSegment {
  double u0 = 0.0, u1 = 0.0;
  double v = 0.0;
  double thickness = 0.0;
};

struct ToolShape {
  int class_id = 0;
  std::string name;
  std::vector<Primitive> parts;  // union; cuts remove material
  std::vector<GraspSegment> segments;

  // Local extent over all non-cut parts.
  double u_min() const;
  double u_max() const;
  double v_min() const;
  double v_max() const;
  // Height in the tool frame; 0 off the tool.
  double height_at(double u, double v) const;
};

// Catalogue shapes for the eight classes.
ToolShape tool_shape(int class_id);
// Straight bar of the given size (pixels) and height.
ToolShape bar_shape(double length, double thickness, double height,
                    int class_id = kFile);

struct Pose {
  double x = 0.0;      // centre column
  double y = 0.0;      // centre row
  double angle = 0.0;  // heading of the tool's +u axis, full circle
  double scale = 1.0;
};

struct Placement {
  ToolShape shape;
  Pose pose;
};

struct SceneObject {
  int class_id = 0;
  BBox box;  // tight, normalized
  std::vector<GraspRect> grasps;
  std::optional<OrientedBox> obox;  // known for generated scenes
};

struct SceneRecord {
  Plane depth;
  std::optional<Plane> intensity;  // reflectance in [0, 1]
  std::vector<SceneObject> objects;
  std::uint64_t seed = 0;
};

struct SynthOptions {
  double table_depth = 1.0;
  double noise_sigma = 0.002;
  double dropout = 0.001;  // fraction of pixels reset to table depth
  double table_intensity = 0.35;
  double intensity_sigma = 0.01;
};

// Oriented box of a placed tool, heading along +u.
OrientedBox placed_box(const Placement& p);

// Ground-truth grasps: along every grasp segment, perpendicular to the
// major axis, w = thickness * scale + 10, h = w / 2, spaced h / 2 apart.
std::vector<GraspRect> segment_grasps(const Placement& p);

// Renders the tools onto a flat table: depth = table - height + noise, and
// an intensity image where tools are brighter than the table the taller
// they are.
// Throws PlacementError when a tool leaves the frame or two tools overlap.
SceneRecord synth_scene(const std::vector<Placement>& tools, std::size_t height,
                        std::size_t width, std::uint64_t seed,
                        const SynthOptions& options = {});

// Random non-overlapping poses for `classes` by rejection sampling, 1000
// attempts per tool. A layout where some tool does not fit is restarted;
// throws PlacementError after 20 failed layouts.
std::vector<Placement> random_placements(const std::vector<int>& classes,
                                         std::size_t height, std::size_t width,
                                         Rng& rng);

// Scene with `count` tools of random classes (or the given classes).
SceneRecord random_scene(std::size_t count, std::size_t height, std::size_t width,
                         std::uint64_t seed, const SynthOptions& options = {});
SceneRecord random_scene_of(const std::vector<int>& classes, std::size_t height,
                            std::size_t width, std::uint64_t seed,
                            const SynthOptions& options = {});

// Scene files under `dir`: <stem>_depth.pgm (+ .meta), <stem>.txt (YOLO),
// <stem>_grasps.txt (grouped grasp lines) and, when the scene has one,
// <stem>_intensity.pgm (+ .meta). Returns the file names.
struct SceneFiles {
  std::string depth;
  std::string boxes;
  std::string grasps;
  std::string intensity;  // empty when absent

  bool operator==(const SceneFiles&) const = default;
};
SceneFiles write_scene(const std::filesystem::path& dir, const std::string& stem,
                       const SceneRecord& scene);
SceneRecord read_scene(const std::filesystem::path& dir, const SceneFiles& files);

// Manifest: one `depth boxes grasps [intensity]` entry per line, '#' comments.
std::string write_manifest(const std::vector<SceneFiles>& entries);
std::vector<SceneFiles> parse_manifest(const std::string& text);

}  // namespace toolgrasp
