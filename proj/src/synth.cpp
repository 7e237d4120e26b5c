#include "toolgrasp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "toolgrasp/dataset.hpp"
#include "toolgrasp/errors.hpp"
#include "toolgrasp/kvconfig.hpp"

namespace toolgrasp {

double Primitive::height_at(double u, double v) const {
  switch (kind) {
    case Kind::kRect:
    case Kind::kCut:
      return (u >= u0 && u <= u1 && v >= v0 && v <= v1) ? height : -1.0;
    case Kind::kWedge: {
      if (u < u0 || u > u1) return -1.0;
      const double t = u1 > u0 ? (u - u0) / (u1 - u0) : 0.0;
      return std::abs(v) <= hw0 + (hw1 - hw0) * t ? height : -1.0;
    }
    case Kind::kRing: {
      const double r = std::hypot(u - cu, v - cv);
      return (r <= r_out && r >= r_in) ? height : -1.0;
    }
  }
  return -1.0;
}

Primitive rect_prim(double u0, double u1, double v0, double v1, double height) {
  Primitive p;
  p.kind = Primitive::Kind::kRect;
  p.u0 = u0;
  p.u1 = u1;
  p.v0 = v0;
  p.v1 = v1;
  p.height = height;
  return p;
}

Primitive wedge_prim(double u0, double u1, double hw0, double hw1, double height) {
  Primitive p;
  p.kind = Primitive::Kind::kWedge;
  p.u0 = u0;
  p.u1 = u1;
  p.hw0 = hw0;
  p.hw1 = hw1;
  p.height = height;
  return p;
}

Primitive ring_prim(double cu, double cv, double r_in, double r_out, double height) {
  Primitive p;
  p.kind = Primitive::Kind::kRing;
  p.cu = cu;
  p.cv = cv;
  p.r_in = r_in;
  p.r_out = r_out;
  p.height = height;
  return p;
}

Primitive cut_prim(double u0, double u1, double v0, double v1) {
  Primitive p = rect_prim(u0, u1, v0, v1, 0.0);
  p.kind = Primitive::Kind::kCut;
  return p;
}

namespace {

struct Extent {
  double u0, u1, v0, v1;
};

Extent part_extent(const Primitive& p) {
  switch (p.kind) {
    case Primitive::Kind::kRect:
    case Primitive::Kind::kCut:
      return {p.u0, p.u1, p.v0, p.v1};
    case Primitive::Kind::kWedge: {
      const double hw = std::max(p.hw0, p.hw1);
      return {p.u0, p.u1, -hw, hw};
    }
    case Primitive::Kind::kRing:
      return {p.cu - p.r_out, p.cu + p.r_out, p.cv - p.r_out, p.cv + p.r_out};
  }
  return {0, 0, 0, 0};
}

Extent shape_extent(const ToolShape& s) {
  Extent e{1e300, -1e300, 1e300, -1e300};
  for (const Primitive& p : s.parts) {
    if (p.kind == Primitive::Kind::kCut) continue;
    const Extent x = part_extent(p);
    e.u0 = std::min(e.u0, x.u0);
    e.u1 = std::max(e.u1, x.u1);
    e.v0 = std::min(e.v0, x.v0);
    e.v1 = std::max(e.v1, x.v1);
  }
  return e;
}

}  // namespace

double ToolShape::u_min() const { return shape_extent(*this).u0; }
double ToolShape::u_max() const { return shape_extent(*this).u1; }
double ToolShape::v_min() const { return shape_extent(*this).v0; }
double ToolShape::v_max() const { return shape_extent(*this).v1; }

double ToolShape::height_at(double u, double v) const {
  double h = 0.0;
  for (const Primitive& p : parts) {
    if (p.kind == Primitive::Kind::kCut) continue;
    h = std::max(h, p.height_at(u, v));
  }
  for (const Primitive& p : parts) {
    if (p.kind == Primitive::Kind::kCut && p.height_at(u, v) >= 0.0) return 0.0;
  }
  return h;
}

ToolShape tool_shape(int class_id) {
  ToolShape s;
  s.class_id = class_id;
  if (class_id < 0 || class_id >= static_cast<int>(kNumClasses)) {
    throw DomainError("tool_shape: unknown class " + std::to_string(class_id));
  }
  s.name = std::string(kClassNames[static_cast<std::size_t>(class_id)]);
  switch (class_id) {
    case kAllenkey:
      s.parts = {rect_prim(-18, 18, -2, 2, 0.02), rect_prim(13, 18, 2, 14, 0.02)};
      s.segments = {{-14, 9, 0, 4}};
      break;
    case kHammer:
      s.parts = {rect_prim(-30, 16, -3.5, 3.5, 0.035),
                 rect_prim(16, 26, -14, 14, 0.06)};
      s.segments = {{-26, 10, 0, 7}};
      break;
    case kFile:
      s.parts = {rect_prim(-34, -22, -1.5, 1.5, 0.015),
                 rect_prim(-22, 34, -4.5, 4.5, 0.02)};
      s.segments = {{-18, 30, 0, 9}};
      break;
    case kKnife:
      s.parts = {rect_prim(-30, -4, -4.5, 4.5, 0.05),
                 wedge_prim(-4, 32, 5, 1, 0.015)};
      s.segments = {{-26, -8, 0, 9}, {0, 22, 0, 8}};
      break;
    case kPlier:
      s.parts = {ring_prim(0, 0, 0, 7, 0.05), wedge_prim(4, 24, 5, 1.5, 0.04),
                 rect_prim(-30, -2, -10, -4, 0.03), rect_prim(-30, -2, 4, 10, 0.03)};
      s.segments = {{-26, -10, 0, 20}};
      break;
    case kScissor:
      s.parts = {ring_prim(-20, -7, 3, 6.5, 0.03), ring_prim(-20, 7, 3, 6.5, 0.03),
                 rect_prim(-16, -8, -5, 5, 0.03), wedge_prim(-8, 30, 5.5, 1, 0.015)};
      s.segments = {{-12, -2, 0, 11}};
      break;
    case kScrewdriver:
      s.parts = {rect_prim(-32, -6, -6, 6, 0.06), rect_prim(-6, 30, -1.5, 1.5, 0.02)};
      s.segments = {{-28, -10, 0, 12}};
      break;
    case kWrench:
      s.parts = {rect_prim(-20, 20, -3, 3, 0.02), ring_prim(-26, 0, 3.5, 8, 0.025),
                 ring_prim(26, 0, 0, 8, 0.025), cut_prim(28, 36, -3.5, 3.5)};
      s.segments = {{-14, 14, 0, 6}};
      break;
    default:
      break;
  }
  return s;
}

ToolShape bar_shape(double length, double thickness, double height, int class_id) {
  if (!(length > 0.0) || !(thickness > 0.0) || !(height > 0.0)) {
    throw DomainError("bar_shape: dimensions must be positive");
  }
  ToolShape s;
  s.class_id = class_id;
  s.name = "bar";
  s.parts = {rect_prim(-0.5 * length, 0.5 * length, -0.5 * thickness,
                       0.5 * thickness, height)};
  const double margin = std::min(0.25 * length, thickness);
  s.segments = {{-0.5 * length + margin, 0.5 * length - margin, 0.0, thickness}};
  return s;
}

namespace {

Vec2 to_image(const Pose& pose, double u, double v) {
  const double c = std::cos(pose.angle);
  const double s = std::sin(pose.angle);
  return {pose.x + pose.scale * (c * u - s * v), pose.y + pose.scale * (s * u + c * v)};
}

Vec2 to_tool(const Pose& pose, Vec2 p) {
  const double c = std::cos(pose.angle);
  const double s = std::sin(pose.angle);
  const Vec2 d = p - Vec2{pose.x, pose.y};
  return {(c * d.x + s * d.y) / pose.scale, (-s * d.x + c * d.y) / pose.scale};
}

double bounding_radius(const ToolShape& shape, double scale) {
  const Extent e = shape_extent(shape);
  const double du = std::max(std::abs(e.u0), std::abs(e.u1));
  const double dv = std::max(std::abs(e.v0), std::abs(e.v1));
  return scale * std::hypot(du, dv);
}

}  // namespace

OrientedBox placed_box(const Placement& p) {
  const Extent e = shape_extent(p.shape);
  OrientedBox box;
  box.center = to_image(p.pose, 0.5 * (e.u0 + e.u1), 0.5 * (e.v0 + e.v1));
  box.length = (e.u1 - e.u0) * p.pose.scale;
  box.breadth = (e.v1 - e.v0) * p.pose.scale;
  box.heading = wrap_full_angle(p.pose.angle);
  return box;
}

std::vector<GraspRect> segment_grasps(const Placement& p) {
  std::vector<GraspRect> out;
  const double theta = p.pose.angle + 0.5 * kPi;
  for (const GraspSegment& seg : p.shape.segments) {
    const double w = seg.thickness * p.pose.scale + 10.0;
    const double h = 0.5 * w;
    const double step = 0.5 * h / p.pose.scale;
    const double span = seg.u1 - seg.u0;
    const auto n = static_cast<std::size_t>(std::floor(span / step)) + 1;
    const double start = 0.5 * (seg.u0 + seg.u1) - 0.5 * step * static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 c = to_image(p.pose, start + step * static_cast<double>(i), seg.v);
      out.emplace_back(c.x, c.y, w, h, theta);
    }
  }
  return out;
}

SceneRecord synth_scene(const std::vector<Placement>& tools, std::size_t height,
                        std::size_t width, std::uint64_t seed,
                        const SynthOptions& options) {
  if (height == 0 || width == 0) throw DomainError("synth_scene: empty frame");
  SceneRecord scene;
  scene.seed = seed;
  Plane tool_height(height, width, 0.0);
  std::vector<int> owner(height * width, -1);

  for (std::size_t t = 0; t < tools.size(); ++t) {
    const Placement& pl = tools[t];
    if (!(pl.pose.scale > 0.0)) throw DomainError("synth_scene: scale must be positive");
    const double radius = bounding_radius(pl.shape, pl.pose.scale) + 1.0;
    const auto r0 = static_cast<long long>(std::floor(pl.pose.y - radius));
    const auto r1 = static_cast<long long>(std::ceil(pl.pose.y + radius));
    const auto c0 = static_cast<long long>(std::floor(pl.pose.x - radius));
    const auto c1 = static_cast<long long>(std::ceil(pl.pose.x + radius));
    long long min_r = -1, max_r = -1, min_c = -1, max_c = -1;
    for (long long r = r0; r <= r1; ++r) {
      for (long long c = c0; c <= c1; ++c) {
        const Vec2 local = to_tool(pl.pose, {static_cast<double>(c), static_cast<double>(r)});
        const double h = pl.shape.height_at(local.x, local.y);
        if (!(h > 0.0)) continue;
        if (r < 0 || c < 0 || r >= static_cast<long long>(height) ||
            c >= static_cast<long long>(width)) {
          throw PlacementError("tool " + std::to_string(t) + " (" + pl.shape.name +
                               ") leaves the frame");
        }
        const std::size_t idx = static_cast<std::size_t>(r) * width +
                                static_cast<std::size_t>(c);
        if (owner[idx] >= 0 && owner[idx] != static_cast<int>(t)) {
          throw PlacementError("tools " + std::to_string(owner[idx]) + " and " +
                               std::to_string(t) + " overlap");
        }
        owner[idx] = static_cast<int>(t);
        tool_height.values[idx] = h;
        if (min_r < 0) {
          min_r = max_r = r;
          min_c = max_c = c;
        }
        min_r = std::min(min_r, r);
        max_r = std::max(max_r, r);
        min_c = std::min(min_c, c);
        max_c = std::max(max_c, c);
      }
    }
    if (min_r < 0) {
      throw PlacementError("tool " + std::to_string(t) + " covers no pixel");
    }
    SceneObject obj;
    obj.class_id = pl.shape.class_id;
    obj.box = bbox_from_pixels(pl.shape.class_id, static_cast<double>(min_c) - 0.5,
                               static_cast<double>(min_r) - 0.5,
                               static_cast<double>(max_c) + 0.5,
                               static_cast<double>(max_r) + 0.5,
                               static_cast<int>(width), static_cast<int>(height));
    obj.grasps = segment_grasps(pl);
    obj.obox = placed_box(pl);
    scene.objects.push_back(std::move(obj));
  }

  Rng rng(seed ^ 0x5851f42d4c957f2dULL);
  scene.depth = Plane(height, width);
  for (std::size_t i = 0; i < scene.depth.values.size(); ++i) {
    double d = options.table_depth - tool_height.values[i];
    d += options.noise_sigma * rng.normal();
    if (rng.uniform() < options.dropout) d = options.table_depth;
    scene.depth.values[i] = d;
  }
  Rng shade(seed ^ 0x9e3779b97f4a7c15ULL);
  scene.intensity = Plane(height, width);
  for (std::size_t i = 0; i < scene.intensity->values.size(); ++i) {
    const double h = tool_height.values[i];
    const double base = h > 0.0 ? 0.6 + 5.0 * h : options.table_intensity;
    scene.intensity->values[i] =
        std::clamp(base + options.intensity_sigma * shade.normal(), 0.0, 1.0);
  }
  return scene;
}

namespace {

// One left-to-right layout attempt; empty when some tool does not fit.
std::vector<Placement> try_layout(const std::vector<int>& classes, std::size_t height,
                                  std::size_t width, Rng& rng, std::string* failed) {
  std::vector<Placement> out;
  std::vector<double> radii;
  constexpr int kAttempts = 1000;
  constexpr double kFrameMargin = 2.0;
  constexpr double kGap = 3.0;
  for (int cls : classes) {
    ToolShape shape = tool_shape(cls);
    bool placed = false;
    for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
      Pose pose;
      pose.angle = rng.uniform(-kPi, kPi);
      pose.scale = rng.uniform(0.9, 1.1);
      const double r = bounding_radius(shape, pose.scale) + kFrameMargin;
      const double w = static_cast<double>(width) - 1.0;
      const double h = static_cast<double>(height) - 1.0;
      pose.x = rng.uniform(r, w - r);
      pose.y = rng.uniform(r, h - r);
      if (2.0 * r > w || 2.0 * r > h) continue;
      bool clear = true;
      for (std::size_t j = 0; j < out.size() && clear; ++j) {
        const double dist = std::hypot(pose.x - out[j].pose.x, pose.y - out[j].pose.y);
        clear = dist > r + radii[j] + kGap;
      }
      if (!clear) continue;
      out.push_back({shape, pose});
      radii.push_back(r);
      placed = true;
    }
    if (!placed) {
      *failed = shape.name;
      return {};
    }
  }
  return out;
}

}  // namespace

std::vector<Placement> random_placements(const std::vector<int>& classes,
                                         std::size_t height, std::size_t width,
                                         Rng& rng) {
  constexpr int kLayouts = 20;
  std::string failed;
  for (int layout = 0; layout < kLayouts; ++layout) {
    auto out = try_layout(classes, height, width, rng, &failed);
    if (!out.empty() || classes.empty()) return out;
  }
  throw PlacementError("cannot place " + failed + " in " + std::to_string(kLayouts) +
                       " layouts");
}

SceneRecord random_scene_of(const std::vector<int>& classes, std::size_t height,
                            std::size_t width, std::uint64_t seed,
                            const SynthOptions& options) {
  Rng rng(seed);
  return synth_scene(random_placements(classes, height, width, rng), height, width,
                     seed, options);
}

SceneRecord random_scene(std::size_t count, std::size_t height, std::size_t width,
                         std::uint64_t seed, const SynthOptions& options) {
  Rng rng(seed ^ 0x2545f4914f6cdd1dULL);
  std::vector<int> classes;
  for (std::size_t i = 0; i < count; ++i) {
    classes.push_back(static_cast<int>(rng.below(kNumClasses)));
  }
  return random_scene_of(classes, height, width, seed, options);
}

SceneFiles write_scene(const std::filesystem::path& dir, const std::string& stem,
                       const SceneRecord& scene) {
  SceneFiles files{stem + "_depth.pgm", stem + ".txt", stem + "_grasps.txt", ""};
  write_depth(dir / files.depth, scene.depth);
  if (scene.intensity) {
    files.intensity = stem + "_intensity.pgm";
    write_depth(dir / files.intensity, *scene.intensity);
  }
  std::vector<BBox> boxes;
  std::vector<std::vector<GraspRect>> groups;
  for (const SceneObject& o : scene.objects) {
    boxes.push_back(o.box);
    groups.push_back(o.grasps);
  }
  write_text_file(dir / files.boxes, write_yolo(boxes));
  write_text_file(dir / files.grasps, write_grasp_groups(groups));
  return files;
}

SceneRecord read_scene(const std::filesystem::path& dir, const SceneFiles& files) {
  SceneRecord scene;
  scene.depth = read_depth(dir / files.depth);
  if (!files.intensity.empty()) {
    scene.intensity = read_depth(dir / files.intensity);
    if (scene.intensity->height != scene.depth.height ||
        scene.intensity->width != scene.depth.width) {
      throw ParseError(files.intensity + ": size differs from the depth image");
    }
  }
  const auto boxes = parse_yolo(read_text_file(dir / files.boxes));
  auto groups = parse_grasp_groups(read_text_file(dir / files.grasps));
  if (groups.size() > boxes.size()) {
    throw ParseError(files.grasps + ": grasps for " + std::to_string(groups.size()) +
                     " objects but " + std::to_string(boxes.size()) + " boxes");
  }
  groups.resize(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    SceneObject o;
    o.class_id = boxes[i].class_id;
    o.box = boxes[i];
    o.grasps = std::move(groups[i]);
    scene.objects.push_back(std::move(o));
  }
  return scene;
}

std::string write_manifest(const std::vector<SceneFiles>& entries) {
  std::string out = "# depth boxes grasps [intensity]\n";
  for (const SceneFiles& e : entries) {
    out += e.depth + " " + e.boxes + " " + e.grasps;
    if (!e.intensity.empty()) out += " " + e.intensity;
    out += "\n";
  }
  return out;
}

std::vector<SceneFiles> parse_manifest(const std::string& text) {
  std::vector<SceneFiles> out;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto toks = split_ws(line);
    if (toks.size() != 3 && toks.size() != 4) {
      throw ParseError("expected 'depth boxes grasps [intensity]', got " +
                           std::to_string(toks.size()) + " fields",
                       line_no);
    }
    out.push_back({toks[0], toks[1], toks[2], toks.size() == 4 ? toks[3] : ""});
  }
  return out;
}

}  // namespace toolgrasp
