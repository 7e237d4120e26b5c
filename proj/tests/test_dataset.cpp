#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "toolgrasp/classes.hpp"
#include "toolgrasp/dataset.hpp"
#include "toolgrasp/errors.hpp"
#include "toolgrasp/rng.hpp"
#include "toolgrasp/synth.hpp"

using namespace toolgrasp;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("toolgrasp_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Yolo, ParseWriteRoundTrip) {
  const std::vector<BBox> boxes{{3, 0.5, 0.25, 0.125, 0.2}, {7, 0.1, 0.9, 0.05, 0.1}};
  const auto back = parse_yolo(write_yolo(boxes));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].class_id, boxes[i].class_id);
    EXPECT_NEAR(back[i].cx, boxes[i].cx, 5e-7);
    EXPECT_NEAR(back[i].bh, boxes[i].bh, 5e-7);
  }
  EXPECT_EQ(write_yolo(back), write_yolo(boxes));
}

TEST(Yolo, ErrorsCarryLineNumbers) {
  try {
    parse_yolo("0 0.5 0.5 0.1 0.1\n1 0.5 0.5 0.1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_yolo("-1 0.5 0.5 0.1 0.1\n"), ParseError);
  EXPECT_THROW(parse_yolo("0 0.5 0.5 0 0.1\n"), ParseError);
  EXPECT_THROW(parse_yolo("0 abc 0.5 0.1 0.1\n"), ParseError);
}

TEST(Yolo, OutOfRangeBoxesAreClampedWithWarning) {
  std::vector<std::string> warnings;
  const auto b = parse_yolo("2 0.98 0.5 0.1 0.1\n", &warnings);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_NEAR(b[0].x1(), 1.0, 1e-12);
  EXPECT_NEAR(b[0].x0(), 0.93, 1e-12);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_THROW(parse_yolo("2 1.5 0.5 0.1 0.1\n"), ParseError);
}

TEST(GraspLines, GroupsAndRoundTrip) {
  const std::string text =
      "# object 0\n10;20;30;15;7\n12;22;-45;14;6\n\n# object 1\n# remark\n50;60;90;20;10\n";
  const auto groups = parse_grasp_groups(text);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].size(), 2u);
  EXPECT_EQ(groups[1].size(), 1u);
  EXPECT_NEAR(groups[0][0].theta(), deg_to_rad(30.0), 1e-12);
  // 90 degrees wraps to -90.
  EXPECT_NEAR(groups[1][0].theta(), -kPi / 2.0, 1e-12);
  EXPECT_EQ(parse_grasps(text).size(), 3u);
  const auto again = parse_grasp_groups(write_grasp_groups(groups));
  ASSERT_EQ(again.size(), 2u);
  for (std::size_t g = 0; g < 2; ++g) {
    ASSERT_EQ(again[g].size(), groups[g].size());
    for (std::size_t i = 0; i < groups[g].size(); ++i) {
      EXPECT_EQ(again[g][i].x(), groups[g][i].x());
      EXPECT_NEAR(again[g][i].theta(), groups[g][i].theta(), 1e-12);
    }
  }
  EXPECT_THROW(parse_grasps("1;2;3;4\n"), ParseError);
  EXPECT_THROW(parse_grasps("1;2;3;0;4\n"), ParseError);
}

TEST(Depth, RoundTripWithinHalfStep) {
  const fs::path dir = fresh_dir("depth");
  Rng rng(2);
  Plane d(17, 23);
  for (double& v : d.values) v = rng.uniform(0.8, 1.0);
  write_depth(dir / "d.pgm", d);
  EXPECT_TRUE(fs::exists(dir / "d.pgm.meta"));
  const Plane back = read_depth(dir / "d.pgm");
  ASSERT_EQ(back.height, 17u);
  ASSERT_EQ(back.width, 23u);
  double lo = 1e9, hi = -1e9;
  for (double v : d.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double step = (hi - lo) / 65535.0;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    EXPECT_LE(std::abs(back.values[i] - d.values[i]), 0.5 * step * (1.0 + 1e-9));
  }
  const Plane flat(4, 4, 0.9);
  write_depth(dir / "flat.pgm", flat);
  EXPECT_EQ(read_depth(dir / "flat.pgm"), flat);
}

TEST(Depth, CorruptFilesAreRejected) {
  const fs::path dir = fresh_dir("depth_bad");
  write_text_file(dir / "bad.pgm", "P2\n2 2\n65535\n");
  write_text_file(dir / "bad.pgm.meta", "offset 0\nscale 1\n");
  EXPECT_THROW(read_depth(dir / "bad.pgm"), ParseError);
  write_text_file(dir / "short.pgm", "P5\n2 2\n65535\nab");
  write_text_file(dir / "short.pgm.meta", "offset 0\nscale 1\n");
  EXPECT_THROW(read_depth(dir / "short.pgm"), ParseError);
  EXPECT_THROW(read_depth(dir / "missing.pgm"), IoError);
}

TEST(Synth, EveryClassRendersAndHasGrasps) {
  for (int c = 0; c < static_cast<int>(kNumClasses); ++c) {
    const SceneRecord s = random_scene_of({c}, 160, 160, 11 + c);
    ASSERT_EQ(s.objects.size(), 1u);
    EXPECT_EQ(s.objects[0].class_id, c);
    EXPECT_FALSE(s.objects[0].grasps.empty()) << kClassNames[c];
    // Grasp centres lie inside the tool's box.
    for (const GraspRect& g : s.objects[0].grasps) {
      EXPECT_GE(g.x() / 160.0, s.objects[0].box.x0() - 1e-9);
      EXPECT_LE(g.x() / 160.0, s.objects[0].box.x1() + 1e-9);
      EXPECT_GE(g.y() / 160.0, s.objects[0].box.y0() - 1e-9);
      EXPECT_LE(g.y() / 160.0, s.objects[0].box.y1() + 1e-9);
    }
    // Some pixel is raised above the table.
    double lo = 10.0;
    for (double v : s.depth.values) lo = std::min(lo, v);
    EXPECT_LT(lo, 0.99);
  }
}

TEST(Synth, SeededScenesAreIdentical) {
  const SceneRecord a = random_scene(3, 160, 160, 42);
  const SceneRecord b = random_scene(3, 160, 160, 42);
  EXPECT_EQ(a.depth, b.depth);
  ASSERT_EQ(a.objects.size(), b.objects.size());
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    EXPECT_EQ(a.objects[i].box, b.objects[i].box);
    EXPECT_EQ(a.objects[i].grasps, b.objects[i].grasps);
  }
  EXPECT_NE(random_scene(3, 160, 160, 43).depth, a.depth);
}

TEST(Synth, ToolsAreBrighterThanTheTable) {
  const SceneRecord s = random_scene_of({kWrench}, 160, 160, 6);
  ASSERT_TRUE(s.intensity.has_value());
  double tool = 0.0, table = 0.0;
  std::size_t n_tool = 0, n_table = 0;
  for (std::size_t i = 0; i < s.depth.values.size(); ++i) {
    const double v = s.intensity->values[i];
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    if (s.depth.values[i] < 0.99) {
      tool += v;
      ++n_tool;
    } else {
      table += v;
      ++n_table;
    }
  }
  ASSERT_GT(n_tool, 0u);
  EXPECT_GT(tool / n_tool, table / n_table + 0.2);
  // Depth noise is independent of the intensity image.
  EXPECT_EQ(s.depth, random_scene_of({kWrench}, 160, 160, 6).depth);
}

TEST(Synth, CrowdedLayoutsAreRetried) {
  // The first layout of this seed leaves no room for the second tool.
  EXPECT_NO_THROW(random_scene(2, 160, 160, 21));
  EXPECT_THROW(random_scene(12, 160, 160, 1), PlacementError);
}

TEST(Synth, SegmentGraspsArePerpendicularToTheAxis) {
  Placement p{bar_shape(60, 8, 0.03), {80, 80, 0.4, 1.0}};
  const auto gs = segment_grasps(p);
  ASSERT_FALSE(gs.empty());
  for (const GraspRect& g : gs) {
    EXPECT_NEAR(std::abs(wrap_angle(g.theta() - (0.4 + kPi / 2.0))), 0.0, 1e-9);
    EXPECT_NEAR(g.w(), 18.0, 1e-9);
    EXPECT_NEAR(g.h(), 9.0, 1e-9);
  }
  for (std::size_t i = 1; i < gs.size(); ++i) {
    EXPECT_NEAR(std::hypot(gs[i].x() - gs[i - 1].x(), gs[i].y() - gs[i - 1].y()), 4.5, 1e-9);
  }
}

TEST(Synth, OverlapAndOutOfFrameAreRejected) {
  const ToolShape bar = bar_shape(60, 8, 0.03);
  EXPECT_THROW(synth_scene({{bar, {80, 80, 0, 1}}, {bar, {85, 82, 0.3, 1}}}, 160, 160, 1),
               PlacementError);
  EXPECT_THROW(synth_scene({{bar, {10, 80, 0, 1}}}, 160, 160, 1), PlacementError);
}

TEST(Synth, SceneFilesRoundTrip) {
  const fs::path dir = fresh_dir("scene");
  const SceneRecord s = random_scene(2, 160, 160, 5);
  const SceneFiles f = write_scene(dir, "scene_0001", s);
  const SceneRecord back = read_scene(dir, f);
  ASSERT_EQ(back.objects.size(), s.objects.size());
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    EXPECT_EQ(back.objects[i].class_id, s.objects[i].class_id);
    EXPECT_NEAR(back.objects[i].box.cx, s.objects[i].box.cx, 1e-6);
    ASSERT_EQ(back.objects[i].grasps.size(), s.objects[i].grasps.size());
    EXPECT_NEAR(back.objects[i].grasps[0].theta(), s.objects[i].grasps[0].theta(), 1e-9);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < s.depth.values.size(); ++i) {
    worst = std::max(worst, std::abs(back.depth.values[i] - s.depth.values[i]));
  }
  EXPECT_LT(worst, 1e-5);
  EXPECT_EQ(f.intensity, "scene_0001_intensity.pgm");
  ASSERT_TRUE(back.intensity.has_value());
  worst = 0.0;
  for (std::size_t i = 0; i < s.intensity->values.size(); ++i) {
    worst = std::max(worst, std::abs(back.intensity->values[i] - s.intensity->values[i]));
  }
  EXPECT_LT(worst, 1e-5);

  SceneFiles bare = f;
  bare.intensity.clear();
  EXPECT_FALSE(read_scene(dir, bare).intensity.has_value());
  const std::vector<SceneFiles> entries{f, bare};
  const auto parsed = parse_manifest(write_manifest(entries));
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[0], f);
  EXPECT_EQ(parsed[1], bare);
  EXPECT_THROW(parse_manifest("a b\n"), ParseError);
  EXPECT_THROW(parse_manifest("a b c d e\n"), ParseError);
}
