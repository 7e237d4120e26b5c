#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "toolgrasp/geometry.hpp"
#include "toolgrasp/image.hpp"

namespace toolgrasp {

// YOLO annotation lines: `class cx cy w h`, normalized coordinates. Boxes
// reaching outside the unit square are clamped and reported in `warnings`.
// Throws ParseError (with line number) on a wrong field count, non-numeric
// fields, a negative class or a non-positive size.
std::vector<BBox> parse_yolo(const std::string& text,
                             std::vector<std::string>* warnings = nullptr);
// Six decimals per coordinate.
std::string write_yolo(const std::vector<BBox>& boxes);

// Grasp lines `x;y;theta_deg;w;h` in pixels. A comment line `# object N`
// starts the group of object N; other '#' lines and blank lines are ignored.
// Lines before the first marker belong to group 0.
std::vector<GraspRect> parse_grasps(const std::string& text);
std::vector<std::vector<GraspRect>> parse_grasp_groups(const std::string& text);
// Shortest round-trip decimals, theta in degrees.
std::string write_grasps(const std::vector<GraspRect>& grasps);
std::string write_grasp_groups(const std::vector<std::vector<GraspRect>>& groups);

// 16-bit binary graymap (P5, maxval 65535, big-endian samples) with a text
// sidecar `<path>.meta` holding `offset` and `scale`:
//   depth = offset + scale * sample,
// offset = min(depth), scale = (max - min) / 65535 (0 for a constant plane).
// The round-trip error is at most scale / 2.
void write_depth(const std::filesystem::path& path, const Plane& depth);
Plane read_depth(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace toolgrasp
