#pragma once

#include <array>
#include <numbers>
#include <vector>

namespace toolgrasp {

// Image-plane conventions used throughout: x is the column, y is the row,
// integer coordinates are pixel centres, and an angle theta describes the
// direction (cos theta, sin theta) in (x, y).

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

constexpr double kPi = std::numbers::pi;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Maps theta to its representative in [-pi/2, pi/2) modulo pi. A parallel
// gripper is symmetric under a half turn. Throws DomainError on non-finite
// input.
double wrap_angle(double theta);

// Maps an angle to (-pi, pi].
double wrap_full_angle(double theta);

// Absolute angular distance in [0, pi] between two directions.
double angular_distance(double a, double b);

// Parallel-gripper grasp rectangle (x, y, h, w, theta). `w` is the opening
// width measured along theta, `h` the jaw size perpendicular to it. The
// angle is normalized into [-pi/2, pi/2) on construction.
class GraspRect {
 public:
  GraspRect(double x, double y, double w, double h, double theta);

  double x() const { return x_; }
  double y() const { return y_; }
  double w() const { return w_; }
  double h() const { return h_; }
  double theta() const { return theta_; }
  Vec2 center() const { return {x_, y_}; }
  double area() const { return w_ * h_; }

  friend bool operator==(const GraspRect&, const GraspRect&) = default;

 private:
  double x_, y_, w_, h_, theta_;
};

using Quad = std::array<Vec2, 4>;

// Corners in counter-clockwise order (in a y-up frame): (-w/2,-h/2),
// (w/2,-h/2), (w/2,h/2), (-w/2,h/2) rotated by theta about the centre.
Quad rect_corners(const GraspRect& g);

// Signed shoelace area; positive for counter-clockwise winding.
double polygon_area(const std::vector<Vec2>& poly);

// Sutherland-Hodgman clip of `subject` against the convex polygon `clip`
// (counter-clockwise). Returns the intersection polygon, possibly empty.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject,
                              const std::vector<Vec2>& clip);

// Exact intersection-over-union of two oriented rectangles.
double rect_iou(const GraspRect& a, const GraspRect& b);

struct MatchThresholds {
  double iou_min = 0.25;
  double angle_max = deg_to_rad(30.0);
};

// Rectangle metric: IoU >= iou_min and angle difference (mod pi) <=
// angle_max.
bool grasp_match(const GraspRect& pred, const GraspRect& gt,
                 const MatchThresholds& thresholds = {});

// YOLO-style normalized axis-aligned box.
struct BBox {
  int class_id = 0;
  double cx = 0.0;
  double cy = 0.0;
  double bw = 0.0;
  double bh = 0.0;

  double x0() const { return cx - 0.5 * bw; }
  double x1() const { return cx + 0.5 * bw; }
  double y0() const { return cy - 0.5 * bh; }
  double y1() const { return cy + 0.5 * bh; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

double bbox_iou(const BBox& a, const BBox& b);

// Clips a box to the unit square. Sets `clamped` when any edge moved.
// Throws DomainError if nothing of the box remains inside.
BBox clamp_to_unit(const BBox& b, bool* clamped = nullptr);

// Pixel-frame bounding box helpers.
BBox bbox_from_pixels(int class_id, double x0, double y0, double x1, double y1,
                      int width, int height);

// Oriented box of a detected tool. `heading` points from the tail of the
// major axis towards its head (the end that may carry a hazard).
struct OrientedBox {
  Vec2 center;
  double length = 0.0;   // extent along heading
  double breadth = 0.0;  // extent across heading
  double heading = 0.0;  // radians, full-circle direction

  Vec2 axis() const;
  Vec2 normal() const;

  // Fractional coordinates of `p`: along = 0 at the tail, 1 at the head;
  // across = 0 on the right-hand side, 1 on the left-hand side.
  Vec2 to_fraction(Vec2 p) const;
  Vec2 from_fraction(double along, double across) const;
};

}  // namespace toolgrasp
