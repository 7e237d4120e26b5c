#include "toolgrasp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "toolgrasp/errors.hpp"

namespace toolgrasp {

double wrap_angle(double theta) {
  if (!std::isfinite(theta)) {
    throw DomainError("wrap_angle: non-finite angle");
  }
  double t = theta - kPi * std::floor((theta + 0.5 * kPi) / kPi);
  // Rounding can land exactly on the excluded upper bound.
  if (t >= 0.5 * kPi) t -= kPi;
  if (t < -0.5 * kPi) t += kPi;
  return t;
}

double wrap_full_angle(double theta) {
  if (!std::isfinite(theta)) {
    throw DomainError("wrap_full_angle: non-finite angle");
  }
  double t = theta - 2.0 * kPi * std::floor((theta + kPi) / (2.0 * kPi));
  if (t <= -kPi) t += 2.0 * kPi;
  if (t > kPi) t -= 2.0 * kPi;
  return t;
}

double angular_distance(double a, double b) {
  return std::abs(wrap_full_angle(a - b));
}

GraspRect::GraspRect(double x, double y, double w, double h, double theta)
    : x_(x), y_(y), w_(w), h_(h), theta_(0.0) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) ||
      !std::isfinite(h) || !std::isfinite(theta)) {
    throw DomainError("GraspRect: non-finite field");
  }
  if (w <= 0.0 || h <= 0.0) {
    throw DomainError("GraspRect: w and h must be positive (w=" +
                      std::to_string(w) + ", h=" + std::to_string(h) + ")");
  }
  theta_ = wrap_angle(theta);
}

Quad rect_corners(const GraspRect& g) {
  const double c = std::cos(g.theta());
  const double s = std::sin(g.theta());
  const double hw = 0.5 * g.w();
  const double hh = 0.5 * g.h();
  const std::array<Vec2, 4> local = {
      Vec2{-hw, -hh}, Vec2{hw, -hh}, Vec2{hw, hh}, Vec2{-hw, hh}};
  Quad out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {g.x() + c * local[i].x - s * local[i].y,
              g.y() + s * local[i].x + c * local[i].y};
  }
  return out;
}

double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    acc += cross(poly[i], poly[(i + 1) % n]);
  }
  return 0.5 * acc;
}

std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject,
                              const std::vector<Vec2>& clip) {
  std::vector<Vec2> output = subject;
  const std::size_t n = clip.size();
  for (std::size_t e = 0; e < n && !output.empty(); ++e) {
    const Vec2 a = clip[e];
    const Vec2 b = clip[(e + 1) % n];
    const Vec2 edge = b - a;
    auto side = [&](Vec2 p) { return cross(edge, p - a); };

    std::vector<Vec2> input;
    input.swap(output);
    for (std::size_t i = 0, m = input.size(); i < m; ++i) {
      const Vec2 cur = input[i];
      const Vec2 prev = input[(i + m - 1) % m];
      const double sc = side(cur);
      const double sp = side(prev);
      if (sc >= 0.0) {
        if (sp < 0.0) {
          const double t = sp / (sp - sc);
          output.push_back(prev + t * (cur - prev));
        }
        output.push_back(cur);
      } else if (sp >= 0.0) {
        const double t = sp / (sp - sc);
        output.push_back(prev + t * (cur - prev));
      }
    }
  }
  return output;
}

double rect_iou(const GraspRect& a, const GraspRect& b) {
  const double area_a = a.area();
  const double area_b = b.area();
  if (!(area_a > 0.0) || !(area_b > 0.0)) {
    throw DomainError("rect_iou: degenerate rectangle");
  }
  const Quad qa = rect_corners(a);
  const Quad qb = rect_corners(b);
  const std::vector<Vec2> pa(qa.begin(), qa.end());
  const std::vector<Vec2> pb(qb.begin(), qb.end());
  const double inter = std::abs(polygon_area(clip_convex(pa, pb)));
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool grasp_match(const GraspRect& pred, const GraspRect& gt,
                 const MatchThresholds& thresholds) {
  if (!(thresholds.iou_min > 0.0) || !(thresholds.angle_max > 0.0)) {
    throw DomainError("grasp_match: thresholds must be positive");
  }
  const double dtheta = std::abs(wrap_angle(pred.theta() - gt.theta()));
  if (dtheta > thresholds.angle_max) return false;
  return rect_iou(pred, gt) >= thresholds.iou_min;
}

double bbox_iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
  const double ih = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.bw * a.bh + b.bw * b.bh - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

BBox clamp_to_unit(const BBox& b, bool* clamped) {
  const double x0 = std::clamp(b.x0(), 0.0, 1.0);
  const double x1 = std::clamp(b.x1(), 0.0, 1.0);
  const double y0 = std::clamp(b.y0(), 0.0, 1.0);
  const double y1 = std::clamp(b.y1(), 0.0, 1.0);
  const bool changed =
      x0 != b.x0() || x1 != b.x1() || y0 != b.y0() || y1 != b.y1();
  if (clamped) *clamped = changed;
  if (!(x1 > x0) || !(y1 > y0)) {
    throw DomainError("box lies outside the unit square");
  }
  if (!changed) return b;
  return {b.class_id, 0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
}

BBox bbox_from_pixels(int class_id, double x0, double y0, double x1, double y1,
                      int width, int height) {
  const double w = static_cast<double>(width);
  const double h = static_cast<double>(height);
  return {class_id, 0.5 * (x0 + x1) / w, 0.5 * (y0 + y1) / h, (x1 - x0) / w,
          (y1 - y0) / h};
}

Vec2 OrientedBox::axis() const {
  return {std::cos(heading), std::sin(heading)};
}

Vec2 OrientedBox::normal() const {
  return {-std::sin(heading), std::cos(heading)};
}

Vec2 OrientedBox::to_fraction(Vec2 p) const {
  const Vec2 d = p - center;
  return {dot(d, axis()) / length + 0.5, dot(d, normal()) / breadth + 0.5};
}

Vec2 OrientedBox::from_fraction(double along, double across) const {
  return center + (along - 0.5) * length * axis() +
         ((across - 0.5) * breadth) * normal();
}

}  // namespace toolgrasp
