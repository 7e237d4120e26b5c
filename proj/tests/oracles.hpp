#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "toolgrasp/geometry.hpp"

namespace toolgrasp::oracle {

// Point-in-rectangle test from the rectangle's own frame: rotate the point
// into (w, h) axes and compare against the half extents.
inline bool inside_rect(const GraspRect& g, double px, double py) {
  const double dx = px - g.x();
  const double dy = py - g.y();
  const double c = std::cos(g.theta());
  const double s = std::sin(g.theta());
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return std::abs(u) <= 0.5 * g.w() && std::abs(v) <= 0.5 * g.h();
}

// IoU by counting cell centres of a grid `subdiv` times finer than a pixel.
inline double raster_iou(const GraspRect& a, const GraspRect& b, int subdiv = 10) {
  const double ra = 0.5 * std::hypot(a.w(), a.h());
  const double rb = 0.5 * std::hypot(b.w(), b.h());
  const double x0 = std::floor(std::min(a.x() - ra, b.x() - rb)) - 1.0;
  const double x1 = std::ceil(std::max(a.x() + ra, b.x() + rb)) + 1.0;
  const double y0 = std::floor(std::min(a.y() - ra, b.y() - rb)) - 1.0;
  const double y1 = std::ceil(std::max(a.y() + ra, b.y() + rb)) + 1.0;
  const double step = 1.0 / subdiv;
  long long in_a = 0, in_b = 0, both = 0;
  for (double y = y0 + 0.5 * step; y < y1; y += step) {
    for (double x = x0 + 0.5 * step; x < x1; x += step) {
      const bool ia = inside_rect(a, x, y);
      const bool ib = inside_rect(b, x, y);
      in_a += ia;
      in_b += ib;
      both += ia && ib;
    }
  }
  const long long uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

// Textbook two-pass Pearson correlation.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace toolgrasp::oracle
