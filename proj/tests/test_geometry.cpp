#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "toolgrasp/errors.hpp"
#include "toolgrasp/geometry.hpp"
#include "toolgrasp/rng.hpp"

using namespace toolgrasp;

TEST(WrapAngle, CanonicalValues) {
  EXPECT_DOUBLE_EQ(wrap_angle(0.0), 0.0);
  EXPECT_NEAR(wrap_angle(kPi), 0.0, 1e-15);
  EXPECT_NEAR(wrap_angle(2.0), 2.0 - kPi, 1e-15);
  EXPECT_NEAR(wrap_angle(kPi / 2.0), -kPi / 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi / 2.0), -kPi / 2.0);
}

TEST(WrapAngle, DifferenceIsMultipleOfPi) {
  const double w = wrap_angle(2.0);
  const double k = (2.0 - w) / kPi;
  EXPECT_NEAR(k, std::round(k), 1e-12);
}

TEST(WrapAngle, IdempotentAndPiPeriodic) {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const double t = rng.uniform(-20.0, 20.0);
    const double w = wrap_angle(t);
    EXPECT_GE(w, -kPi / 2.0);
    EXPECT_LT(w, kPi / 2.0);
    EXPECT_DOUBLE_EQ(wrap_angle(w), w);
    for (int k = -3; k <= 3; ++k) {
      EXPECT_NEAR(angular_distance(wrap_angle(t + k * kPi), w), 0.0, 1e-12);
    }
  }
}

TEST(WrapAngle, RejectsNonFinite) {
  EXPECT_THROW(wrap_angle(std::nan("")), DomainError);
  EXPECT_THROW(wrap_angle(INFINITY), DomainError);
}

TEST(GraspRect, RejectsDegenerateAndNonFinite) {
  EXPECT_THROW(GraspRect(0, 0, 0, 1, 0), DomainError);
  EXPECT_THROW(GraspRect(0, 0, 1, -1, 0), DomainError);
  EXPECT_THROW(GraspRect(std::nan(""), 0, 1, 1, 0), DomainError);
}

TEST(RectCorners, AxisAlignedSquare) {
  const Quad q = rect_corners({0, 0, 2, 2, 0});
  for (const Vec2& p : q) {
    EXPECT_DOUBLE_EQ(std::abs(p.x), 1.0);
    EXPECT_DOUBLE_EQ(std::abs(p.y), 1.0);
  }
}

TEST(RectCorners, RotatedSquareOnAxes) {
  const Quad q = rect_corners({0, 0, 2, 2, kPi / 4.0});
  for (const Vec2& p : q) {
    EXPECT_NEAR(std::hypot(p.x, p.y), std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(std::min(std::abs(p.x), std::abs(p.y)), 0.0, 1e-12);
  }
}

TEST(RectCorners, CentroidAndWinding) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const GraspRect g(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(1, 30),
                      rng.uniform(1, 30), rng.uniform(-4, 4));
    const Quad q = rect_corners(g);
    double cx = 0, cy = 0;
    for (const Vec2& p : q) {
      cx += p.x / 4.0;
      cy += p.y / 4.0;
    }
    EXPECT_NEAR(cx, g.x(), 1e-12);
    EXPECT_NEAR(cy, g.y(), 1e-12);
    EXPECT_NEAR(std::abs(polygon_area({q.begin(), q.end()})), g.area(), 1e-9);
    for (int k = 0; k < 4; ++k) {
      const Vec2 e1 = q[(k + 1) % 4] - q[k];
      const Vec2 e2 = q[(k + 2) % 4] - q[(k + 1) % 4];
      EXPECT_GT(cross(e1, e2), 0.0);
    }
  }
}

TEST(RectIou, IdentityAndDisjoint) {
  const GraspRect a(10, 10, 8, 4, 0.3);
  EXPECT_NEAR(rect_iou(a, a), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(rect_iou(a, {100, 100, 8, 4, 0.3}), 0.0);
}

TEST(RectIou, HalfOverlapClosedForm) {
  // Overlap 2x2 out of two 4x2 rectangles: 4 / (8 + 8 - 4).
  EXPECT_NEAR(rect_iou({0, 0, 4, 2, 0}, {2, 0, 4, 2, 0}), 1.0 / 3.0, 1e-12);
}

TEST(RectIou, MatchesRasterOracle) {
  Rng rng(2024);
  for (int i = 0; i < 20; ++i) {
    const GraspRect a(rng.uniform(20, 30), rng.uniform(20, 30), rng.uniform(6, 20),
                      rng.uniform(3, 10), rng.uniform(-kPi, kPi));
    const GraspRect b(a.x() + rng.uniform(-5, 5), a.y() + rng.uniform(-5, 5),
                      rng.uniform(6, 20), rng.uniform(3, 10), rng.uniform(-kPi, kPi));
    EXPECT_NEAR(rect_iou(a, b), oracle::raster_iou(a, b), 1e-2);
  }
}

TEST(RectIou, SymmetricBoundedRigidInvariant) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const GraspRect a(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(2, 12),
                      rng.uniform(2, 12), rng.uniform(-2, 2));
    const GraspRect b(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(2, 12),
                      rng.uniform(2, 12), rng.uniform(-2, 2));
    const double iou = rect_iou(a, b);
    EXPECT_GE(iou, 0.0);
    EXPECT_LE(iou, 1.0);
    EXPECT_NEAR(iou, rect_iou(b, a), 1e-12);
    const double phi = rng.uniform(-3, 3);
    const double tx = rng.uniform(-40, 40), ty = rng.uniform(-40, 40);
    auto move = [&](const GraspRect& g) {
      const double c = std::cos(phi), s = std::sin(phi);
      return GraspRect(c * g.x() - s * g.y() + tx, s * g.x() + c * g.y() + ty, g.w(),
                       g.h(), g.theta() + phi);
    };
    EXPECT_NEAR(rect_iou(move(a), move(b)), iou, 1e-9);
  }
}

TEST(GraspMatch, Gates) {
  const GraspRect g(20, 20, 10, 5, 0.2);
  EXPECT_TRUE(grasp_match(g, g));
  EXPECT_FALSE(grasp_match({20, 20, 10, 5, 0.2 + deg_to_rad(45)}, g));
  EXPECT_TRUE(grasp_match(g, g, {0.99, 1e-6}));
}

TEST(GraspMatch, CraftedPairIou03Angle10) {
  // Shifted along w until the raster oracle reports IoU near 0.3.
  const GraspRect gt(30, 30, 20, 10, 0.0);
  const GraspRect pred(39, 30, 20, 10, deg_to_rad(10));
  const double raster = oracle::raster_iou(pred, gt);
  EXPECT_GT(raster, 0.25);
  EXPECT_LT(raster, 0.4);
  EXPECT_NEAR(rect_iou(pred, gt), raster, 1e-2);
  EXPECT_TRUE(grasp_match(pred, gt));
}

TEST(GraspMatch, AngleWrapsAcrossHalfTurn) {
  const GraspRect a(0, 0, 10, 5, kPi / 2.0 - 0.05);
  const GraspRect b(0, 0, 10, 5, -kPi / 2.0 + 0.05);
  EXPECT_NEAR(std::abs(wrap_angle(a.theta() - b.theta())), 0.1, 1e-12);
  EXPECT_TRUE(grasp_match(a, b));
}

TEST(BBoxIou, Cases) {
  const BBox a{0, 0.5, 0.5, 0.2, 0.2};
  EXPECT_NEAR(bbox_iou(a, a), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(bbox_iou(a, {0, 0.1, 0.1, 0.05, 0.05}), 0.0);
  EXPECT_NEAR(bbox_iou(a, {0, 0.6, 0.5, 0.2, 0.2}), 1.0 / 3.0, 1e-12);
}

TEST(BBox, ClampToUnit) {
  bool clamped = false;
  const BBox b = clamp_to_unit({1, 0.95, 0.5, 0.2, 0.2}, &clamped);
  EXPECT_TRUE(clamped);
  EXPECT_NEAR(b.x1(), 1.0, 1e-12);
  EXPECT_NEAR(b.x0(), 0.85, 1e-12);
  clamp_to_unit({1, 0.5, 0.5, 0.2, 0.2}, &clamped);
  EXPECT_FALSE(clamped);
  EXPECT_THROW(clamp_to_unit({1, 2.0, 0.5, 0.2, 0.2}), DomainError);
}

TEST(OrientedBox, FractionRoundTrip) {
  const OrientedBox box{{10, 20}, 40, 10, 0.7};
  const Vec2 p = box.from_fraction(0.25, 0.8);
  const Vec2 f = box.to_fraction(p);
  EXPECT_NEAR(f.x, 0.25, 1e-12);
  EXPECT_NEAR(f.y, 0.8, 1e-12);
  const Vec2 head = box.from_fraction(1.0, 0.5);
  EXPECT_NEAR(head.x, 10 + 20 * std::cos(0.7), 1e-12);
  EXPECT_NEAR(head.y, 20 + 20 * std::sin(0.7), 1e-12);
}
