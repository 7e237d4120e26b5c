#include <gtest/gtest.h>

#include <cmath>

#include "toolgrasp/classes.hpp"
#include "toolgrasp/errors.hpp"
#include "toolgrasp/rng.hpp"
#include "toolgrasp/safety.hpp"

using namespace toolgrasp;

namespace {

ScoredGrasp at(double x, double y, double score = 0.5) {
  return {GraspRect(x, y, 10, 5, 0.0), score, 0, 0};
}

// Independent membership: inside the quadrilateral spanned by the region's
// corners (all edge cross products share a sign).
bool in_region_polygon(const OrientedBox& box, const BoxRegion& r, Vec2 p) {
  const Vec2 q[4] = {box.from_fraction(r.along_min, r.across_min),
                     box.from_fraction(r.along_max, r.across_min),
                     box.from_fraction(r.along_max, r.across_max),
                     box.from_fraction(r.along_min, r.across_max)};
  int pos = 0, neg = 0;
  for (int i = 0; i < 4; ++i) {
    const double c = cross(q[(i + 1) % 4] - q[i], p - q[i]);
    pos += c > 1e-12;
    neg += c < -1e-12;
  }
  return pos == 0 || neg == 0;
}

std::vector<TriggeredAction> reject_far_half() {
  SafetyAction a;
  a.kind = ActionKind::kRejectRegion;
  a.region = {0.5, 1.0, 0.0, 1.0};
  return {{1, a}};
}

}  // namespace

TEST(ParseRules, DefaultsParseAndRoundTrip) {
  const auto rules = parse_rules(default_rules_text());
  ASSERT_EQ(rules.size(), 4u);
  EXPECT_EQ(rules[0].rule_id, 10);
  EXPECT_EQ(rules[0].trigger, TriggerKind::kConcept);
  EXPECT_EQ(rules[0].index, kKnife);
  EXPECT_EQ(rules[0].action.kind, ActionKind::kRejectRegion);
  EXPECT_EQ(rules[0].action.region, (BoxRegion{0.5, 1.0, 0.0, 1.0}));
  EXPECT_EQ(rules[1].action.kind, ActionKind::kRequireRotation);
  EXPECT_NEAR(rules[1].action.cone, kPi / 2.0, 1e-15);
  const auto again = parse_rules(format_rules(rules));
  ASSERT_EQ(again.size(), rules.size());
  for (std::size_t i = 0; i < rules.size(); ++i) {
    EXPECT_EQ(again[i].rule_id, rules[i].rule_id);
    EXPECT_EQ(again[i].index, rules[i].index);
    EXPECT_EQ(again[i].threshold, rules[i].threshold);
    EXPECT_EQ(again[i].action, rules[i].action);
  }
}

TEST(ParseRules, ClassTriggerAndComments) {
  const auto rules = parse_rules("# comment\n\n7; class:2; 0.5; none  # trailing\n");
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_EQ(rules[0].trigger, TriggerKind::kClass);
  EXPECT_EQ(rules[0].index, 2);
  EXPECT_EQ(rules[0].action.kind, ActionKind::kNone);
}

TEST(ParseRules, StrictErrorsCarryLineNumbers) {
  const char* bad[] = {
      "1; concept:3; 0.6\n",
      "1; concept:3; 1.5; none\n",
      "1; concept:3; 0; none\n",
      "1; concept:x; 0.6; none\n",
      "1; colour:3; 0.6; none\n",
      "1; concept:3; 0.6; reject_region:0.5,1,0\n",
      "1; concept:3; 0.6; reject_region:0.8,0.2,0,1\n",
      "1; concept:3; 0.6; require_rotation:200\n",
      "1; concept:3; 0.6; explode\n",
  };
  for (const char* text : bad) {
    try {
      parse_rules(std::string("# header\n") + text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 2u) << text;
    }
  }
  EXPECT_THROW(parse_rules("1; class:1; 0.5; none\n1; class:2; 0.5; none\n"), ParseError);
}

TEST(EvaluateRules, EmptyAndBoundary) {
  EXPECT_TRUE(evaluate_rules({0.9}, 0, {}).empty());
  const auto rules = parse_rules("5; concept:0; 0.6; none\n");
  EXPECT_EQ(evaluate_rules({0.6}, 0, rules).size(), 1u);
  EXPECT_TRUE(evaluate_rules({std::nextafter(0.6, 0.0)}, 0, rules).empty());
}

TEST(EvaluateRules, KnifeBladeTriggersRejectRegion) {
  const auto rules = parse_rules(default_rules_text());
  std::vector<double> concepts(12, 0.1);
  concepts[kKnife] = 0.9;
  const auto out = evaluate_rules(concepts, kKnife, rules);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].rule_id, 10);
  EXPECT_EQ(out[0].action.kind, ActionKind::kRejectRegion);
  EXPECT_EQ(out[1].rule_id, 11);
  EXPECT_EQ(out[1].action.kind, ActionKind::kRequireRotation);
}

TEST(EvaluateRules, ClassTriggerAndUnknownConcept) {
  const auto rules = parse_rules("3; class:6; 0.5; require_rotation:90\n");
  EXPECT_EQ(evaluate_rules({}, 6, rules).size(), 1u);
  EXPECT_TRUE(evaluate_rules({}, 5, rules).empty());
  EXPECT_THROW(evaluate_rules({0.1, 0.2}, 0, parse_rules("1; concept:4; 0.6; none\n")),
               ConfigError);
}

TEST(EvaluateRules, MonotoneInActivations) {
  Rng rng(12);
  const auto rules = parse_rules(default_rules_text());
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(8);
    for (double& v : a) v = rng.uniform();
    const auto before = evaluate_rules(a, 0, rules).size();
    a[rng.below(8)] += rng.uniform(0.0, 0.5);
    EXPECT_GE(evaluate_rules(a, 0, rules).size(), before);
  }
}

TEST(FilterGrasps, IdentityAndAllRejected) {
  const OrientedBox box{{50, 50}, 60, 10, 0.0};
  const std::vector<ScoredGrasp> c{at(30, 50), at(45, 50)};
  const auto same = filter_grasps(c, box, {});
  ASSERT_EQ(same.size(), 2u);
  EXPECT_EQ(same[1].grasp, c[1].grasp);
  EXPECT_TRUE(filter_grasps({at(60, 50), at(75, 52)}, box, reject_far_half()).empty());
}

TEST(FilterGrasps, MixedFiveCandidates) {
  const OrientedBox box{{40, 40}, 60, 12, 0.6};
  const std::vector<ScoredGrasp> c{
      {GraspRect(box.from_fraction(0.2, 0.5).x, box.from_fraction(0.2, 0.5).y, 10, 5, 0), 0.9, 0, 0},
      {GraspRect(box.from_fraction(0.8, 0.4).x, box.from_fraction(0.8, 0.4).y, 10, 5, 0), 0.8, 0, 0},
      {GraspRect(box.from_fraction(0.4, 0.9).x, box.from_fraction(0.4, 0.9).y, 10, 5, 0), 0.7, 0, 0},
      {GraspRect(box.from_fraction(0.95, 0.5).x, box.from_fraction(0.95, 0.5).y, 10, 5, 0), 0.6, 0, 0},
      {GraspRect(box.from_fraction(0.1, 0.1).x, box.from_fraction(0.1, 0.1).y, 10, 5, 0), 0.5, 0, 0}};
  const auto actions = reject_far_half();
  const auto out = filter_grasps(c, box, actions);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].score, 0.9);
  EXPECT_EQ(out[1].score, 0.7);
  EXPECT_EQ(out[2].score, 0.5);
  for (const ScoredGrasp& g : c) {
    const bool expected_in = in_region_polygon(box, actions[0].action.region, g.grasp.center());
    EXPECT_EQ(actions[0].action.region.contains(box, g.grasp.center()), expected_in);
  }
}

TEST(FilterGrasps, RandomRegionMembershipMatchesPolygon) {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const OrientedBox box{{rng.uniform(20, 80), rng.uniform(20, 80)}, rng.uniform(20, 60),
                          rng.uniform(5, 20), rng.uniform(-kPi, kPi)};
    const double a0 = rng.uniform(0, 0.5), c0 = rng.uniform(0, 0.5);
    const BoxRegion r{a0, a0 + rng.uniform(0.1, 0.5), c0, c0 + rng.uniform(0.1, 0.5)};
    const Vec2 p{box.center.x + rng.uniform(-30, 30), box.center.y + rng.uniform(-30, 30)};
    EXPECT_EQ(r.contains(box, p), in_region_polygon(box, r, p));
  }
}

TEST(FilterGrasps, IdempotentSubsetOrderPreserving) {
  Rng rng(14);
  const OrientedBox box{{50, 50}, 60, 14, 1.1};
  const auto actions = reject_far_half();
  for (int t = 0; t < 200; ++t) {
    std::vector<ScoredGrasp> c;
    const std::size_t n = rng.below(12);
    for (std::size_t i = 0; i < n; ++i) {
      c.push_back(at(rng.uniform(10, 90), rng.uniform(10, 90), 1.0 - 0.05 * static_cast<double>(i)));
    }
    const auto once = filter_grasps(c, box, actions);
    const auto twice = filter_grasps(once, box, actions);
    ASSERT_EQ(once.size(), twice.size());
    std::size_t j = 0;
    for (const ScoredGrasp& g : c) {
      if (j < once.size() && once[j].score == g.score && once[j].grasp == g.grasp) ++j;
    }
    EXPECT_EQ(j, once.size());
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(twice[i].grasp, once[i].grasp);
  }
}

TEST(RefineHandover, AlreadySafeIsUnchanged) {
  const GraspRect g(0, 0, 10, 5, 0);
  const HandoverPose p = refine_handover(g, -kPi / 2.0);
  EXPECT_TRUE(p.safe);
  EXPECT_EQ(p.rotation, 0.0);
  EXPECT_NEAR(p.approach_heading, -kPi / 2.0, 1e-15);
  EXPECT_EQ(p.grasp, g);
}

TEST(RefineHandover, PointingAtWorkerIsFlipped) {
  // A full half-turn is required once the cone spans the whole half-plane.
  const HandoverPose p = refine_handover({0, 0, 10, 5, 0}, kWorkerDirection, kPi);
  EXPECT_TRUE(p.safe);
  EXPECT_NEAR(std::abs(p.rotation), kPi, 1e-12);
  EXPECT_NEAR(std::abs(wrap_full_angle(p.approach_heading - kWorkerDirection)), kPi, 1e-12);
}

TEST(RefineHandover, FortyFiveDegreesNeedsFortyFive) {
  const HandoverPose p = refine_handover({0, 0, 10, 5, 0}, kWorkerDirection + kPi / 4.0);
  EXPECT_NEAR(p.rotation, kPi / 4.0, 1e-12);
  EXPECT_NEAR(std::abs(wrap_full_angle(p.approach_heading - kWorkerDirection)), kPi / 2.0, 1e-12);
  // Sweep: no smaller rotation reaches the cone.
  for (double d = -kPi; d <= kPi; d += 1e-3) {
    const double dev = std::abs(wrap_full_angle(kWorkerDirection + kPi / 4.0 + d - kWorkerDirection));
    if (dev >= kPi / 2.0 - 1e-12) {
      EXPECT_GE(std::abs(d), kPi / 4.0 - 1e-12);
    }
  }
}

TEST(RefineHandover, ExactTieGoesCounterClockwise) {
  const HandoverPose p = refine_handover({0, 0, 10, 5, 0}, kWorkerDirection, kPi / 2.0);
  EXPECT_NEAR(p.rotation, kPi / 2.0, 1e-12);
}

TEST(RefineHandover, ConeInvariantAndConfigErrors) {
  Rng rng(15);
  for (int i = 0; i < 500; ++i) {
    const double cone = rng.uniform(0.0, kPi);
    const double worker = rng.uniform(-kPi, kPi);
    const HandoverPose p = refine_handover({0, 0, 10, 5, 0}, rng.uniform(-kPi, kPi), cone, worker);
    EXPECT_TRUE(p.safe);
    EXPECT_GE(std::abs(wrap_full_angle(p.approach_heading - worker)), cone - 1e-9);
  }
  EXPECT_THROW(refine_handover({0, 0, 10, 5, 0}, 0.0, kPi + 0.1), ConfigError);
  EXPECT_THROW(refine_handover({0, 0, 10, 5, 0}, 0.0, -0.1), ConfigError);
}
