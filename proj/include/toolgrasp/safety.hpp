#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "toolgrasp/geometry.hpp"
#include "toolgrasp/ggcnn.hpp"

namespace toolgrasp {

enum class TriggerKind { kConcept, kClass };
enum class ActionKind { kRejectRegion, kRequireRotation, kNone };

// Region of a tool's oriented box in fractional coordinates (see
// OrientedBox::to_fraction); bounds are inclusive.
struct BoxRegion {
  double along_min = 0.0;
  double along_max = 1.0;
  double across_min = 0.0;
  double across_max = 1.0;

  bool contains(const OrientedBox& box, Vec2 p) const;
  friend bool operator==(const BoxRegion&, const BoxRegion&) = default;
};

struct SafetyAction {
  ActionKind kind = ActionKind::kNone;
  BoxRegion region;             // kRejectRegion
  double cone = kPi / 2.0;      // kRequireRotation: safe-cone half-angle, rad

  friend bool operator==(const SafetyAction&, const SafetyAction&) = default;
};

// A concept rule triggers when activation[index] >= threshold; a class rule
// triggers when the detected class equals `index` (its threshold is still
// validated but otherwise unused).
struct SafetyRule {
  int rule_id = 0;
  TriggerKind trigger = TriggerKind::kConcept;
  int index = 0;
  double threshold = 0.6;
  SafetyAction action;
};

struct TriggeredAction {
  int rule_id = 0;
  SafetyAction action;
};

// Rules file, one rule per line, '#' starts a comment:
//   rule_id; concept:N | class:N; threshold; action
// where action is `reject_region:a0,a1,c0,c1` (along and across fractions),
// `require_rotation:deg` (safe-cone half-angle) or `none`. Rule ids must be
// unique; rules are returned sorted by id. Errors carry the line number.
std::vector<SafetyRule> parse_rules(const std::string& text);
std::vector<SafetyRule> load_rules(const std::filesystem::path& path);
std::string format_rules(const std::vector<SafetyRule>& rules);

// Illustrative defaults: knife blade rejection and rotation, screwdriver tip
// rotation, scissor blade rejection.
std::string default_rules_text();

// Actions of every triggered rule, in rule-id order. Throws ConfigError when
// a concept rule names an index outside `concepts`.
std::vector<TriggeredAction> evaluate_rules(const std::vector<double>& concepts,
                                            int class_id,
                                            const std::vector<SafetyRule>& rules);

// Drops every candidate whose centre lies in a rejected region of `box`.
// Survivors keep their order.
std::vector<ScoredGrasp> filter_grasps(const std::vector<ScoredGrasp>& candidates,
                                       const OrientedBox& box,
                                       const std::vector<TriggeredAction>& actions);

struct HandoverPose {
  GraspRect grasp;
  double approach_heading = 0.0;  // direction of the hazard axis, rad
  double rotation = 0.0;          // signed change applied to the tool heading
  bool safe = false;
};

// Default worker direction: +y in the image frame.
constexpr double kWorkerDirection = kPi / 2.0;

// Smallest rotation of `tool_heading` such that the hazard axis deviates
// from `worker_direction` by at least `cone`. An exact tie between the two
// rotation senses goes counter-clockwise. Throws ConfigError when the cone
// exceeds pi or is negative.
HandoverPose refine_handover(const GraspRect& grasp, double tool_heading,
                             double cone = kPi / 2.0,
                             double worker_direction = kWorkerDirection);

}  // namespace toolgrasp
