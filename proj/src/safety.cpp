#include "toolgrasp/safety.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "toolgrasp/errors.hpp"
#include "toolgrasp/kvconfig.hpp"

namespace toolgrasp {

bool BoxRegion::contains(const OrientedBox& box, Vec2 p) const {
  const Vec2 f = box.to_fraction(p);
  return f.x >= along_min && f.x <= along_max && f.y >= across_min &&
         f.y <= across_max;
}

namespace {

int parse_index(const std::string& tok, std::size_t line) {
  const long long v = parse_int(tok, line);
  if (v < 0 || v > 1'000'000) throw ParseError("index out of range: " + tok, line);
  return static_cast<int>(v);
}

SafetyAction parse_action(const std::string& field, std::size_t line) {
  SafetyAction a;
  const std::string t = trim(field);
  if (t == "none") return a;
  const auto colon = t.find(':');
  if (colon == std::string::npos) {
    throw ParseError("unknown action '" + t + "'", line);
  }
  const std::string kind = trim(t.substr(0, colon));
  const std::string params = t.substr(colon + 1);
  if (kind == "reject_region") {
    const auto parts = split(params, ',');
    if (parts.size() != 4) {
      throw ParseError("reject_region takes 4 fractions, got " +
                           std::to_string(parts.size()),
                       line);
    }
    double v[4];
    for (int i = 0; i < 4; ++i) {
      v[i] = parse_double(parts[static_cast<std::size_t>(i)], line);
      if (v[i] < 0.0 || v[i] > 1.0) {
        throw ParseError("region fraction outside [0, 1]", line);
      }
    }
    if (v[0] > v[1] || v[2] > v[3]) throw ParseError("empty region", line);
    a.kind = ActionKind::kRejectRegion;
    a.region = {v[0], v[1], v[2], v[3]};
    return a;
  }
  if (kind == "require_rotation") {
    const double deg = parse_double(params, line);
    if (deg < 0.0 || deg > 180.0) {
      throw ParseError("safe cone must lie in [0, 180] degrees", line);
    }
    a.kind = ActionKind::kRequireRotation;
    a.cone = deg_to_rad(deg);
    return a;
  }
  throw ParseError("unknown action '" + kind + "'", line);
}

}  // namespace

std::vector<SafetyRule> parse_rules(const std::string& text) {
  std::vector<SafetyRule> rules;
  std::set<int> seen;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto fields = split(line, ';');
    if (fields.size() != 4) {
      throw ParseError("expected 4 ';'-separated fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    SafetyRule r;
    r.rule_id = static_cast<int>(parse_int(fields[0], line_no));
    if (!seen.insert(r.rule_id).second) {
      throw ParseError("duplicate rule id " + std::to_string(r.rule_id), line_no);
    }
    const std::string trig = trim(fields[1]);
    const auto colon = trig.find(':');
    if (colon == std::string::npos) {
      throw ParseError("trigger must be concept:N or class:N", line_no);
    }
    const std::string kind = trim(trig.substr(0, colon));
    if (kind == "concept") {
      r.trigger = TriggerKind::kConcept;
    } else if (kind == "class") {
      r.trigger = TriggerKind::kClass;
    } else {
      throw ParseError("unknown trigger kind '" + kind + "'", line_no);
    }
    r.index = parse_index(trig.substr(colon + 1), line_no);
    r.threshold = parse_double(fields[2], line_no);
    if (!(r.threshold > 0.0 && r.threshold < 1.0)) {
      throw ParseError("threshold must lie in (0, 1)", line_no);
    }
    r.action = parse_action(fields[3], line_no);
    rules.push_back(r);
  }
  std::sort(rules.begin(), rules.end(),
            [](const SafetyRule& a, const SafetyRule& b) { return a.rule_id < b.rule_id; });
  return rules;
}

std::vector<SafetyRule> load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_rules(ss.str());
}

std::string format_rules(const std::vector<SafetyRule>& rules) {
  std::string out;
  for (const SafetyRule& r : rules) {
    out += std::to_string(r.rule_id) + "; ";
    out += (r.trigger == TriggerKind::kConcept ? "concept:" : "class:") +
           std::to_string(r.index) + "; " + format_double(r.threshold) + "; ";
    switch (r.action.kind) {
      case ActionKind::kRejectRegion:
        out += "reject_region:" + format_double(r.action.region.along_min) + "," +
               format_double(r.action.region.along_max) + "," +
               format_double(r.action.region.across_min) + "," +
               format_double(r.action.region.across_max);
        break;
      case ActionKind::kRequireRotation:
        out += "require_rotation:" + format_double(rad_to_deg(r.action.cone));
        break;
      case ActionKind::kNone:
        out += "none";
        break;
    }
    out += '\n';
  }
  return out;
}

std::string default_rules_text() {
  return "# id; trigger; threshold; action\n"
         "# Illustrative defaults. Concept indices follow the class order.\n"
         "10; concept:3; 0.6; reject_region:0.5,1,0,1\n"
         "11; concept:3; 0.6; require_rotation:90\n"
         "20; concept:6; 0.6; require_rotation:90\n"
         "30; concept:5; 0.6; reject_region:0.5,1,0,1\n";
}

std::vector<TriggeredAction> evaluate_rules(const std::vector<double>& concepts,
                                            int class_id,
                                            const std::vector<SafetyRule>& rules) {
  std::vector<const SafetyRule*> ordered;
  for (const SafetyRule& r : rules) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const SafetyRule* a, const SafetyRule* b) {
                     return a->rule_id < b->rule_id;
                   });
  std::vector<TriggeredAction> out;
  for (const SafetyRule* r : ordered) {
    bool fire = false;
    if (r->trigger == TriggerKind::kConcept) {
      if (r->index < 0 || static_cast<std::size_t>(r->index) >= concepts.size()) {
        throw ConfigError("rule " + std::to_string(r->rule_id) +
                          " references concept " + std::to_string(r->index) +
                          " but only " + std::to_string(concepts.size()) +
                          " concepts exist");
      }
      fire = concepts[static_cast<std::size_t>(r->index)] >= r->threshold;
    } else {
      fire = r->index == class_id;
    }
    if (fire) out.push_back({r->rule_id, r->action});
  }
  return out;
}

std::vector<ScoredGrasp> filter_grasps(const std::vector<ScoredGrasp>& candidates,
                                       const OrientedBox& box,
                                       const std::vector<TriggeredAction>& actions) {
  std::vector<ScoredGrasp> out;
  for (const ScoredGrasp& g : candidates) {
    const bool rejected =
        std::any_of(actions.begin(), actions.end(), [&](const TriggeredAction& a) {
          return a.action.kind == ActionKind::kRejectRegion &&
                 a.action.region.contains(box, g.grasp.center());
        });
    if (!rejected) out.push_back(g);
  }
  return out;
}

HandoverPose refine_handover(const GraspRect& grasp, double tool_heading,
                             double cone, double worker_direction) {
  if (!std::isfinite(cone) || cone < 0.0 || cone > kPi) {
    throw ConfigError("safe cone half-angle must lie in [0, pi]");
  }
  HandoverPose pose{grasp, wrap_full_angle(tool_heading), 0.0, true};
  const double d = wrap_full_angle(tool_heading - worker_direction);
  if (std::abs(d) >= cone) return pose;
  // Rotating to +cone or -cone relative to the worker direction.
  const double ccw = cone - d;
  const double cw = -cone - d;
  pose.rotation = std::abs(cw) < std::abs(ccw) ? cw : ccw;
  pose.approach_heading = wrap_full_angle(tool_heading + pose.rotation);
  return pose;
}

}  // namespace toolgrasp
