#include "toolgrasp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "toolgrasp/errors.hpp"
#include "toolgrasp/kvconfig.hpp"

namespace toolgrasp {

void CameraCalib::validate() const {
  const Eigen::Matrix3d r = transform.block<3, 3>(0, 0);
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!transform.allFinite()) throw ConfigError("calibration: non-finite transform");
  if (ortho > 1e-9) {
    throw ConfigError("calibration: rotation block is not orthonormal (deviation " +
                      format_double(ortho) + ")");
  }
  if (std::abs(r.determinant() - 1.0) > 1e-9) {
    throw ConfigError("calibration: rotation determinant must be +1");
  }
  if (transform.row(3) != Eigen::RowVector4d(0, 0, 0, 1)) {
    throw ConfigError("calibration: last row must be 0 0 0 1");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ConfigError("calibration: scale must be positive");
  }
  if (!std::isfinite(table_height)) throw ConfigError("calibration: bad table height");
}

double CameraCalib::yaw() const { return std::atan2(transform(1, 0), transform(0, 0)); }

CameraCalib parse_calib(const std::string& text) {
  std::vector<double> v;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    for (const auto& tok : split_ws(raw.substr(0, raw.find('#')))) {
      v.push_back(parse_double(tok, line_no));
    }
  }
  if (v.size() != 14) {
    throw ParseError("calibration needs 14 numbers (3x4 transform, scale, table "
                     "height), got " + std::to_string(v.size()));
  }
  CameraCalib c;
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 4; ++col) c.transform(r, col) = v[static_cast<std::size_t>(4 * r + col)];
  }
  c.scale = v[12];
  c.table_height = v[13];
  c.validate();
  return c;
}

std::string format_calib(const CameraCalib& calib) {
  std::string out = "# camera -> base [R|t], row-major\n";
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 4; ++col) {
      out += (col ? " " : "") + format_double(calib.transform(r, col));
    }
    out += '\n';
  }
  out += "# metres per pixel, table height\n";
  out += format_double(calib.scale) + " " + format_double(calib.table_height) + "\n";
  return out;
}

CameraCalib default_calib() {
  CameraCalib c;
  c.transform(0, 3) = 0.35;
  c.transform(1, 3) = -0.08;
  c.scale = 0.001;
  c.table_height = 0.02;
  return c;
}

bool Workspace::contains(const Eigen::Vector3d& p) const {
  return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

GraspPose grasp_to_pose(const GraspRect& g, const CameraCalib& calib,
                        const Workspace& workspace) {
  calib.validate();
  const Eigen::Vector4d cam(g.x() * calib.scale, g.y() * calib.scale, 0.0, 1.0);
  GraspPose pose;
  pose.position = (calib.transform * cam).head<3>();
  pose.position.z() += calib.table_height;
  pose.yaw = wrap_angle(g.theta() + calib.yaw());
  if (!workspace.contains(pose.position)) {
    std::ostringstream os;
    os << "grasp at pixel (" << g.x() << ", " << g.y() << ") maps to ("
       << pose.position.transpose() << "), outside the workspace";
    throw WorkspaceError(os.str());
  }
  return pose;
}

Vec2 pose_to_pixel(const Eigen::Vector3d& position, const CameraCalib& calib) {
  const Eigen::Matrix3d r = calib.transform.block<3, 3>(0, 0);
  Eigen::Vector3d p = position - calib.transform.block<3, 1>(0, 3);
  p.z() -= calib.table_height;
  const Eigen::Vector3d cam = r.transpose() * p;
  return {cam.x() / calib.scale, cam.y() / calib.scale};
}

std::vector<Setpoint> plan_task(const GraspPose& pose, const HandoverPose& handover,
                                const TaskConfig& cfg, double frame_yaw) {
  if (!handover.safe) throw SafetyError("handover pose is not marked safe");
  const Eigen::Vector3d up(0.0, 0.0, 1.0);
  const double h = wrap_full_angle(handover.approach_heading + frame_yaw);
  const Eigen::Vector3d hand =
      cfg.handover_center + cfg.handover_radius * Eigen::Vector3d(std::cos(h), std::sin(h), 0.0);
  std::vector<Setpoint> sps = {
      {"pre_grasp", pose.position + cfg.clearance * up, pose.yaw, Gripper::kOpen, 0.0},
      {"grasp", pose.position, pose.yaw, Gripper::kClosed, cfg.dwell},
      {"lift", pose.position + cfg.lift * up, pose.yaw, Gripper::kClosed, 0.0},
      {"handover", hand, h, Gripper::kClosed, 0.0},
      {"release", hand, h, Gripper::kOpen, cfg.dwell},
  };
  for (const Setpoint& sp : sps) {
    if (!cfg.workspace.contains(sp.position)) {
      throw WorkspaceError("setpoint '" + sp.label + "' leaves the workspace");
    }
  }
  return sps;
}

nlohmann::ordered_json setpoints_to_json(const std::vector<Setpoint>& sps) {
  auto arr = nlohmann::ordered_json::array();
  for (const Setpoint& sp : sps) {
    nlohmann::ordered_json j;
    j["label"] = sp.label;
    j["position"] = {sp.position.x(), sp.position.y(), sp.position.z()};
    j["yaw"] = sp.yaw;
    j["gripper"] = sp.gripper == Gripper::kOpen ? "open" : "closed";
    j["dwell"] = sp.dwell;
    arr.push_back(j);
  }
  return arr;
}

TrapezoidProfile trapezoid_profile(double d, double v_max, double a_max) {
  if (!(d >= 0.0) || !std::isfinite(d)) throw DomainError("trapezoid_profile: d must be >= 0");
  if (!(v_max > 0.0) || !(a_max > 0.0)) {
    throw DomainError("trapezoid_profile: limits must be positive");
  }
  TrapezoidProfile p;
  p.distance = d;
  p.accel = a_max;
  if (d == 0.0) return p;
  if (d >= v_max * v_max / a_max) {
    p.v_peak = v_max;
    p.t_accel = v_max / a_max;
    p.t_cruise = d / v_max - v_max / a_max;
    p.t_total = d / v_max + v_max / a_max;
  } else {
    p.v_peak = std::sqrt(d * a_max);
    p.t_accel = p.v_peak / a_max;
    p.t_total = 2.0 * p.t_accel;
  }
  return p;
}

double TrapezoidProfile::position(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= t_total) return distance;
  if (t < t_accel) return 0.5 * accel * t * t;
  const double d_acc = 0.5 * accel * t_accel * t_accel;
  if (t <= t_accel + t_cruise) return d_acc + v_peak * (t - t_accel);
  const double rem = t_total - t;
  return distance - 0.5 * accel * rem * rem;
}

double TrapezoidProfile::velocity(double t) const {
  if (t <= 0.0 || t >= t_total) return 0.0;
  if (t < t_accel) return accel * t;
  if (t <= t_accel + t_cruise) return v_peak;
  return accel * (t_total - t);
}

Eigen::VectorXd PlanarArm::ik(const Setpoint& sp) const {
  const double x = sp.position.x() - l3 * std::cos(sp.yaw);
  const double y = sp.position.y() - l3 * std::sin(sp.yaw);
  const double r2 = x * x + y * y;
  const double c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  if (c2 > 1.0 || c2 < -1.0) {
    throw ReachabilityError("setpoint '" + sp.label + "' is out of reach");
  }
  const double q2 = std::acos(c2);
  const double q1 = std::atan2(y, x) - std::atan2(l2 * std::sin(q2), l1 + l2 * std::cos(q2));
  const double q3 = wrap_full_angle(sp.yaw - q1 - q2);
  Eigen::VectorXd q(4);
  q << wrap_full_angle(q1), q2, q3, sp.position.z();
  return q;
}

Eigen::Vector4d PlanarArm::fk(const Eigen::VectorXd& q) const {
  const double a1 = q(0), a12 = q(0) + q(1), a123 = q(0) + q(1) + q(2);
  return {l1 * std::cos(a1) + l2 * std::cos(a12) + l3 * std::cos(a123),
          l1 * std::sin(a1) + l2 * std::sin(a12) + l3 * std::sin(a123), q(3),
          wrap_full_angle(a123)};
}

JointLimits default_limits() {
  return {{1.0, 1.0, 1.5, 0.25}, {2.0, 2.0, 3.0, 0.5}};
}

namespace {

struct Piece {
  double t0 = 0.0;
  double duration = 0.0;
  Eigen::VectorXd q0;
  Eigen::VectorXd delta;  // zero for a hold
  TrapezoidProfile sigma;  // normalized: distance 1
  bool hold = true;
};

}  // namespace

JointTrajectory plan_trajectory(const std::vector<Setpoint>& setpoints,
                                const IkFunction& ik, const JointLimits& limits,
                                double dt, const std::optional<Eigen::VectorXd>& start) {
  if (!(dt > 0.0)) throw DomainError("plan_trajectory: dt must be positive");
  JointTrajectory traj;
  if (setpoints.empty() && !start) return traj;

  std::vector<Eigen::VectorXd> qs;
  std::vector<double> dwell;
  if (start) {
    qs.push_back(*start);
    dwell.push_back(0.0);
  }
  for (const Setpoint& sp : setpoints) {
    qs.push_back(ik(sp));
    dwell.push_back(std::max(0.0, sp.dwell));
  }
  const auto n = qs.front().size();
  if (static_cast<std::size_t>(n) != limits.v_max.size() ||
      static_cast<std::size_t>(n) != limits.a_max.size()) {
    throw ConfigError("plan_trajectory: " + std::to_string(n) + " joints but " +
                      std::to_string(limits.v_max.size()) + " velocity limits");
  }
  for (const auto& q : qs) {
    if (q.size() != n || !q.allFinite()) throw ReachabilityError("IK returned an invalid solution");
  }

  std::vector<Piece> pieces;
  double t = 0.0;
  for (std::size_t k = 0; k < qs.size(); ++k) {
    if (k > 0) {
      Piece p;
      p.t0 = t;
      p.q0 = qs[k - 1];
      p.delta = qs[k] - qs[k - 1];
      double v_sig = 1e300, a_sig = 1e300;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d = std::abs(p.delta(j));
        if (d == 0.0) continue;
        v_sig = std::min(v_sig, limits.v_max[static_cast<std::size_t>(j)] / d);
        a_sig = std::min(a_sig, limits.a_max[static_cast<std::size_t>(j)] / d);
      }
      if (v_sig < 1e300) {
        p.hold = false;
        p.sigma = trapezoid_profile(1.0, v_sig, a_sig);
        p.duration = p.sigma.t_total;
        pieces.push_back(p);
        t += p.duration;
      }
    }
    if (dwell[k] > 0.0) {
      Piece p;
      p.t0 = t;
      p.q0 = qs[k];
      p.delta = Eigen::VectorXd::Zero(n);
      p.duration = dwell[k];
      pieces.push_back(p);
      t += p.duration;
    }
  }
  const double total = t;

  auto sample = [&](double time, std::size_t& cursor) {
    while (cursor + 1 < pieces.size() && time >= pieces[cursor].t0 + pieces[cursor].duration) {
      ++cursor;
    }
    if (pieces.empty()) {
      return std::make_pair(Eigen::VectorXd(qs.back()), Eigen::VectorXd(Eigen::VectorXd::Zero(n)));
    }
    const Piece& p = pieces[cursor];
    const double local = std::clamp(time - p.t0, 0.0, p.duration);
    if (p.hold) return std::make_pair(Eigen::VectorXd(p.q0), Eigen::VectorXd(Eigen::VectorXd::Zero(n)));
    Eigen::VectorXd q = p.q0 + p.delta * p.sigma.position(local);
    Eigen::VectorXd v = p.delta * p.sigma.velocity(local);
    return std::make_pair(q, v);
  };

  std::size_t cursor = 0;
  for (std::size_t i = 0;; ++i) {
    const double time = static_cast<double>(i) * dt;
    if (time > total) break;
    auto [q, v] = sample(time, cursor);
    traj.times.push_back(time);
    traj.q.push_back(q);
    traj.qd.push_back(v);
  }
  if (traj.times.back() < total) {
    traj.times.push_back(total);
    traj.q.push_back(qs.back());
    traj.qd.push_back(Eigen::VectorXd::Zero(n));
  } else {
    traj.q.back() = qs.back();
    traj.qd.back().setZero();
  }
  return traj;
}

TrackingLog simulate_tracking(const JointTrajectory& traj, double gain,
                              const std::optional<Eigen::VectorXd>& q0) {
  if (!(gain > 0.0)) throw DomainError("simulate_tracking: gain must be positive");
  TrackingLog log;
  if (traj.times.empty()) return log;
  Eigen::VectorXd q = q0 ? *q0 : traj.q.front();
  log.times.push_back(traj.times.front());
  log.q.push_back(q);
  for (std::size_t i = 0; i + 1 < traj.times.size(); ++i) {
    const double h = traj.times[i + 1] - traj.times[i];
    const Eigen::VectorXd slope = (traj.q[i + 1] - traj.q[i]) / h;
    // e = q_d - q obeys e' = (slope - qd_i) - gain * e on the interval.
    const Eigen::VectorXd forcing = (slope - traj.qd[i]) / gain;
    const Eigen::VectorXd e0 = traj.q[i] - q;
    const double decay = std::exp(-gain * h);
    const Eigen::VectorXd e1 = forcing + (e0 - forcing) * decay;
    q = traj.q[i + 1] - e1;
    log.times.push_back(traj.times[i + 1]);
    log.q.push_back(q);
  }
  return log;
}

std::string format_trajectory(const JointTrajectory& traj) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9f", traj.times[i]);
    out += buf;
    for (Eigen::Index j = 0; j < traj.q[i].size(); ++j) {
      std::snprintf(buf, sizeof(buf), " %.9f", traj.q[i](j));
      out += buf;
    }
    for (Eigen::Index j = 0; j < traj.qd[i].size(); ++j) {
      std::snprintf(buf, sizeof(buf), " %.9f", traj.qd[i](j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace toolgrasp
