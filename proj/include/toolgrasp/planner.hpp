#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "toolgrasp/geometry.hpp"
#include "toolgrasp/safety.hpp"

namespace toolgrasp {

// Camera -> robot base. A pixel (x, y) maps to
//   p = R * (x * scale, y * scale, 0) + t + (0, 0, table_height).
struct CameraCalib {
  Eigen::Matrix4d transform = Eigen::Matrix4d::Identity();
  double scale = 0.001;  // metres per pixel on the table plane
  double table_height = 0.0;

  // Throws ConfigError unless the rotation block is orthonormal to 1e-9
  // with determinant +1, the last row is (0,0,0,1) and scale > 0.
  void validate() const;
  // Rotation of the image x axis about the base z axis.
  double yaw() const;
};

// Calibration file: 12 reals (row-major 3x4 [R|t]), then scale, then table
// height, whitespace separated; '#' starts a comment.
CameraCalib parse_calib(const std::string& text);
std::string format_calib(const CameraCalib& calib);
CameraCalib default_calib();

struct Workspace {
  Eigen::Vector3d lo{-1.0, -1.0, 0.0};
  Eigen::Vector3d hi{1.0, 1.0, 1.0};
  bool contains(const Eigen::Vector3d& p) const;
};

struct GraspPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw = 0.0;  // wrapped grasp angle composed with the camera yaw
};

// Throws WorkspaceError when the point falls outside `workspace`.
GraspPose grasp_to_pose(const GraspRect& g, const CameraCalib& calib,
                        const Workspace& workspace = {});
// Inverse of the pixel mapping: base-frame point -> pixel (x, y).
Vec2 pose_to_pixel(const Eigen::Vector3d& position, const CameraCalib& calib);

enum class Gripper { kOpen, kClosed };

struct Setpoint {
  std::string label;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  Gripper gripper = Gripper::kOpen;
  double dwell = 0.0;  // seconds held after arrival
};

struct TaskConfig {
  double clearance = 0.10;  // pre-grasp height above the grasp
  double lift = 0.15;       // lift height above the grasp
  double dwell = 0.5;       // at grasp and release
  Eigen::Vector3d handover_center{0.30, 0.30, 0.30};
  double handover_radius = 0.15;
  Workspace workspace;
};

// pre-grasp (OPEN) -> grasp (CLOSED, dwell) -> lift -> handover -> release
// (OPEN, dwell). The handover waypoint is handover_center + radius *
// (cos h, sin h, 0) with yaw h, h = approach heading composed with
// `frame_yaw`. Throws SafetyError for an unsafe handover pose and
// WorkspaceError when a setpoint leaves the workspace.
std::vector<Setpoint> plan_task(const GraspPose& pose, const HandoverPose& handover,
                                const TaskConfig& cfg = {}, double frame_yaw = 0.0);

nlohmann::ordered_json setpoints_to_json(const std::vector<Setpoint>& sps);

// Time-optimal rest-to-rest 1-D profile under |v| <= v_max, |a| <= a_max.
struct TrapezoidProfile {
  double distance = 0.0;
  double v_peak = 0.0;
  double accel = 0.0;
  double t_accel = 0.0;
  double t_cruise = 0.0;
  double t_total = 0.0;

  bool triangular() const { return t_cruise == 0.0; }
  double position(double t) const;
  double velocity(double t) const;
};

// Throws DomainError when d < 0 or a limit is not positive.
TrapezoidProfile trapezoid_profile(double d, double v_max, double a_max);

struct JointLimits {
  std::vector<double> v_max;
  std::vector<double> a_max;
};

struct JointTrajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> q;
  std::vector<Eigen::VectorXd> qd;
};

using IkFunction = std::function<Eigen::VectorXd(const Setpoint&)>;

// Planar 3R arm in the base xy plane (links 0.45, 0.40, 0.10 m, elbow
// positive) with a prismatic z joint; q = (q1, q2, q3, z). Throws
// ReachabilityError when the wrist point is out of reach.
struct PlanarArm {
  double l1 = 0.45;
  double l2 = 0.40;
  double l3 = 0.10;

  Eigen::VectorXd ik(const Setpoint& sp) const;
  // (x, y, z, yaw) of the tool point.
  Eigen::Vector4d fk(const Eigen::VectorXd& q) const;
};

JointLimits default_limits();

// Straight joint-space segments between the IK solutions of consecutive
// setpoints (starting from `start` when given). Every segment follows one
// normalized trapezoid whose limits are the tightest over joints, so all
// joints arrive together and the slowest joint sets the duration. Setpoint
// dwells hold position. Sampled every dt from 0, plus the final instant.
JointTrajectory plan_trajectory(const std::vector<Setpoint>& setpoints,
                                const IkFunction& ik, const JointLimits& limits,
                                double dt = 0.008,
                                const std::optional<Eigen::VectorXd>& start = {});

// First-order tracking q' = qd_d + gain (q_d - q), with q_d linear and qd_d
// held between samples, solved exactly per interval. The log holds q at
// every trajectory time; the initial state defaults to q_d(0).
struct TrackingLog {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> q;
};
TrackingLog simulate_tracking(const JointTrajectory& traj, double gain,
                              const std::optional<Eigen::VectorXd>& q0 = {});

// `t q1..qn qd1..qdn` per line, 9 decimals.
std::string format_trajectory(const JointTrajectory& traj);

}  // namespace toolgrasp
