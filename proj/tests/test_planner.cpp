#include <gtest/gtest.h>

#include <cmath>

#include "toolgrasp/errors.hpp"
#include "toolgrasp/planner.hpp"
#include "toolgrasp/rng.hpp"

using namespace toolgrasp;

namespace {

HandoverPose safe_handover(double heading) {
  HandoverPose h{GraspRect(0, 0, 10, 5, 0)};
  h.approach_heading = heading;
  h.safe = true;
  return h;
}

Setpoint at(double x, double y, double z, double yaw, double dwell = 0.0) {
  Setpoint sp;
  sp.label = "p";
  sp.position = {x, y, z};
  sp.yaw = yaw;
  sp.dwell = dwell;
  return sp;
}

}  // namespace

TEST(Calib, DefaultMapsPixelsOntoTheTable) {
  const CameraCalib c = default_calib();
  const GraspPose p = grasp_to_pose(GraspRect(100, 50, 20, 10, 0.3), c);
  EXPECT_NEAR(p.position.x(), 0.35 + 0.1, 1e-12);
  EXPECT_NEAR(p.position.y(), -0.08 + 0.05, 1e-12);
  EXPECT_NEAR(p.position.z(), 0.02, 1e-12);
  EXPECT_NEAR(p.yaw, 0.3, 1e-12);
}

TEST(Calib, RotatedFrameAndInverse) {
  CameraCalib c;
  c.transform.block<3, 3>(0, 0) << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  c.transform(0, 3) = 0.5;
  c.scale = 0.002;
  const GraspPose p = grasp_to_pose(GraspRect(10, 20, 20, 10, 0.0), c);
  EXPECT_NEAR(p.position.x(), 0.5 - 0.04, 1e-12);
  EXPECT_NEAR(p.position.y(), 0.02, 1e-12);
  EXPECT_NEAR(c.yaw(), kPi / 2.0, 1e-12);
  EXPECT_NEAR(std::abs(wrap_angle(p.yaw - kPi / 2.0)), 0.0, 1e-12);
  const Vec2 px = pose_to_pixel(p.position, c);
  EXPECT_NEAR(px.x, 10.0, 1e-9);
  EXPECT_NEAR(px.y, 20.0, 1e-9);
}

TEST(Calib, FileRoundTripAndValidation) {
  CameraCalib c = default_calib();
  c.transform.block<3, 3>(0, 0) = Eigen::AngleAxisd(0.7, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const CameraCalib back = parse_calib(format_calib(c));
  EXPECT_TRUE(back.transform.isApprox(c.transform, 1e-15));
  EXPECT_EQ(back.scale, c.scale);
  EXPECT_THROW(parse_calib("1 0 0 0\n0 1 0 0\n0 0 1 0\n0.001\n"), ParseError);
  EXPECT_THROW(parse_calib("2 0 0 0\n0 1 0 0\n0 0 1 0\n0.001 0\n"), ConfigError);
  EXPECT_THROW(parse_calib("1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0\n"), ConfigError);
}

TEST(Calib, WorkspaceViolation) {
  EXPECT_THROW(grasp_to_pose(GraspRect(5000, 0, 20, 10, 0), default_calib()), WorkspaceError);
}

TEST(PlanTask, FiveSetpointsInOrder) {
  const GraspPose pose{{0.4, 0.0, 0.02}, 0.2};
  const TaskConfig cfg;
  const auto sps = plan_task(pose, safe_handover(kPi), cfg);
  ASSERT_EQ(sps.size(), 5u);
  const char* labels[] = {"pre_grasp", "grasp", "lift", "handover", "release"};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(sps[i].label, labels[i]);
  EXPECT_EQ(sps[0].gripper, Gripper::kOpen);
  EXPECT_EQ(sps[1].gripper, Gripper::kClosed);
  EXPECT_EQ(sps[4].gripper, Gripper::kOpen);
  EXPECT_NEAR(sps[0].position.z(), 0.12, 1e-12);
  EXPECT_NEAR(sps[2].position.z(), 0.17, 1e-12);
  EXPECT_EQ(sps[1].dwell, cfg.dwell);
  // Heading pi: the handover point sits on the -x side of the centre.
  EXPECT_NEAR(sps[3].position.x(), 0.30 - 0.15, 1e-12);
  EXPECT_NEAR(sps[3].position.y(), 0.30, 1e-12);
  EXPECT_NEAR(std::abs(sps[3].yaw), kPi, 1e-12);
  EXPECT_EQ(sps[3].position, sps[4].position);
}

TEST(PlanTask, UnsafeHandoverAndWorkspace) {
  HandoverPose h = safe_handover(0.0);
  h.safe = false;
  EXPECT_THROW(plan_task({{0.4, 0.0, 0.02}, 0.0}, h), SafetyError);
  TaskConfig cfg;
  cfg.workspace.hi.z() = 0.1;
  EXPECT_THROW(plan_task({{0.4, 0.0, 0.02}, 0.0}, safe_handover(0.0), cfg), WorkspaceError);
}

TEST(Trapezoid, ClosedForms) {
  const auto p = trapezoid_profile(2.0, 1.0, 1.0);
  EXPECT_FALSE(p.triangular());
  EXPECT_NEAR(p.t_total, 3.0, 1e-12);
  EXPECT_NEAR(p.t_cruise, 1.0, 1e-12);
  EXPECT_NEAR(p.position(1.5), 1.0, 1e-12);
  EXPECT_NEAR(p.position(3.0), 2.0, 1e-12);

  const auto tri = trapezoid_profile(0.5, 10.0, 2.0);
  EXPECT_TRUE(tri.triangular());
  EXPECT_NEAR(tri.v_peak, 1.0, 1e-12);
  EXPECT_NEAR(tri.t_total, 1.0, 1e-12);
  EXPECT_NEAR(tri.velocity(0.5), 1.0, 1e-12);

  // One radian at v = a = 1 sits on the boundary: t = d/v + v/a = 2.
  EXPECT_NEAR(trapezoid_profile(1.0, 1.0, 1.0).t_total, 2.0, 1e-12);
  EXPECT_EQ(trapezoid_profile(0.0, 1.0, 1.0).t_total, 0.0);
  EXPECT_THROW(trapezoid_profile(-1.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(trapezoid_profile(1.0, 0.0, 1.0), DomainError);
}

TEST(Trapezoid, RespectsLimitsEverywhere) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double d = rng.uniform(0.01, 5.0), v = rng.uniform(0.1, 3.0), a = rng.uniform(0.1, 3.0);
    const auto p = trapezoid_profile(d, v, a);
    EXPECT_NEAR(p.t_total, d >= v * v / a ? d / v + v / a : 2.0 * std::sqrt(d / a), 1e-9);
    double prev_v = 0.0;
    const double h = p.t_total / 400.0;
    for (int k = 1; k <= 400; ++k) {
      const double vel = p.velocity(k * h);
      EXPECT_LE(vel, v + 1e-12);
      EXPECT_LE(std::abs(vel - prev_v), a * h + 1e-9);
      prev_v = vel;
    }
  }
}

TEST(PlanarArm, IkFkRoundTrip) {
  const PlanarArm arm;
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double r = rng.uniform(0.3, 0.7), phi = rng.uniform(-kPi, kPi);
    const Setpoint sp = at(r * std::cos(phi), r * std::sin(phi), rng.uniform(0.0, 0.3),
                           rng.uniform(-kPi, kPi));
    const Eigen::Vector4d x = arm.fk(arm.ik(sp));
    EXPECT_NEAR(x(0), sp.position.x(), 1e-9);
    EXPECT_NEAR(x(1), sp.position.y(), 1e-9);
    EXPECT_NEAR(x(2), sp.position.z(), 1e-12);
    EXPECT_NEAR(std::abs(wrap_full_angle(x(3) - sp.yaw)), 0.0, 1e-9);
  }
  EXPECT_THROW(arm.ik(at(2.0, 0.0, 0.0, 0.0)), ReachabilityError);
}

TEST(Trajectory, SingleJointMatchesTrapezoid) {
  const JointLimits lim{{1.0}, {1.0}};
  const IkFunction ik = [](const Setpoint& sp) {
    Eigen::VectorXd q(1);
    q << sp.position.x();
    return q;
  };
  const auto traj = plan_trajectory({at(0, 0, 0, 0), at(2, 0, 0, 0)}, ik, lim, 0.01);
  EXPECT_NEAR(traj.times.back(), 3.0, 1e-12);
  EXPECT_NEAR(traj.q.back()(0), 2.0, 1e-12);
  const auto ref = trapezoid_profile(2.0, 1.0, 1.0);
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    EXPECT_NEAR(traj.q[i](0), ref.position(traj.times[i]), 1e-9);
  }
}

TEST(Trajectory, JointsArriveTogetherWithinLimits) {
  const JointLimits lim = default_limits();
  const PlanarArm arm;
  const IkFunction ik = [&arm](const Setpoint& sp) { return arm.ik(sp); };
  const std::vector<Setpoint> sps{at(0.5, 0.1, 0.1, 0.0), at(0.3, 0.4, 0.2, 1.0, 0.25),
                                  at(0.6, -0.2, 0.05, -0.5)};
  const double dt = 0.004;
  const auto traj = plan_trajectory(sps, ik, lim, dt);
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      EXPECT_LE(std::abs(traj.qd[i](j)), lim.v_max[static_cast<std::size_t>(j)] + 1e-9);
      if (i > 0) {
        const double h = traj.times[i] - traj.times[i - 1];
        EXPECT_LE(std::abs(traj.qd[i](j) - traj.qd[i - 1](j)),
                  lim.a_max[static_cast<std::size_t>(j)] * h + 1e-9);
      }
    }
  }
  // Each setpoint is passed through exactly.
  std::size_t found = 0;
  for (const Setpoint& sp : sps) {
    const Eigen::VectorXd q = arm.ik(sp);
    for (const auto& qi : traj.q) {
      if ((qi - q).norm() < 1e-9) {
        ++found;
        break;
      }
    }
  }
  EXPECT_EQ(found, sps.size());
  EXPECT_EQ(traj.qd.back().norm(), 0.0);
}

TEST(Trajectory, DwellHoldsPosition) {
  const JointLimits lim{{1.0}, {1.0}};
  const IkFunction ik = [](const Setpoint& sp) {
    Eigen::VectorXd q(1);
    q << sp.position.x();
    return q;
  };
  const auto traj = plan_trajectory({at(0, 0, 0, 0, 0.5), at(1, 0, 0, 0)}, ik, lim, 0.01);
  EXPECT_NEAR(traj.times.back(), 2.5, 1e-12);
  for (std::size_t i = 0; i < traj.times.size() && traj.times[i] <= 0.5; ++i) {
    EXPECT_EQ(traj.q[i](0), 0.0);
  }
  EXPECT_THROW(plan_trajectory({at(0, 0, 0, 0)}, ik, {{1.0, 1.0}, {1.0, 1.0}}), ConfigError);
}

TEST(Tracking, ErrorStaysBoundedAndDecays) {
  const JointLimits lim{{1.0}, {1.0}};
  const IkFunction ik = [](const Setpoint& sp) {
    Eigen::VectorXd q(1);
    q << sp.position.x();
    return q;
  };
  const auto traj = plan_trajectory({at(0, 0, 0, 0), at(2, 0, 0, 0, 2.0)}, ik, lim, 0.008);
  Eigen::VectorXd q0(1);
  q0 << 0.3;
  const double gain = 20.0;
  const auto log = simulate_tracking(traj, gain, q0);
  ASSERT_EQ(log.q.size(), traj.q.size());
  // |e(t)| <= |e0| exp(-gain t) + a_max * dt / gain for piecewise-linear q_d.
  for (std::size_t i = 0; i < log.q.size(); ++i) {
    const double e = std::abs(traj.q[i](0) - log.q[i](0));
    EXPECT_LE(e, 0.3 * std::exp(-gain * log.times[i]) + 1.0 * 0.008 / gain + 1e-9);
  }
  EXPECT_LT(std::abs(log.q.back()(0) - 2.0), 1e-6);
  EXPECT_THROW(simulate_tracking(traj, 0.0), DomainError);
}

TEST(Trajectory, TextFormat) {
  JointTrajectory t;
  t.times = {0.0};
  Eigen::VectorXd q(2);
  q << 1.0, -0.5;
  t.q = {q};
  t.qd = {Eigen::VectorXd::Zero(2)};
  EXPECT_EQ(format_trajectory(t), "0.000000000 1.000000000 -0.500000000 0.000000000 0.000000000\n");
}
