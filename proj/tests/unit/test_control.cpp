#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "crowdnav/control.hpp"
#include "crowdnav/errors.hpp"
#include "scenarios.hpp"

namespace crowdnav {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(DesiredVelocity, Examples) {
  const Vec2 a = desired_velocity({1.0, 0.0, 0.0});
  EXPECT_EQ(a.x, 1.0);
  EXPECT_EQ(a.y, 0.0);
  const Vec2 b = desired_velocity({0.0, 1.234, 0.0});
  EXPECT_EQ(b.norm(), 0.0);
  const Vec2 c = desired_velocity({1.0, kPi / 2.0, 0.0});
  EXPECT_NEAR(c.x, 0.0, 1e-15);
  EXPECT_EQ(c.y, 1.0);
}

TEST(DesiredVelocity, NormEqualsSpeedOnAGrid) {
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 25; ++j) {
      const double speed = i / 39.0;
      const double heading = -kPi + 2.0 * kPi * j / 25.0;
      const Vec2 v = desired_velocity({speed, heading, 0.0});
      EXPECT_NEAR(v.norm(), speed, 1e-12);
      EXPECT_NEAR(v.x, speed * std::cos(heading), 1e-12);
      EXPECT_NEAR(v.y, speed * std::sin(heading), 1e-12);
    }
  }
}

BodyState robot_state(Vec2 v, double cam, double rate = 0.0) {
  BodyState b;
  b.mass = 30.0;
  b.radius = 0.3;
  b.velocity = v;
  b.camera_heading = cam;
  b.camera_rate = rate;
  return b;
}

TEST(PdCommand, ZeroErrorZeroOutput) {
  const PDCommand c = pd_command(robot_state({0.3, -0.2}, 0.5), {0.3, -0.2}, 0.5, PDGains{}, 1.0);
  EXPECT_EQ(c.force.norm(), 0.0);
  EXPECT_EQ(c.camera_torque, 0.0);
}

TEST(PdCommand, CameraTurnsTheShortWay) {
  const double eps = 1e-3;
  const PDCommand a = pd_command(robot_state({}, 0.0), {}, kPi - eps, PDGains{}, 1.0);
  EXPECT_GT(a.camera_torque, 0.0);
  // Wrapped: target just past pi from the other side turns negative.
  const PDCommand b = pd_command(robot_state({}, 0.5), {}, 0.5 - (kPi - eps), PDGains{}, 1.0);
  EXPECT_LT(b.camera_torque, 0.0);
  const PDCommand c = pd_command(robot_state({}, 3.0), {}, -3.0, PDGains{}, 1.0);
  EXPECT_GT(c.camera_torque, 0.0);
}

TEST(PdCommand, RotationEquivariance) {
  const BodyState r = robot_state({0.4, -0.7}, 0.3, 0.2);
  const Vec2 target{-0.2, 0.9};
  const PDCommand base = pd_command(r, target, 1.1, PDGains{}, 1.0);
  for (double a : {0.4, -2.0, 3.0}) {
    BodyState rr = r;
    rr.velocity = rotate(r.velocity, a);
    rr.camera_heading = wrap_angle(r.camera_heading + a);
    const PDCommand turned = pd_command(rr, rotate(target, a), wrap_angle(1.1 + a), PDGains{}, 1.0);
    const Vec2 expect = rotate(base.force, a);
    EXPECT_NEAR(turned.force.x, expect.x, 1e-9);
    EXPECT_NEAR(turned.force.y, expect.y, 1e-9);
    EXPECT_NEAR(turned.camera_torque, base.camera_torque, 1e-9);
  }
}

TEST(PdCommand, StepResponseSettlesQuicklyWithoutOvershoot) {
  const test::StepResponse r = test::pd_step_response(0.5, PDGains{}, DynamicsParams{}, 2.0);
  ASSERT_GE(r.settle_time, 0.0);
  EXPECT_LE(r.settle_time, 0.5);
  EXPECT_LT(r.peak_speed, 0.5 * 1.10);
}

TEST(PdCommand, ConvergesFromAnyInitialVelocityWithoutLimits) {
  DynamicsParams dyn;
  dyn.robot_max_accel = 1e9;  // actuation limits effectively off
  dyn.robot_max_speed = 10.0;
  for (double vx = -1.0; vx <= 1.0; vx += 0.5) {
    for (double vy = -1.0; vy <= 1.0; vy += 0.5) {
      BodyState robot = robot_state({vx, vy}, 0.0);
      PhysicsWorld w(dyn, {}, {robot});
      const Vec2 target{0.3, -0.4};
      for (int k = 0; k < 30; ++k) {
        w.step_control_period([&](const PhysicsWorld& pw, ActuationInput& in) {
          in.robot_force = pd_command(pw.robot(), target, 0.0, PDGains{}, 1.0).force;
        });
      }
      EXPECT_NEAR((w.robot().velocity - target).norm(), 0.0, 1e-6) << vx << "," << vy;
    }
  }
}

TEST(PdCommand, CameraLoopReachesSetpoint) {
  DynamicsParams dyn;
  BodyState robot = robot_state({}, -2.0);
  PhysicsWorld w(dyn, {}, {robot});
  for (int k = 0; k < 40; ++k) {
    w.step_control_period([&](const PhysicsWorld& pw, ActuationInput& in) {
      in.camera_torque = pd_command(pw.robot(), {}, 2.5, PDGains{}, dyn.camera_inertia).camera_torque;
    });
  }
  EXPECT_NEAR(wrap_angle(w.robot().camera_heading - 2.5), 0.0, 1e-3);
}

TEST(PdGains, Validation) {
  PDGains g;
  EXPECT_NO_THROW(g.validate());
  g.kp_velocity = -1.0;
  EXPECT_THROW(g.validate(), ConfigError);
}

}  // namespace
}  // namespace crowdnav
