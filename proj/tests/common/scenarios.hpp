#pragma once

// Scripted scenes shared by the unit tests and the acceptance harness.

#include <algorithm>
#include <cmath>
#include <vector>

#include "crowdnav/control.hpp"
#include "crowdnav/dynamics.hpp"

namespace crowdnav::test {

struct StepResponse {
  double settle_time = -1.0;  // first time after which speed stays within the band
  double peak_speed = 0.0;
  std::vector<double> speeds;  // sampled every physics tick
};

// Closed-loop response of the PD velocity loop from rest to a straight-line setpoint,
// with the controller re-evaluated at every physics tick like in the environment.
inline StepResponse pd_step_response(double setpoint, const PDGains& gains,
                                     const DynamicsParams& dyn, double duration,
                                     double band = 0.05) {
  BodyState robot;
  robot.radius = dyn.robot_radius;
  robot.mass = dyn.robot_mass;
  robot.max_speed = dyn.robot_max_speed;
  PhysicsWorld world(dyn, {}, {robot});
  const Vec2 target = desired_velocity({setpoint, 0.0, 0.0});
  StepResponse out;
  const int periods = static_cast<int>(std::lround(duration / dyn.timing.control_dt));
  for (int k = 0; k < periods; ++k) {
    world.step_control_period([&](const PhysicsWorld& w, ActuationInput& in) {
      const PDCommand cmd = pd_command(w.robot(), target, 0.0, gains, dyn.camera_inertia);
      in.robot_force = cmd.force;
      in.camera_torque = cmd.camera_torque;
      out.speeds.push_back(w.robot().velocity.norm());
    });
  }
  out.speeds.push_back(world.robot().velocity.norm());
  for (double v : out.speeds) out.peak_speed = std::max(out.peak_speed, v);
  int last_outside = -1;
  for (int i = 0; i < static_cast<int>(out.speeds.size()); ++i) {
    if (std::abs(out.speeds[i] - setpoint) > band * setpoint) last_outside = i;
  }
  if (last_outside + 1 < static_cast<int>(out.speeds.size())) {
    out.settle_time = (last_outside + 1) * dyn.timing.physics_dt;
  }
  return out;
}

}  // namespace crowdnav::test
