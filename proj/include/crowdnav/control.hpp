#pragma once

#include "crowdnav/dynamics.hpp"
#include "crowdnav/geometry.hpp"

namespace crowdnav {

// Local planner output. Motion heading and camera heading are independent because the
// base is omnidirectional. Both headings are world-frame.
struct Action {
  double speed = 0.0;           // m/s, [0, v_max]
  double motion_heading = 0.0;  // rad, (-pi, pi]
  double camera_heading = 0.0;  // rad, (-pi, pi]

  bool operator==(const Action&) const = default;
};

struct PDGains {
  double kp_velocity = 10.0;  // 1/s
  double kd_velocity = 0.0;   // acting on measured acceleration
  double kp_camera = 40.0;    // 1/s^2
  double kd_camera = 12.0;    // 1/s

  void validate() const;
};

struct PDCommand {
  Vec2 force;
  double camera_torque = 0.0;
};

// v_d * (cos theta_d, sin theta_d).
Vec2 desired_velocity(const Action& action);

PDCommand pd_command(const BodyState& robot, const Vec2& desired_vel, double desired_camera_heading,
                     const PDGains& gains, double camera_inertia);

}  // namespace crowdnav
