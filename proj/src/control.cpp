#include "crowdnav/control.hpp"

#include <cmath>

#include "crowdnav/errors.hpp"

namespace crowdnav {

void PDGains::validate() const {
  if (kp_velocity < 0.0 || kd_velocity < 0.0 || kp_camera < 0.0 || kd_camera < 0.0) {
    throw ConfigError("PD gains must be non-negative");
  }
}

Vec2 desired_velocity(const Action& action) {
  return {action.speed * std::cos(action.motion_heading),
          action.speed * std::sin(action.motion_heading)};
}

PDCommand pd_command(const BodyState& robot, const Vec2& desired_vel, double desired_camera_heading,
                     const PDGains& gains, double camera_inertia) {
  PDCommand cmd;
  cmd.force = ((desired_vel - robot.velocity) * gains.kp_velocity -
               robot.command_accel * gains.kd_velocity) *
              robot.mass;
  const double err = wrap_angle(desired_camera_heading - robot.camera_heading);
  cmd.camera_torque =
      camera_inertia * (gains.kp_camera * err - gains.kd_camera * robot.camera_rate);
  return cmd;
}

}  // namespace crowdnav
