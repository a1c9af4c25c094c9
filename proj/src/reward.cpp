#include "crowdnav/reward.hpp"

#include <cmath>

#include "crowdnav/errors.hpp"

namespace crowdnav {

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::kNone:
      return "none";
    case Termination::kSuccess:
      return "success";
    case Termination::kForceViolation:
      return "force_violation";
    case Termination::kTimeout:
      return "timeout";
  }
  return "unknown";
}

void RewardConfig::validate() const {
  for (double w : {progress, force, success, failure, action_rate}) {
    if (!std::isfinite(w)) throw ConfigError("reward weights must be finite");
  }
  if (!(force > 0.0)) throw ConfigError("force weight must be positive");
}

double action_distance_sq(const Action& a, const Action& b) {
  const double ds = a.speed - b.speed;
  const double dm = wrap_angle(a.motion_heading - b.motion_heading);
  const double dc = wrap_angle(a.camera_heading - b.camera_heading);
  return ds * ds + dm * dm + dc * dc;
}

RewardTerms compute_reward(double prev_progress, double progress, double max_force_ratio,
                           const Action& action, const Action& prev_action, Termination terminal,
                           const RewardConfig& cfg) {
  RewardTerms r;
  r.progress = cfg.progress * std::max(0.0, progress - prev_progress);
  r.force = -cfg.force * max_force_ratio;
  r.action_rate = -cfg.action_rate * action_distance_sq(action, prev_action);
  if (terminal == Termination::kSuccess) r.terminal = cfg.success;
  if (terminal == Termination::kForceViolation) r.terminal = cfg.failure;
  return r;
}

Termination check_termination(const BodyState& robot, const Vec2& goal, double max_force_ratio,
                              int control_steps, const TerminationRule& rule) {
  if (max_force_ratio >= 1.0) return Termination::kForceViolation;
  if ((robot.position - goal).norm() <= rule.goal_radius) return Termination::kSuccess;
  if (control_steps >= rule.max_steps) return Termination::kTimeout;
  return Termination::kNone;
}

}  // namespace crowdnav
