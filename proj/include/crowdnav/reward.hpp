#pragma once

#include <optional>
#include <string_view>

#include "crowdnav/control.hpp"
#include "crowdnav/dynamics.hpp"

namespace crowdnav {

enum class Termination { kNone, kSuccess, kForceViolation, kTimeout };

std::string_view to_string(Termination t);

struct RewardConfig {
  double progress = 1.0;     // per metre of new path progress
  double force = 0.2;        // per unit force ratio, every step
  double success = 5.0;
  double failure = -5.0;     // force violation
  double action_rate = 0.01;

  void validate() const;
};

// Reward decomposition; total() is the sum of the four terms.
struct RewardTerms {
  double progress = 0.0;
  double force = 0.0;
  double action_rate = 0.0;
  double terminal = 0.0;

  double total() const { return progress + force + action_rate + terminal; }
};

// Squared distance between actions in their native units (m/s, rad, rad), with heading
// differences wrapped.
double action_distance_sq(const Action& a, const Action& b);

// prev_progress is the best arc-length progress so far; movement backwards earns nothing.
RewardTerms compute_reward(double prev_progress, double progress, double max_force_ratio,
                           const Action& action, const Action& prev_action, Termination terminal,
                           const RewardConfig& cfg);

struct TerminationRule {
  double goal_radius = 0.5;
  int max_steps = 300;
};

// Precedence: force violation > success > timeout.
Termination check_termination(const BodyState& robot, const Vec2& goal, double max_force_ratio,
                              int control_steps, const TerminationRule& rule);

}  // namespace crowdnav
