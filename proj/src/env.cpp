#include "crowdnav/env.hpp"

#include <algorithm>
#include <cmath>

#include "crowdnav/errors.hpp"

namespace crowdnav {

void EnvConfig::validate() const {
  world.validate();
  crowd.validate();
  dynamics.validate();
  sensing.validate();
  gains.validate();
  reward.validate();
  if (!(termination.goal_radius > 0.0) || termination.max_steps < 1) {
    throw ConfigError("invalid termination rule");
  }
  if (spawn_retries < 0) throw ConfigError("spawn retries must be non-negative");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

NavEnv::NavEnv(EnvConfig config) : config_(std::move(config)), history_(config_.sensing.history) {
  config_.validate();
}

const Observation& NavEnv::reset(std::uint64_t seed) {
  seed_ = seed;
  const DynamicsParams& dyn = config_.dynamics;
  world_ = generate_corridor(seed, config_.world);
  const OccupancyGrid grid = rasterize(world_, config_.world.grid_resolution, dyn.robot_radius);
  path_ = plan_global(grid, world_.start, world_.goal, dyn.robot_radius);

  std::uint64_t crowd_seed = mix_seed(seed, 1);
  for (int attempt = 0;; ++attempt) {
    try {
      peds_ = spawn_crowd(world_, config_.crowd, dyn, crowd_seed);
      break;
    } catch (const SpawnError&) {
      ++spawn_failures_;
      if (attempt >= config_.spawn_retries) throw;
      crowd_seed = mix_seed(crowd_seed, 2);
    }
  }

  std::vector<BodyState> bodies;
  bodies.reserve(peds_.size() + 1);
  BodyState robot;
  robot.position = world_.start;
  robot.radius = dyn.robot_radius;
  robot.mass = dyn.robot_mass;
  robot.max_speed = dyn.robot_max_speed;
  robot.camera_heading = wrap_angle(world_.start_heading);
  bodies.push_back(robot);
  for (const Pedestrian& p : peds_) bodies.push_back(p.body);
  physics_.emplace(dyn, world_.walls, std::move(bodies));

  prev_action_ = Action{};
  best_progress_ = path_.project(world_.start);
  steps_ = 0;

  const auto& b = physics_->bodies();
  history_.reset(raycast_scan(world_.walls, std::span(b).subspan(1), b.front(), config_.sensing));
  refresh_observation({});
  return obs_;
}

void NavEnv::refresh_observation(std::span<const Contact> contacts) {
  const auto& b = physics_->bodies();
  obs_ = build_observation(history_, b.front(), path_, contacts, prev_action_, config_.sensing,
                           {config_.dynamics.robot_max_speed, config_.dynamics.force_limit});
  aux_ = aux_ground_truth(world_.walls, std::span(b).subspan(1), b.front(), config_.sensing);
}

StepResult NavEnv::step(const Action& requested) {
  if (!physics_) throw ContractViolation("step called before reset");
  const DynamicsParams& dyn = config_.dynamics;

  StepResult result;
  Action a;
  a.speed = std::clamp(std::isfinite(requested.speed) ? requested.speed : 0.0, 0.0,
                       dyn.robot_max_speed);
  a.motion_heading = wrap_angle(requested.motion_heading);
  a.camera_heading = wrap_angle(requested.camera_heading);
  if (!std::isfinite(a.motion_heading) || !std::isfinite(a.camera_heading)) {
    throw SimulationDiverged("non-finite action");
  }
  result.action = a;

  const Vec2 vel_setpoint = desired_velocity(a);
  result.period = physics_->step_control_period(
      [&](const PhysicsWorld& world, ActuationInput& in) {
        const PDCommand cmd = pd_command(world.robot(), vel_setpoint, a.camera_heading,
                                         config_.gains, dyn.camera_inertia);
        in.robot_force = cmd.force;
        in.camera_torque = cmd.camera_torque;
        crowd_forces(peds_, world.bodies(), world.walls(), config_.crowd, crowd_force_buffer_);
        in.body_forces = crowd_force_buffer_;
      });

  const auto& b = physics_->bodies();
  for (std::size_t i = 0; i < peds_.size(); ++i) peds_[i].body = b[i + 1];
  retarget_walkers(peds_, world_, config_.crowd);
  ++steps_;

  history_.push(raycast_scan(world_.walls, std::span(b).subspan(1), b.front(), config_.sensing));

  const double prev_best = best_progress_;
  best_progress_ = std::max(best_progress_, path_.project(b.front().position));
  result.termination = check_termination(b.front(), world_.goal, result.period.max_force_ratio,
                                         steps_, config_.termination);
  result.reward = compute_reward(prev_best, best_progress_, result.period.max_force_ratio, a,
                                 prev_action_, result.termination, config_.reward);
  prev_action_ = a;
  refresh_observation(result.period.contacts);
  return result;
}

}  // namespace crowdnav
