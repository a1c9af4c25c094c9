#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "crowdnav/control.hpp"
#include "crowdnav/crowd.hpp"
#include "crowdnav/dynamics.hpp"
#include "crowdnav/reward.hpp"
#include "crowdnav/sensing.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

struct EnvConfig {
  WorldParams world;
  CrowdConfig crowd;
  DynamicsParams dynamics;
  SensingParams sensing;
  PDGains gains;
  RewardConfig reward;
  TerminationRule termination;
  // Fresh crowd seeds tried when rejection sampling fails.
  int spawn_retries = 10;

  void validate() const;
};

struct StepResult {
  RewardTerms reward;
  Termination termination = Termination::kNone;
  PeriodReport period;
  Action action;  // action as applied (clamped to its ranges)
};

// Derives an independent 64-bit stream seed from (seed, salt).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

// One navigation episode at a time: corridor, empty-world A* path, social-force crowd,
// compliant physics and the planner's observation.
class NavEnv {
 public:
  explicit NavEnv(EnvConfig config);

  // Builds a new world and crowd from the episode seed.
  const Observation& reset(std::uint64_t seed);
  StepResult step(const Action& action);

  const Observation& observation() const { return obs_; }
  const AuxTargets& aux_targets() const { return aux_; }
  const CorridorWorld& world() const { return world_; }
  const GlobalPath& path() const { return path_; }
  const PhysicsWorld& physics() const { return *physics_; }
  const std::vector<Pedestrian>& pedestrians() const { return peds_; }
  const BodyState& robot() const { return physics_->robot(); }
  const EnvConfig& config() const { return config_; }
  int steps() const { return steps_; }
  double progress() const { return best_progress_; }
  const Action& previous_action() const { return prev_action_; }
  std::uint64_t episode_seed() const { return seed_; }
  int spawn_failures() const { return spawn_failures_; }

 private:
  void refresh_observation(std::span<const Contact> contacts);

  EnvConfig config_;
  CorridorWorld world_;
  GlobalPath path_;
  std::vector<Pedestrian> peds_;
  std::optional<PhysicsWorld> physics_;
  ScanHistory history_;
  Observation obs_;
  AuxTargets aux_;
  Action prev_action_;
  double best_progress_ = 0.0;
  int steps_ = 0;
  std::uint64_t seed_ = 0;
  int spawn_failures_ = 0;
  std::vector<Vec2> crowd_force_buffer_;
};

}  // namespace crowdnav
