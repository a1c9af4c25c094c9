#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "crowdnav/env.hpp"
#include "crowdnav/policy.hpp"

namespace crowdnav {

enum class OutcomeKind { kReached, kSafeStop, kForceViolation, kUnsafeTimeout };

std::string_view to_string(OutcomeKind k);
OutcomeKind outcome_kind_from_string(std::string_view s);

struct EpisodeOutcome {
  OutcomeKind kind = OutcomeKind::kUnsafeTimeout;
  double time_to_completion = 0.0;  // s, reached only
  double max_force = 0.0;           // N, robot-pedestrian peak
  double density = 0.0;
  std::uint64_t seed = 0;
  int steps = 0;

  bool success() const { return kind == OutcomeKind::kReached || kind == OutcomeKind::kSafeStop; }
  bool operator==(const EpisodeOutcome&) const = default;
};

enum class PolicyMode { kStochastic, kMeanAction };

std::string_view to_string(PolicyMode m);
PolicyMode policy_mode_from_string(std::string_view s);

// Decides the next action from the current environment state. Controllers may keep
// internal state; one controller instance drives one episode at a time.
using Controller = std::function<Action(const NavEnv&)>;

// Learned planner: mean action, or a sample drawn from a stream seeded by the episode seed.
Controller policy_controller(const PolicyParams& params, PolicyMode mode, std::uint64_t seed);
// Scripted baseline: fixed velocity along the start-to-goal line, camera facing it.
Controller constant_velocity_controller(double speed);

struct SafeStopRule {
  double window = 2.0;        // s
  double speed_limit = 0.05;  // m/s
};

// Optional per-step observer (used for episode logs).
using StepObserver = std::function<void(const NavEnv&, const StepResult&)>;

// Runs one episode to termination and classifies it.
EpisodeOutcome run_episode(const EnvConfig& config, std::uint64_t seed, const Controller& controller,
                           const SafeStopRule& rule = {}, const StepObserver& observer = {});
EpisodeOutcome run_episode(const EnvConfig& config, const PolicyParams& params, std::uint64_t seed,
                           PolicyMode mode, const SafeStopRule& rule = {},
                           const StepObserver& observer = {});

// Table buckets by density.
enum class Bucket { kBelow = 0, kAt = 1, kAbove = 2 };
inline constexpr int kBucketCount = 3;
Bucket bucket_of(double density);
std::string_view bucket_label(Bucket b);

struct BucketStats {
  int trials = 0;
  int reached = 0;
  int safe_stops = 0;
  int violations = 0;
  int unsafe_timeouts = 0;
  double success_rate = 0.0;  // percent
  double mean_time = 0.0;     // over reached episodes
  double std_time = 0.0;      // sample standard deviation
};

struct EvalReport {
  std::array<BucketStats, kBucketCount> buckets;
  std::vector<EpisodeOutcome> outcomes;
  std::string digest;
  std::string mode;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  std::string table() const;  // aligned text table, "mean (sigma)" cells
};

// Aggregates outcomes into density buckets.
EvalReport aggregate(std::vector<EpisodeOutcome> outcomes);

struct SweepSpec {
  std::vector<double> densities{0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6};
  int trials_per_density = 40;
  std::uint64_t base_seed = 0;

  void validate() const;
  int total() const { return static_cast<int>(densities.size()) * trials_per_density; }
};

// Makes a fresh controller for episode i of the sweep.
using ControllerFactory = std::function<Controller(std::uint64_t seed)>;

// Trial i of density j uses seed base + i, so every density sees the same worlds.
EvalReport run_sweep(const EnvConfig& config, const SweepSpec& spec,
                     const ControllerFactory& factory, int workers = 1);
EvalReport run_sweep(const EnvConfig& config, const PolicyParams& params, const SweepSpec& spec,
                     PolicyMode mode, int workers = 1);

}  // namespace crowdnav
