#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crowdnav/env.hpp"
#include "crowdnav/policy.hpp"

namespace crowdnav {

struct PPOConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 1024;
  double learning_rate = 3e-4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double aux_coef = 0.5;
  double max_grad_norm = 0.5;
  int num_envs = 64;
  int horizon = 256;
  // Adam moments.
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct AdvantageEstimate {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation over one trajectory segment. A done flag at t means
// the episode ended after transition t, so V_{t+1} is not bootstrapped.
AdvantageEstimate gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap_value, double gamma,
                      double lambda);

// Shifts and scales to zero mean and unit (population) variance in place.
void normalize_advantages(std::vector<double>& advantages);

struct Adam {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  void reset(std::size_t n);
  void step(std::vector<double>& params, const std::vector<double>& grad, double lr, double beta1,
            double beta2, double eps);
};

// Scales grad so its L2 norm is at most max_norm; returns the norm before clipping.
double clip_grad_norm(std::vector<double>& grad, double max_norm);

// Everything a PPO minibatch needs per sample.
struct PPOSample {
  const Observation* obs = nullptr;
  Eigen::Vector3d pre_squash = Eigen::Vector3d::Zero();
  double old_log_prob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
  Eigen::Vector3d aux_target = Eigen::Vector3d::Zero();
};

struct PPOLoss {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double aux = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Clipped-surrogate loss plus value, entropy and auxiliary terms averaged over the
// samples. When grad is non-null the analytic gradient is accumulated into it.
PPOLoss ppo_loss(const PolicyParams& params, std::span<const PPOSample> samples,
                 const PPOConfig& cfg, double max_speed, std::vector<double>* grad = nullptr);

struct Transition {
  Observation obs;
  Eigen::Vector3d pre_squash = Eigen::Vector3d::Zero();
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
  Termination termination = Termination::kNone;
  bool fault = false;  // episode aborted by a physics divergence
  Eigen::Vector3d aux_target = Eigen::Vector3d::Zero();
};

struct EpisodeSummary {
  int env = 0;
  std::uint64_t seed = 0;
  int steps = 0;
  Termination termination = Termination::kNone;
  bool fault = false;
  RewardTerms reward;  // summed over the episode
  double max_force_ratio = 0.0;
  double progress = 0.0;
};

// Env-major batch: transition (e, t) lives at index e * horizon + t.
struct RolloutBatch {
  int num_envs = 0;
  int horizon = 0;
  std::vector<Transition> transitions;
  std::vector<double> bootstrap_values;  // V(s_horizon) per environment
  std::vector<EpisodeSummary> episodes;  // completed during this batch, env-major
  int faults = 0;
};

// N independently seeded environments with auto-reset. Environment e draws its episode
// seeds and action noise from its own stream, so results do not depend on scheduling.
class VecEnv {
 public:
  VecEnv(const EnvConfig& config, int num_envs, std::uint64_t master_seed,
         std::uint64_t stream = 0);

  int size() const { return static_cast<int>(envs_.size()); }
  NavEnv& env(int i) { return envs_[i].env; }

  RolloutBatch collect(const PolicyParams& params, int horizon, int workers);

 private:
  struct Slot {
    NavEnv env;
    std::mt19937_64 rng;
    EpisodeSummary running;
  };
  void start_episode(int index);
  void run_env(int index, const PolicyParams& params, int horizon, RolloutBatch& batch,
               std::vector<std::vector<EpisodeSummary>>& finished);

  std::vector<Slot> envs_;
};

RolloutBatch collect_rollouts(VecEnv& envs, const PolicyParams& params, int horizon,
                              int workers = 1);

struct UpdateStats {
  PPOLoss loss;
  double grad_norm = 0.0;
};

// Computes advantages for a batch and runs the configured PPO epochs in place.
UpdateStats ppo_update(PolicyParams& params, Adam& adam, const RolloutBatch& batch,
                       const PPOConfig& cfg, double max_speed, std::uint64_t shuffle_seed);

struct TrainConfig {
  PPOConfig ppo;
  EnvConfig env;
  PolicyArch arch;
  PolicyInit init;
  std::int64_t total_steps = 3'000'000;
  std::uint64_t seed = 1;
  int workers = 1;
};

// Parameters a fresh training run starts from (the "untrained policy").
PolicyParams initial_params(const TrainConfig& config);

// One row of the metrics table.
struct UpdateRecord {
  std::int64_t update = 0;
  std::int64_t total_steps = 0;
  UpdateStats stats;
  double mean_reward = 0.0;  // per transition
  int episodes = 0;
  double success_rate = 0.0;
  double violation_rate = 0.0;
  double mean_max_force_ratio = 0.0;
  int faults = 0;
};

// Serializable trainer progress (everything except the environments).
struct TrainerState {
  PolicyParams params;
  Adam adam;
  std::int64_t update = 0;
  std::int64_t total_steps = 0;
};

class Trainer {
 public:
  explicit Trainer(TrainConfig config);
  // Continues from a saved state; environments are re-seeded from the update count.
  Trainer(TrainConfig config, TrainerState state);

  // Runs one rollout + update.
  UpdateRecord iterate();
  bool finished() const { return state_.total_steps >= config_.total_steps; }

  const TrainerState& state() const { return state_; }
  const TrainConfig& config() const { return config_; }
  const std::vector<EpisodeSummary>& last_episodes() const { return last_episodes_; }

 private:
  TrainConfig config_;
  TrainerState state_;
  VecEnv envs_;
  std::vector<EpisodeSummary> last_episodes_;
};

}  // namespace crowdnav
