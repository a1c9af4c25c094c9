#include "crowdnav/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/global_control.h>
#include <tbb/task_arena.h>

#include "crowdnav/errors.hpp"

namespace crowdnav {

void PPOConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0 && lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("gamma and lambda must lie in [0, 1]");
  }
  if (!(clip > 0.0)) throw ConfigError("clip epsilon must be positive");
  if (epochs < 1 || minibatch < 1 || num_envs < 1 || horizon < 1) {
    throw ConfigError("epochs, minibatch, envs and horizon must be at least 1");
  }
  if (!(learning_rate > 0.0 && max_grad_norm > 0.0)) {
    throw ConfigError("learning rate and gradient clip must be positive");
  }
  if (!(value_coef >= 0.0 && entropy_coef >= 0.0 && aux_coef >= 0.0)) {
    throw ConfigError("loss coefficients must be non-negative");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 &&
        adam_eps > 0.0)) {
    throw ConfigError("invalid Adam moments");
  }
}

AdvantageEstimate gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap_value, double gamma,
                      double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw ContractViolation("gae: rewards, values and dones differ in length");
  }
  AdvantageEstimate out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  double next_value = bootstrap_value;
  for (std::size_t k = n; k-- > 0;) {
    const double live = dones[k] != 0 ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    running = delta + gamma * lambda * live * running;
    out.advantages[k] = running;
    out.returns[k] = running + values[k];
    next_value = values[k];
  }
  return out;
}

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= n;
  const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
  for (double& a : adv) a = (a - mean) * scale;
}

void Adam::reset(std::size_t n) {
  m.assign(n, 0.0);
  v.assign(n, 0.0);
  t = 0;
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad, double lr,
                double beta1, double beta2, double eps) {
  if (m.size() != params.size()) reset(params.size());
  if (grad.size() != params.size()) throw ContractViolation("adam: gradient size mismatch");
  ++t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

double clip_grad_norm(std::vector<double>& grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

PPOLoss ppo_loss(const PolicyParams& params, std::span<const PPOSample> samples,
                 const PPOConfig& cfg, double max_speed, std::vector<double>* grad) {
  if (samples.empty()) throw ContractViolation("ppo_loss: empty minibatch");
  std::vector<const Observation*> obs;
  obs.reserve(samples.size());
  for (const PPOSample& s : samples) obs.push_back(s.obs);
  const ObsBatch batch = ObsBatch::from(obs);

  ForwardCache cache;
  const PolicyOutput out = policy_forward(params, batch, grad != nullptr ? &cache : nullptr);
  const int n = static_cast<int>(samples.size());
  const double inv_n = 1.0 / n;
  const Eigen::Vector3d inv_var = (-2.0 * out.log_std).array().exp();

  OutputGrads g;
  g.mean = Eigen::MatrixXd::Zero(kActionDim, n);
  g.value = Eigen::RowVectorXd::Zero(n);
  g.aux = Eigen::MatrixXd::Zero(kAuxDim, n);

  PPOLoss loss;
  int clipped = 0;
  for (int i = 0; i < n; ++i) {
    const PPOSample& s = samples[i];
    const Eigen::Vector3d mean = out.mean.col(i);
    const double lp = gaussian_log_prob(mean, out.log_std, s.pre_squash) -
                      squash_log_det(s.pre_squash, max_speed);
    const double ratio = std::exp(lp - s.old_log_prob);
    const double r_clip = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    const double surr1 = ratio * s.advantage;
    const double surr2 = r_clip * s.advantage;
    loss.policy -= std::min(surr1, surr2) * inv_n;
    if (std::abs(ratio - 1.0) > cfg.clip) ++clipped;
    loss.approx_kl += (s.old_log_prob - lp) * inv_n;

    // d(loss)/d(log_prob) is non-zero only on the unclipped branch.
    const double dlp = surr1 <= surr2 ? -ratio * s.advantage * inv_n : 0.0;
    const Eigen::Vector3d diff = s.pre_squash - mean;
    g.mean.col(i) = dlp * diff.cwiseProduct(inv_var);
    g.log_std += dlp * (diff.cwiseAbs2().cwiseProduct(inv_var) - Eigen::Vector3d::Ones());

    const double verr = out.value(i) - s.ret;
    loss.value += verr * verr * inv_n;
    g.value(i) = 2.0 * cfg.value_coef * verr * inv_n;

    const Eigen::Vector3d aerr = out.aux.col(i) - s.aux_target;
    loss.aux += aerr.squaredNorm() * inv_n;
    g.aux.col(i) = 2.0 * cfg.aux_coef * aerr * inv_n;
  }
  loss.entropy = gaussian_entropy(out.log_std);
  g.log_std -= cfg.entropy_coef * Eigen::Vector3d::Ones();
  loss.clip_fraction = static_cast<double>(clipped) * inv_n;
  loss.total = loss.policy + cfg.value_coef * loss.value - cfg.entropy_coef * loss.entropy +
               cfg.aux_coef * loss.aux;

  if (grad != nullptr) policy_backward(params, cache, g, *grad);
  return loss;
}

VecEnv::VecEnv(const EnvConfig& config, int num_envs, std::uint64_t master_seed,
               std::uint64_t stream) {
  if (num_envs < 1) throw ConfigError("need at least one environment");
  envs_.reserve(num_envs);
  for (int i = 0; i < num_envs; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32), static_cast<std::uint32_t>(i),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    envs_.push_back(Slot{NavEnv(config), std::mt19937_64(seq), {}});
    start_episode(i);
  }
}

void VecEnv::start_episode(int index) {
  Slot& s = envs_[index];
  for (;;) {
    const std::uint64_t seed = s.rng();
    try {
      s.env.reset(seed);
    } catch (const SpawnError&) {
      continue;  // crowd did not fit even after the env's own retries; draw a new world
    }
    s.running = EpisodeSummary{};
    s.running.env = index;
    s.running.seed = seed;
    return;
  }
}

void VecEnv::run_env(int index, const PolicyParams& params, int horizon, RolloutBatch& batch,
                     std::vector<std::vector<EpisodeSummary>>& finished) {
  Slot& s = envs_[index];
  const double vmax = s.env.config().dynamics.robot_max_speed;
  for (int t = 0; t < horizon; ++t) {
    Transition& tr = batch.transitions[static_cast<std::size_t>(index) * horizon + t];
    tr.obs = s.env.observation();
    const AuxTargets& aux = s.env.aux_targets();
    tr.aux_target = {aux.wall_left, aux.wall_right, aux.human};
    const PolicyStep ps = evaluate_policy(params, tr.obs);
    tr.value = ps.value;
    tr.pre_squash = sample_action(ps.dist, s.rng);
    tr.log_prob = log_prob(ps.dist, tr.pre_squash, vmax);

    StepResult r;
    try {
      r = s.env.step(squash(tr.pre_squash, vmax));
    } catch (const SimulationDiverged&) {
      tr.reward = 0.0;
      tr.done = true;
      tr.fault = true;
      s.running.fault = true;
      s.running.steps = s.env.steps();
      finished[index].push_back(s.running);
      start_episode(index);
      continue;
    }
    tr.reward = r.reward.total();
    tr.termination = r.termination;
    tr.done = r.termination != Termination::kNone;

    EpisodeSummary& ep = s.running;
    ep.reward.progress += r.reward.progress;
    ep.reward.force += r.reward.force;
    ep.reward.action_rate += r.reward.action_rate;
    ep.reward.terminal += r.reward.terminal;
    ep.max_force_ratio = std::max(ep.max_force_ratio, r.period.max_force_ratio);
    if (tr.done) {
      ep.steps = s.env.steps();
      ep.termination = r.termination;
      ep.progress = s.env.progress();
      finished[index].push_back(ep);
      start_episode(index);
    }
  }
  batch.bootstrap_values[index] = evaluate_policy(params, s.env.observation()).value;
}

RolloutBatch VecEnv::collect(const PolicyParams& params, int horizon, int workers) {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  const int n = size();
  RolloutBatch batch;
  batch.num_envs = n;
  batch.horizon = horizon;
  batch.transitions.resize(static_cast<std::size_t>(n) * horizon);
  batch.bootstrap_values.assign(n, 0.0);
  std::vector<std::vector<EpisodeSummary>> finished(n);

  // Lift TBB's hardware-derived cap so the requested pool size is honoured.
  tbb::global_control parallelism(tbb::global_control::max_allowed_parallelism,
                                   static_cast<std::size_t>(std::max(1, workers)));
  tbb::task_arena arena(std::max(1, workers));
  arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<int>(0, n, 1), [&](const tbb::blocked_range<int>& r) {
      for (int i = r.begin(); i < r.end(); ++i) run_env(i, params, horizon, batch, finished);
    });
  });

  for (const auto& list : finished) {
    for (const EpisodeSummary& ep : list) {
      if (ep.fault) ++batch.faults;
      batch.episodes.push_back(ep);
    }
  }
  return batch;
}

RolloutBatch collect_rollouts(VecEnv& envs, const PolicyParams& params, int horizon, int workers) {
  return envs.collect(params, horizon, workers);
}

UpdateStats ppo_update(PolicyParams& params, Adam& adam, const RolloutBatch& batch,
                       const PPOConfig& cfg, double max_speed, std::uint64_t shuffle_seed) {
  const std::size_t total = batch.transitions.size();
  if (total == 0) throw ContractViolation("ppo_update: empty batch");

  std::vector<PPOSample> samples(total);
  std::vector<double> advantages(total);
  std::vector<double> rewards(batch.horizon), values(batch.horizon);
  std::vector<std::uint8_t> dones(batch.horizon);
  for (int e = 0; e < batch.num_envs; ++e) {
    const std::size_t base = static_cast<std::size_t>(e) * batch.horizon;
    for (int t = 0; t < batch.horizon; ++t) {
      const Transition& tr = batch.transitions[base + t];
      rewards[t] = tr.reward;
      values[t] = tr.value;
      dones[t] = tr.done ? 1 : 0;
    }
    const AdvantageEstimate est =
        gae(rewards, values, dones, batch.bootstrap_values[e], cfg.gamma, cfg.lambda);
    for (int t = 0; t < batch.horizon; ++t) {
      const Transition& tr = batch.transitions[base + t];
      PPOSample& s = samples[base + t];
      s.obs = &tr.obs;
      s.pre_squash = tr.pre_squash;
      s.old_log_prob = tr.log_prob;
      s.ret = est.returns[t];
      s.aux_target = tr.aux_target;
      advantages[base + t] = est.advantages[t];
    }
  }
  normalize_advantages(advantages);
  for (std::size_t i = 0; i < total; ++i) samples[i].advantage = advantages[i];

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(shuffle_seed);
  std::vector<double> grad(params.size());
  std::vector<PPOSample> mb;
  UpdateStats stats;
  int steps = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < total; start += cfg.minibatch) {
      const std::size_t end = std::min(total, start + static_cast<std::size_t>(cfg.minibatch));
      mb.clear();
      for (std::size_t k = start; k < end; ++k) mb.push_back(samples[order[k]]);
      std::fill(grad.begin(), grad.end(), 0.0);
      const PPOLoss loss = ppo_loss(params, mb, cfg, max_speed, &grad);
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "non-finite PPO loss at epoch " << epoch << ", minibatch offset " << start
            << ": policy=" << loss.policy << " value=" << loss.value
            << " entropy=" << loss.entropy << " aux=" << loss.aux;
        throw TrainingAborted(msg.str());
      }
      const double norm = clip_grad_norm(grad, cfg.max_grad_norm);
      adam.step(params.data(), grad, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                cfg.adam_eps);
      stats.loss.policy += loss.policy;
      stats.loss.value += loss.value;
      stats.loss.entropy += loss.entropy;
      stats.loss.aux += loss.aux;
      stats.loss.total += loss.total;
      stats.loss.clip_fraction += loss.clip_fraction;
      stats.loss.approx_kl += loss.approx_kl;
      stats.grad_norm += norm;
      ++steps;
    }
  }
  const double inv = 1.0 / steps;
  for (double* v : {&stats.loss.policy, &stats.loss.value, &stats.loss.entropy, &stats.loss.aux,
                    &stats.loss.total, &stats.loss.clip_fraction, &stats.loss.approx_kl,
                    &stats.grad_norm}) {
    *v *= inv;
  }
  if (!params.all_finite()) throw TrainingAborted("parameters became non-finite after update");
  return stats;
}

PolicyParams initial_params(const TrainConfig& config) {
  return PolicyParams::initialized(config.arch, mix_seed(config.seed, 7), config.init);
}

Trainer::Trainer(TrainConfig config)
    : Trainer(config, TrainerState{initial_params(config), Adam{}, 0, 0}) {}

Trainer::Trainer(TrainConfig config, TrainerState state)
    : config_(std::move(config)),
      state_(std::move(state)),
      envs_(config_.env, config_.ppo.num_envs, config_.seed,
            static_cast<std::uint64_t>(state_.update)) {
  config_.ppo.validate();
  if (!(state_.params.arch() == config_.arch)) {
    throw DigestMismatch("trainer state was produced with a different policy architecture");
  }
  if (state_.adam.m.size() != state_.params.size()) state_.adam.reset(state_.params.size());
}

UpdateRecord Trainer::iterate() {
  const PPOConfig& ppo = config_.ppo;
  const RolloutBatch batch = envs_.collect(state_.params, ppo.horizon, config_.workers);
  UpdateRecord rec;
  rec.stats = ppo_update(state_.params, state_.adam, batch, ppo,
                         config_.env.dynamics.robot_max_speed,
                         mix_seed(config_.seed, 1'000'000 + static_cast<std::uint64_t>(state_.update)));
  ++state_.update;
  state_.total_steps += static_cast<std::int64_t>(batch.transitions.size());

  rec.update = state_.update;
  rec.total_steps = state_.total_steps;
  double reward_sum = 0.0;
  for (const Transition& tr : batch.transitions) reward_sum += tr.reward;
  rec.mean_reward = reward_sum / static_cast<double>(batch.transitions.size());
  rec.faults = batch.faults;
  int successes = 0, violations = 0, counted = 0;
  double force_sum = 0.0;
  for (const EpisodeSummary& ep : batch.episodes) {
    if (ep.fault) continue;
    ++counted;
    if (ep.termination == Termination::kSuccess) ++successes;
    if (ep.termination == Termination::kForceViolation) ++violations;
    force_sum += ep.max_force_ratio;
  }
  rec.episodes = counted;
  if (counted > 0) {
    rec.success_rate = static_cast<double>(successes) / counted;
    rec.violation_rate = static_cast<double>(violations) / counted;
    rec.mean_max_force_ratio = force_sum / counted;
  }
  last_episodes_ = batch.episodes;
  return rec;
}

}  // namespace crowdnav
