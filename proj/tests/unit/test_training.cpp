#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "crowdnav/errors.hpp"
#include "crowdnav/training.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace crowdnav {
namespace {

TEST(ComputeReward, Examples) {
  const RewardConfig cfg;
  const Action a{0.5, 0.1, 0.2};
  EXPECT_NEAR(compute_reward(1.0, 1.1, 0.0, a, a, Termination::kNone, cfg).total(), 0.1, 1e-12);
  EXPECT_EQ(compute_reward(1.0, 1.0, 0.0, a, a, Termination::kNone, cfg).total(), 0.0);
  const RewardTerms hit = compute_reward(1.0, 1.0, 1.0, a, a, Termination::kForceViolation, cfg);
  EXPECT_DOUBLE_EQ(hit.force, -0.2);
  EXPECT_EQ(hit.terminal, cfg.failure);
  const RewardTerms goal = compute_reward(1.0, 1.2, 0.0, a, a, Termination::kSuccess, cfg);
  EXPECT_EQ(goal.terminal, cfg.success);
  // Timeouts carry no penalty beyond the missing bonus.
  EXPECT_EQ(compute_reward(1.0, 1.0, 0.0, a, a, Termination::kTimeout, cfg).terminal, 0.0);
}

TEST(ComputeReward, BackwardsMotionEarnsNothingAndTermsSum) {
  const RewardConfig cfg;
  const Action a{0.5, 0.1, 0.2}, b{0.1, -3.0, 3.0};
  const RewardTerms r = compute_reward(2.0, 1.5, 0.3, a, b, Termination::kNone, cfg);
  EXPECT_EQ(r.progress, 0.0);
  EXPECT_LT(r.action_rate, 0.0);
  EXPECT_EQ(r.total(), r.progress + r.force + r.action_rate + r.terminal);
  // Heading differences are wrapped: 3.1 and -3.1 are close.
  EXPECT_NEAR(action_distance_sq({0.0, 3.1, 0.0}, {0.0, -3.1, 0.0}),
              std::pow(2.0 * std::numbers::pi - 6.2, 2.0), 1e-12);
}

TEST(CheckTermination, Examples) {
  const TerminationRule rule;
  BodyState r;
  r.position = {0.0, 0.0};
  EXPECT_EQ(check_termination(r, {3.0, 0.0}, 1.0, 5, rule), Termination::kForceViolation);
  EXPECT_EQ(check_termination(r, {0.49, 0.0}, 0.0, 5, rule), Termination::kSuccess);
  EXPECT_EQ(check_termination(r, {3.0, 0.0}, 0.5, 300, rule), Termination::kTimeout);
  EXPECT_EQ(check_termination(r, {3.0, 0.0}, 0.5, 299, rule), Termination::kNone);
  // Violation wins over reaching the goal.
  EXPECT_EQ(check_termination(r, {0.1, 0.0}, 1.2, 300, rule), Termination::kForceViolation);
}

TEST(Gae, SingleStep) {
  const std::vector<double> r{0.7}, v{0.2};
  const std::vector<std::uint8_t> d{0};
  const auto e = gae(r, v, d, 1.5, 0.99, 0.95);
  EXPECT_NEAR(e.advantages[0], 0.7 + 0.99 * 1.5 - 0.2, 1e-15);
  EXPECT_NEAR(e.returns[0], e.advantages[0] + 0.2, 1e-15);
}

TEST(Gae, LambdaZeroIsOneStepTd) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> r(20), v(20);
  std::vector<std::uint8_t> d(20, 0);
  for (int i = 0; i < 20; ++i) {
    r[i] = n(rng);
    v[i] = n(rng);
  }
  d[7] = 1;
  const auto e = gae(r, v, d, 0.3, 0.9, 0.0);
  for (int t = 0; t < 20; ++t) {
    const double next = t + 1 < 20 ? v[t + 1] : 0.3;
    EXPECT_NEAR(e.advantages[t], r[t] + (d[t] ? 0.0 : 0.9 * next) - v[t], 1e-14);
  }
}

TEST(Gae, MatchesBruteForceOnRandomSequences) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 64);
  std::bernoulli_distribution done(0.08);
  for (int trial = 0; trial < 200; ++trial) {
    const int T = trial == 0 ? 50 : len(rng);
    std::vector<double> r(T), v(T);
    std::vector<std::uint8_t> d(T);
    for (int i = 0; i < T; ++i) {
      r[i] = n(rng);
      v[i] = n(rng);
      d[i] = done(rng);
    }
    const double boot = n(rng);
    const auto e = gae(r, v, d, boot, 0.99, 0.95);
    const auto oracle = test::brute_force_gae(r, v, d, boot, 0.99, 0.95);
    for (int t = 0; t < T; ++t) EXPECT_NEAR(e.advantages[t], oracle[t], 1e-9);
  }
}

TEST(Gae, EpisodeBoundaryBlocksBootstrapping) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> r(30), v(30);
  for (int i = 0; i < 30; ++i) {
    r[i] = n(rng);
    v[i] = n(rng);
  }
  std::vector<std::uint8_t> open(30, 0), cut(30, 0);
  cut[12] = 1;
  const auto a = gae(r, v, open, 0.5, 0.99, 0.95);
  const auto b = gae(r, v, cut, 0.5, 0.99, 0.95);
  for (int t = 13; t < 30; ++t) EXPECT_EQ(a.advantages[t], b.advantages[t]);
  EXPECT_NEAR(b.advantages[12], r[12] - v[12], 1e-15);
  for (double x : b.advantages) EXPECT_TRUE(std::isfinite(x));
}

TEST(Gae, LengthMismatchIsAContractViolation) {
  const std::vector<double> r{1.0, 2.0}, v{1.0};
  const std::vector<std::uint8_t> d{0, 0};
  EXPECT_THROW(gae(r, v, d, 0.0, 0.99, 0.95), ContractViolation);
}

TEST(NormalizeAdvantages, ZeroMeanUnitStd) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(3.0, 7.0);
  std::vector<double> a(1000);
  for (double& x : a) x = n(rng);
  normalize_advantages(a);
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  EXPECT_LT(std::abs(mean), 1e-9);
  EXPECT_NEAR(std::sqrt(var / a.size()), 1.0, 1e-6);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam adam;
  adam.reset(2);
  std::vector<double> p{1.0, -1.0};
  adam.step(p, {0.5, -3.0}, 0.1, 0.9, 0.999, 1e-8);
  // Bias-corrected first step is lr * sign(g).
  EXPECT_NEAR(p[0], 0.9, 1e-7);
  EXPECT_NEAR(p[1], -0.9, 1e-7);
  EXPECT_EQ(adam.t, 1);
}

TEST(ClipGradNorm, ScalesOnlyWhenAboveLimit) {
  std::vector<double> g{3.0, 4.0};
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 0.5), 5.0);
  EXPECT_NEAR(std::hypot(g[0], g[1]), 0.5, 1e-12);
  std::vector<double> s{0.1, 0.1};
  clip_grad_norm(s, 0.5);
  EXPECT_EQ(s[0], 0.1);
}

PolicyArch small_arch() {
  PolicyArch a;
  a.rays = 16;
  a.history = 2;
  a.conv1_channels = 4;
  a.conv2_channels = 4;
  a.feature_dim = 6;
  a.hidden1 = 10;
  a.hidden2 = 8;
  return a;
}

TEST(PpoLoss, IdentityRatioSurrogateIsMinusMeanAdvantage) {
  const PolicyParams p = test::random_params(PolicyArch{}, 1);
  std::mt19937_64 rng(5);
  test::PpoFixture f = test::make_ppo_fixture(p, 6, 1.0, rng);
  double mean_adv = 0.0;
  for (auto& s : f.samples) {
    s.old_log_prob = log_prob(evaluate_policy(p, *s.obs).dist, s.pre_squash, 1.0);
    mean_adv += s.advantage / f.samples.size();
  }
  const PPOLoss loss = ppo_loss(p, f.samples, PPOConfig{}, 1.0);
  EXPECT_NEAR(loss.policy, -mean_adv, 1e-12);
  EXPECT_NEAR(loss.approx_kl, 0.0, 1e-12);
  EXPECT_EQ(loss.clip_fraction, 0.0);
}

TEST(PpoLoss, ClippedBranchHasNoRatioGradient) {
  const PolicyParams p = test::random_params(PolicyArch{}, 2);
  std::mt19937_64 rng(6);
  test::PpoFixture f = test::make_ppo_fixture(p, 1, 1.0, rng);
  PPOSample& s = f.samples[0];
  s.old_log_prob = log_prob(evaluate_policy(p, *s.obs).dist, s.pre_squash, 1.0) - 0.5;
  s.advantage = 1.0;  // ratio e^{0.5} > 1 + clip
  PPOConfig cfg;
  cfg.value_coef = 0.0;
  cfg.aux_coef = 0.0;
  cfg.entropy_coef = 0.0;
  std::vector<double> grad(p.size(), 0.0);
  const PPOLoss loss = ppo_loss(p, f.samples, cfg, 1.0, &grad);
  EXPECT_EQ(loss.clip_fraction, 1.0);
  EXPECT_NEAR(loss.policy, -(1.0 + cfg.clip), 1e-12);
  for (double g : grad) EXPECT_EQ(g, 0.0);
}

TEST(PpoLoss, GradientMatchesFiniteDifferences) {
  const PolicyArch arch = small_arch();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const PolicyParams p = test::random_params(arch, seed + 100);
    std::mt19937_64 rng(seed);
    const test::PpoFixture f = test::make_ppo_fixture(p, 6, 1.0, rng);
    const PPOConfig cfg;
    std::vector<double> grad(p.size(), 0.0);
    ppo_loss(p, f.samples, cfg, 1.0, &grad);
    std::vector<const Observation*> obs;
    for (const auto& s : f.samples) obs.push_back(s.obs);
    const ObsBatch batch = ObsBatch::from(obs);
    std::vector<std::size_t> all(p.size());
    std::iota(all.begin(), all.end(), 0);
    const auto r = test::check_gradient(
        p, grad, all, [&](const PolicyParams& q) { return ppo_loss(q, f.samples, cfg, 1.0).total; },
        [&](const PolicyParams& q) { return test::forward_pattern(q, batch); });
    EXPECT_EQ(r.failures, 0) << "seed " << seed << " worst " << r.worst_detail;
  }
}

EnvConfig small_env(double density = 1.0) {
  EnvConfig e;
  e.crowd.density = density;
  e.sensing.rays = 16;
  e.sensing.history = 2;
  e.termination.max_steps = 40;
  return e;
}

bool same_transitions(const RolloutBatch& a, const RolloutBatch& b) {
  if (a.transitions.size() != b.transitions.size()) return false;
  for (std::size_t i = 0; i < a.transitions.size(); ++i) {
    const Transition& x = a.transitions[i];
    const Transition& y = b.transitions[i];
    if (!(x.obs == y.obs) || x.pre_squash != y.pre_squash || x.log_prob != y.log_prob ||
        x.reward != y.reward || x.value != y.value || x.done != y.done ||
        x.aux_target != y.aux_target) {
      return false;
    }
  }
  return a.bootstrap_values == b.bootstrap_values;
}

TEST(CollectRollouts, EnvMajorLayout) {
  const PolicyParams p = PolicyParams::initialized(small_arch(), 1);
  VecEnv envs(small_env(), 2, 7);
  const RolloutBatch b = collect_rollouts(envs, p, 3);
  EXPECT_EQ(b.num_envs, 2);
  EXPECT_EQ(b.horizon, 3);
  ASSERT_EQ(b.transitions.size(), 6u);
  EXPECT_EQ(b.bootstrap_values.size(), 2u);
  // Env-major: env 1's first transition is its own reset observation.
  VecEnv solo(small_env(), 2, 7);
  EXPECT_TRUE(b.transitions[3].obs == solo.env(1).observation());
  EXPECT_TRUE(b.transitions[0].obs == solo.env(0).observation());
}

TEST(CollectRollouts, IndependentOfWorkerCount) {
  const PolicyParams p = PolicyParams::initialized(small_arch(), 2);
  VecEnv one(small_env(), 6, 11), eight(small_env(), 6, 11);
  for (int round = 0; round < 2; ++round) {
    const RolloutBatch a = collect_rollouts(one, p, 50, 1);
    const RolloutBatch b = collect_rollouts(eight, p, 50, 8);
    EXPECT_TRUE(same_transitions(a, b)) << "round " << round;
    ASSERT_EQ(a.episodes.size(), b.episodes.size());
  }
}

TEST(CollectRollouts, EmptyCrowdNeverViolates) {
  const PolicyParams p = PolicyParams::initialized(small_arch(), 3);
  VecEnv envs(small_env(0.0), 4, 5);
  const RolloutBatch b = collect_rollouts(envs, p, 120);
  int done = 0;
  for (const Transition& t : b.transitions) {
    EXPECT_NE(t.termination, Termination::kForceViolation);
    done += t.done;
  }
  EXPECT_GT(done, 0);
}

TEST(CollectRollouts, EpisodeRewardTermsSumToTransitionRewards) {
  const PolicyParams p = PolicyParams::initialized(small_arch(), 4);
  VecEnv envs(small_env(), 3, 9);
  const RolloutBatch b = collect_rollouts(envs, p, 120);
  ASSERT_FALSE(b.episodes.empty());
  for (const EpisodeSummary& ep : b.episodes) {
    const double parts = ep.reward.progress + ep.reward.force + ep.reward.action_rate +
                         ep.reward.terminal;
    EXPECT_EQ(parts, ep.reward.total());
  }
  // The first episode of env 0 starts at transition 0: its transition rewards add up to
  // the summary's total.
  const EpisodeSummary* first = nullptr;
  for (const EpisodeSummary& ep : b.episodes) {
    if (ep.env == 0) {
      first = &ep;
      break;
    }
  }
  ASSERT_NE(first, nullptr);
  double sum = 0.0;
  for (int t = 0; t < first->steps; ++t) sum += b.transitions[t].reward;
  EXPECT_NEAR(sum, first->reward.total(), 1e-9);
  EXPECT_TRUE(b.transitions[first->steps - 1].done);
}

std::vector<PPOSample> samples_like_update(const RolloutBatch& b, const PPOConfig& cfg,
                                           std::vector<double>& adv_out) {
  std::vector<double> ret(b.transitions.size());
  adv_out.assign(b.transitions.size(), 0.0);
  for (int e = 0; e < b.num_envs; ++e) {
    std::vector<double> r, v;
    std::vector<std::uint8_t> d;
    for (int t = 0; t < b.horizon; ++t) {
      const Transition& x = b.transitions[e * b.horizon + t];
      r.push_back(x.reward);
      v.push_back(x.value);
      d.push_back(x.done);
    }
    const auto est = gae(r, v, d, b.bootstrap_values[e], cfg.gamma, cfg.lambda);
    for (int t = 0; t < b.horizon; ++t) {
      adv_out[e * b.horizon + t] = est.advantages[t];
      ret[e * b.horizon + t] = est.returns[t];
    }
  }
  normalize_advantages(adv_out);
  std::vector<PPOSample> s;
  for (std::size_t i = 0; i < b.transitions.size(); ++i) {
    const Transition& x = b.transitions[i];
    s.push_back({&x.obs, x.pre_squash, x.log_prob, adv_out[i], ret[i], x.aux_target});
  }
  return s;
}

TEST(PpoUpdate, LossDecreasesOnAFixedBatch) {
  PolicyParams p = PolicyParams::initialized(small_arch(), 5);
  VecEnv envs(small_env(), 2, 3);
  const RolloutBatch b = collect_rollouts(envs, p, 32);
  PPOConfig cfg;
  cfg.minibatch = 16;
  cfg.learning_rate = 1e-3;
  std::vector<double> adv;
  const auto samples = samples_like_update(b, cfg, adv);
  const double before = ppo_loss(p, samples, cfg, 1.0).total;
  Adam adam;
  adam.reset(p.size());
  ppo_update(p, adam, b, cfg, 1.0, 77);
  const double after = ppo_loss(p, samples, cfg, 1.0).total;
  EXPECT_LT(after, before);
  EXPECT_TRUE(p.all_finite());
}

TEST(PpoUpdate, NonFiniteLossAborts) {
  PolicyParams p = PolicyParams::initialized(small_arch(), 6);
  VecEnv envs(small_env(), 1, 3);
  RolloutBatch b = collect_rollouts(envs, p, 8);
  b.transitions[2].reward = std::nan("");
  Adam adam;
  adam.reset(p.size());
  PPOConfig cfg;
  cfg.minibatch = 8;
  EXPECT_THROW(ppo_update(p, adam, b, cfg, 1.0, 1), TrainingAborted);
}

TrainConfig tiny_train(int workers) {
  TrainConfig c;
  c.env = small_env();
  c.arch = small_arch();
  c.ppo.num_envs = 3;
  c.ppo.horizon = 24;
  c.ppo.minibatch = 24;
  c.ppo.epochs = 2;
  c.total_steps = 3 * 24 * 3;
  c.seed = 13;
  c.workers = workers;
  return c;
}

TEST(Trainer, LossSequenceIsReproducibleAcrossWorkerCounts) {
  Trainer a(tiny_train(1)), b(tiny_train(4));
  while (!a.finished()) {
    ASSERT_FALSE(b.finished());
    const UpdateRecord ra = a.iterate();
    const UpdateRecord rb = b.iterate();
    EXPECT_EQ(ra.total_steps, rb.total_steps);
    EXPECT_EQ(ra.stats.loss.total, rb.stats.loss.total);
    EXPECT_EQ(ra.stats.grad_norm, rb.stats.grad_norm);
    EXPECT_EQ(ra.mean_reward, rb.mean_reward);
  }
  EXPECT_TRUE(b.finished());
  EXPECT_EQ(a.state().params.data(), b.state().params.data());
  EXPECT_EQ(a.state().total_steps, 3 * 24 * 3);
}

TEST(PpoConfig, Validation) {
  PPOConfig c;
  EXPECT_NO_THROW(c.validate());
  c.clip = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  PPOConfig d;
  d.gamma = 1.5;
  EXPECT_THROW(d.validate(), ConfigError);
}

}  // namespace
}  // namespace crowdnav
