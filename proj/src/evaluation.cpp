#include "crowdnav/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>

#include <fmt/format.h>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/global_control.h>
#include <tbb/task_arena.h>

#include "crowdnav/errors.hpp"

namespace crowdnav {

std::string_view to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::kReached:
      return "reached";
    case OutcomeKind::kSafeStop:
      return "safe_stop";
    case OutcomeKind::kForceViolation:
      return "force_violation";
    case OutcomeKind::kUnsafeTimeout:
      return "unsafe_timeout";
  }
  return "unknown";
}

OutcomeKind outcome_kind_from_string(std::string_view s) {
  for (OutcomeKind k : {OutcomeKind::kReached, OutcomeKind::kSafeStop,
                        OutcomeKind::kForceViolation, OutcomeKind::kUnsafeTimeout}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown outcome kind '" + std::string(s) + "'");
}

std::string_view to_string(PolicyMode m) {
  return m == PolicyMode::kMeanAction ? "mean" : "stochastic";
}

PolicyMode policy_mode_from_string(std::string_view s) {
  if (s == "mean") return PolicyMode::kMeanAction;
  if (s == "stochastic") return PolicyMode::kStochastic;
  throw ConfigError("policy mode must be 'mean' or 'stochastic', got '" + std::string(s) + "'");
}

Controller policy_controller(const PolicyParams& params, PolicyMode mode, std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(mix_seed(seed, 3));
  return [&params, mode, rng](const NavEnv& env) {
    const PolicyStep step = evaluate_policy(params, env.observation());
    const Eigen::Vector3d s =
        mode == PolicyMode::kMeanAction ? step.dist.mean : sample_action(step.dist, *rng);
    return squash(s, env.config().dynamics.robot_max_speed);
  };
}

Controller constant_velocity_controller(double speed) {
  return [speed](const NavEnv& env) {
    const Vec2 d = env.world().goal - env.world().start;
    const double heading = std::atan2(d.y, d.x);
    return Action{speed, heading, heading};
  };
}

EpisodeOutcome run_episode(const EnvConfig& config, std::uint64_t seed, const Controller& controller,
                           const SafeStopRule& rule, const StepObserver& observer) {
  NavEnv env(config);
  env.reset(seed);
  const double dt = config.dynamics.timing.control_dt;
  const auto window = static_cast<std::size_t>(std::max(1L, std::lround(rule.window / dt)));
  std::deque<double> speeds;

  EpisodeOutcome out;
  out.density = config.crowd.density;
  out.seed = seed;
  for (;;) {
    const StepResult r = env.step(controller(env));
    if (observer) observer(env, r);
    out.max_force = std::max(out.max_force, r.period.max_force);
    speeds.push_back(env.robot().velocity.norm());
    if (speeds.size() > window) speeds.pop_front();
    if (r.termination == Termination::kNone) continue;

    out.steps = env.steps();
    switch (r.termination) {
      case Termination::kSuccess:
        out.kind = OutcomeKind::kReached;
        out.time_to_completion = env.steps() * dt;
        break;
      case Termination::kForceViolation:
        out.kind = OutcomeKind::kForceViolation;
        break;
      default: {
        double mean = 0.0;
        for (double v : speeds) mean += v;
        mean /= static_cast<double>(speeds.size());
        out.kind = mean < rule.speed_limit ? OutcomeKind::kSafeStop : OutcomeKind::kUnsafeTimeout;
        break;
      }
    }
    return out;
  }
}

EpisodeOutcome run_episode(const EnvConfig& config, const PolicyParams& params, std::uint64_t seed,
                           PolicyMode mode, const SafeStopRule& rule,
                           const StepObserver& observer) {
  return run_episode(config, seed, policy_controller(params, mode, seed), rule, observer);
}

Bucket bucket_of(double density) {
  if (density == 1.0) return Bucket::kAt;
  return density < 1.0 ? Bucket::kBelow : Bucket::kAbove;
}

std::string_view bucket_label(Bucket b) {
  switch (b) {
    case Bucket::kBelow:
      return "<1.0";
    case Bucket::kAt:
      return "=1.0";
    case Bucket::kAbove:
      return ">1.0";
  }
  return "?";
}

EvalReport aggregate(std::vector<EpisodeOutcome> outcomes) {
  EvalReport report;
  std::array<std::vector<double>, kBucketCount> times;
  for (const EpisodeOutcome& o : outcomes) {
    const int b = static_cast<int>(bucket_of(o.density));
    BucketStats& s = report.buckets[b];
    ++s.trials;
    switch (o.kind) {
      case OutcomeKind::kReached:
        ++s.reached;
        times[b].push_back(o.time_to_completion);
        break;
      case OutcomeKind::kSafeStop:
        ++s.safe_stops;
        break;
      case OutcomeKind::kForceViolation:
        ++s.violations;
        break;
      case OutcomeKind::kUnsafeTimeout:
        ++s.unsafe_timeouts;
        break;
    }
  }
  for (int b = 0; b < kBucketCount; ++b) {
    BucketStats& s = report.buckets[b];
    if (s.trials > 0) s.success_rate = 100.0 * (s.reached + s.safe_stops) / s.trials;
    const auto& t = times[b];
    if (!t.empty()) {
      double sum = 0.0;
      for (double v : t) sum += v;
      s.mean_time = sum / static_cast<double>(t.size());
    }
    if (t.size() > 1) {
      double sq = 0.0;
      for (double v : t) sq += (v - s.mean_time) * (v - s.mean_time);
      s.std_time = std::sqrt(sq / static_cast<double>(t.size() - 1));
    }
  }
  report.outcomes = std::move(outcomes);
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["format"] = "crowdnav-eval-report";
  j["version"] = 1;
  j["digest"] = digest;
  j["mode"] = mode;
  j["time_statistics"] = "reached episodes only; sigma is the sample standard deviation";
  j["buckets"] = nlohmann::json::array();
  for (int b = 0; b < kBucketCount; ++b) {
    const BucketStats& s = buckets[b];
    j["buckets"].push_back({{"label", bucket_label(static_cast<Bucket>(b))},
                            {"trials", s.trials},
                            {"reached", s.reached},
                            {"safe_stops", s.safe_stops},
                            {"force_violations", s.violations},
                            {"unsafe_timeouts", s.unsafe_timeouts},
                            {"success_rate", s.success_rate},
                            {"mean_time", s.mean_time},
                            {"std_time", s.std_time}});
  }
  j["outcomes"] = nlohmann::json::array();
  for (const EpisodeOutcome& o : outcomes) {
    j["outcomes"].push_back({{"kind", to_string(o.kind)},
                             {"time_to_completion", o.time_to_completion},
                             {"max_force", o.max_force},
                             {"density", o.density},
                             {"seed", o.seed},
                             {"steps", o.steps}});
  }
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "crowdnav-eval-report") {
    throw ConfigError("not an evaluation report");
  }
  if (j.at("version").get<int>() != 1) throw ConfigError("unsupported report version");
  std::vector<EpisodeOutcome> outcomes;
  for (const auto& o : j.at("outcomes")) {
    EpisodeOutcome e;
    e.kind = outcome_kind_from_string(o.at("kind").get<std::string>());
    e.time_to_completion = o.at("time_to_completion").get<double>();
    e.max_force = o.at("max_force").get<double>();
    e.density = o.at("density").get<double>();
    e.seed = o.at("seed").get<std::uint64_t>();
    e.steps = o.at("steps").get<int>();
    outcomes.push_back(e);
  }
  EvalReport r = aggregate(std::move(outcomes));
  r.digest = j.value("digest", "");
  r.mode = j.value("mode", "");
  return r;
}

std::string EvalReport::table() const {
  std::string out = fmt::format("{:<8} {:>8} {:>22} {:>8} {:>10} {:>10} {:>15} {:>7}\n", "Density",
                                "Success", "Time to Completion (s)", "Reached", "Safe stop",
                                "Violation", "Unsafe timeout", "Trials");
  for (int b = 0; b < kBucketCount; ++b) {
    const BucketStats& s = buckets[b];
    const std::string time =
        s.reached > 0 ? fmt::format("{:.2f} ({:.2f})", s.mean_time, s.std_time) : "-";
    out += fmt::format("{:<8} {:>7.1f}% {:>22} {:>8} {:>10} {:>10} {:>15} {:>7}\n",
                       bucket_label(static_cast<Bucket>(b)), s.success_rate, time, s.reached,
                       s.safe_stops, s.violations, s.unsafe_timeouts, s.trials);
  }
  out += "Time statistics cover reached episodes only (sample sigma).\n";
  return out;
}

void SweepSpec::validate() const {
  if (densities.empty()) throw ConfigError("sweep needs at least one density");
  for (double d : densities) {
    if (!(d >= 0.0 && d <= 2.0)) throw ConfigError("sweep densities must lie in [0, 2]");
  }
  if (trials_per_density < 1) throw ConfigError("sweep needs at least one trial per density");
}

EvalReport run_sweep(const EnvConfig& config, const SweepSpec& spec,
                     const ControllerFactory& factory, int workers) {
  spec.validate();
  const int trials = spec.trials_per_density;
  std::vector<EpisodeOutcome> outcomes(spec.total());
  // Lift TBB's hardware-derived cap so the requested pool size is honoured.
  tbb::global_control parallelism(tbb::global_control::max_allowed_parallelism,
                                   static_cast<std::size_t>(std::max(1, workers)));
  tbb::task_arena arena(std::max(1, workers));
  arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<int>(0, spec.total(), 1),
                      [&](const tbb::blocked_range<int>& r) {
                        for (int k = r.begin(); k < r.end(); ++k) {
                          EnvConfig cfg = config;
                          cfg.crowd.density = spec.densities[k / trials];
                          const std::uint64_t seed = spec.base_seed + (k % trials);
                          outcomes[k] = run_episode(cfg, seed, factory(seed));
                        }
                      });
  });
  return aggregate(std::move(outcomes));
}

EvalReport run_sweep(const EnvConfig& config, const PolicyParams& params, const SweepSpec& spec,
                     PolicyMode mode, int workers) {
  EvalReport report = run_sweep(
      config, spec,
      [&params, mode](std::uint64_t seed) { return policy_controller(params, mode, seed); },
      workers);
  report.mode = std::string(to_string(mode));
  return report;
}

}  // namespace crowdnav
