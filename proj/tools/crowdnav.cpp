// Command-line entry point: train, eval, replay and plot.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/global_control.h>
#include <tbb/task_arena.h>

#include "CLI11.hpp"

#include "crowdnav/checkpoint.hpp"
#include "crowdnav/episode_log.hpp"
#include "crowdnav/errors.hpp"
#include "crowdnav/plot.hpp"
#include "crowdnav/session.hpp"

using namespace crowdnav;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDigest = 3;
constexpr int kExitDivergence = 4;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out = "run";
  std::string resume;
  int workers = 1;
};

int cmd_train(const TrainArgs& a) {
  const RunConfig cfg = a.config.empty() ? RunConfig::parse("", a.overrides)
                                         : RunConfig::load(a.config, a.overrides);
  TrainOptions opt;
  opt.workers = a.workers;
  if (!a.resume.empty()) opt.resume = a.resume;
  opt.on_update = [](const UpdateRecord& r) {
    std::cerr << fmt::format("update {:4d}  steps {:8d}  success {:.3f}  violation {:.3f}  "
                             "reward {:+.4f}  entropy {:.3f}\n",
                             r.update, r.total_steps, r.success_rate, r.violation_rate,
                             r.mean_reward, r.stats.loss.entropy);
  };
  const RunPaths paths{a.out};
  const TrainerState st = run_training(cfg, paths, opt);
  std::cout << fmt::format("trained {} steps in {} updates; checkpoint {}\n", st.total_steps,
                           st.update, paths.checkpoint());
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::vector<std::string> overrides;
  std::string out = "report.json";
  std::string table;
  std::string log_dir;
  std::string controller = "policy";
  double constant_speed = 1.0;
  int workers = 1;
};

int cmd_eval(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  RunConfig cfg;
  if (a.config.empty()) {
    cfg = ck.config;
    for (const std::string& o : a.overrides) cfg.apply_override(o);
    cfg.validate();
  } else {
    cfg = RunConfig::load(a.config, a.overrides);
  }
  require_compatible(ck, cfg);

  const SweepSpec& sweep = cfg.eval.sweep;
  std::vector<EpisodeOutcome> outcomes(sweep.total());
  // Lift TBB's hardware-derived cap so the requested pool size is honoured.
  tbb::global_control parallelism(tbb::global_control::max_allowed_parallelism,
                                   static_cast<std::size_t>(std::max(1, a.workers)));
  tbb::task_arena arena(std::max(1, a.workers));
  arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<int>(0, sweep.total(), 1),
                      [&](const tbb::blocked_range<int>& r) {
                        for (int k = r.begin(); k < r.end(); ++k) {
                          EpisodeSpec spec;
                          spec.density = sweep.densities[k / sweep.trials_per_density];
                          spec.seed = sweep.base_seed + (k % sweep.trials_per_density);
                          spec.controller = a.controller;
                          spec.mode = cfg.eval.mode;
                          spec.constant_speed = a.constant_speed;
                          spec.checkpoint = a.checkpoint;
                          if (a.log_dir.empty()) {
                            EnvConfig env = cfg.env;
                            env.crowd.density = spec.density;
                            outcomes[k] =
                                a.controller == "constant"
                                    ? run_episode(env, spec.seed,
                                                  constant_velocity_controller(spec.constant_speed))
                                    : run_episode(env, ck.state.params, spec.seed, spec.mode);
                          } else {
                            const EpisodeLog log = record_episode(cfg, spec, &ck.state.params);
                            std::ostringstream text;
                            log.write(text);
                            write_file(fmt::format("{}/episode_rho{:.1f}_seed{}.jsonl", a.log_dir,
                                                   spec.density, spec.seed),
                                       text.str());
                            outcomes[k] = log.outcome;
                          }
                        }
                      });
  });
  EvalReport report = aggregate(std::move(outcomes));
  report.digest = cfg.digest();
  report.mode = a.controller == "constant" ? fmt::format("constant:{}", a.constant_speed)
                                           : std::string(to_string(cfg.eval.mode));
  write_file(a.out, report.to_json().dump(2) + "\n");
  if (!a.table.empty()) write_file(a.table, report.table());
  std::cout << report.table();
  return 0;
}

struct ReplayArgs {
  std::string log;
  std::string checkpoint;
  std::string svg;
};

int cmd_replay(const ReplayArgs& a) {
  std::ifstream in(a.log);
  if (!in) throw ConfigError("cannot open episode log '" + a.log + "'");
  const EpisodeLog log = EpisodeLog::read(in);
  const EpisodeSpec spec = spec_from_header(log.header);
  std::optional<Checkpoint> ck;
  if (spec.controller == "policy") {
    const std::string path = a.checkpoint.empty() ? spec.checkpoint : a.checkpoint;
    if (path.empty()) throw ConfigError("policy episode replay needs --checkpoint");
    ck = load_checkpoint(path);
    if (ck->digest != log.header.at("digest").get<std::string>()) {
      throw DigestMismatch("checkpoint digest does not match the episode log");
    }
  }
  const ReplayResult r = replay_episode(log, ck ? &ck->state.params : nullptr);
  if (!a.svg.empty()) write_file(a.svg, svg_episode_strip(log));
  if (!r.match) {
    std::cout << fmt::format("DIVERGED at step {}: {}\n", r.first_divergent_step, r.detail);
    return kExitDivergence;
  }
  std::cout << fmt::format("replay matches: {} steps, outcome {}\n", r.steps_compared,
                           to_string(log.outcome.kind));
  return 0;
}

struct PlotArgs {
  std::string report;
  std::string metrics;
  std::string out_dir = "plots";
};

int cmd_plot(const PlotArgs& a) {
  if (a.report.empty() && a.metrics.empty()) {
    throw ConfigError("plot needs --report and/or --metrics");
  }
  if (!a.report.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(a.report));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("malformed report: ") + e.what());
    }
    const EvalReport report = EvalReport::from_json(j);
    write_file(a.out_dir + "/success.svg", svg_success_plot(report));
    write_file(a.out_dir + "/time.svg", svg_time_plot(report));
  }
  if (!a.metrics.empty()) {
    std::ifstream in(a.metrics);
    if (!in) throw ConfigError("cannot open metrics file '" + a.metrics + "'");
    write_file(a.out_dir + "/training.svg", svg_training_curves(MetricsTable::read(in)));
  }
  std::cout << "plots written to " << a.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contact-tolerant crowd navigation: train, evaluate, replay and plot"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train the local planner with PPO");
  t->add_option("--config", train.config, "INI config file (defaults when omitted)");
  t->add_option("--set", train.overrides, "Override, section.key=value (repeatable)");
  t->add_option("--out", train.out, "Output directory")->capture_default_str();
  t->add_option("--resume", train.resume, "Checkpoint to resume from");
  t->add_option("--workers", train.workers, "Rollout worker threads")->capture_default_str();

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint over a density sweep");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  e->add_option("--config", eval.config, "Config file (defaults to the checkpoint's own)");
  e->add_option("--set", eval.overrides, "Override, section.key=value (repeatable)");
  e->add_option("--out", eval.out, "Report JSON path")->capture_default_str();
  e->add_option("--table", eval.table, "Also write the text table here");
  e->add_option("--log-dir", eval.log_dir, "Write one replayable JSON-lines log per episode");
  e->add_option("--controller", eval.controller, "policy | constant")
      ->check(CLI::IsMember({"policy", "constant"}))
      ->capture_default_str();
  e->add_option("--speed", eval.constant_speed, "Speed of the constant controller")
      ->capture_default_str();
  e->add_option("--workers", eval.workers, "Episode worker threads")->capture_default_str();

  ReplayArgs replay;
  auto* r = app.add_subcommand("replay", "Re-simulate a logged episode and check it matches");
  r->add_option("log", replay.log, "Episode log (JSON lines)")->required();
  r->add_option("--checkpoint", replay.checkpoint, "Checkpoint (defaults to the logged path)");
  r->add_option("--svg", replay.svg, "Write a frame strip SVG here");

  PlotArgs plot;
  auto* p = app.add_subcommand("plot", "Render SVG plots from a report and/or metrics");
  p->add_option("--report", plot.report, "Evaluation report JSON");
  p->add_option("--metrics", plot.metrics, "Training metrics CSV");
  p->add_option("--out-dir", plot.out_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : kExitUsage;
  }

  try {
    if (t->parsed()) return cmd_train(train);
    if (e->parsed()) return cmd_eval(eval);
    if (r->parsed()) return cmd_replay(replay);
    if (p->parsed()) return cmd_plot(plot);
  } catch (const DigestMismatch& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitDigest;
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
