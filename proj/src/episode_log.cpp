#include "crowdnav/episode_log.hpp"

#include "crowdnav/errors.hpp"

namespace crowdnav {

namespace {

nlohmann::json step_record(const NavEnv& env, const StepResult& r) {
  const BodyState& robot = env.robot();
  nlohmann::json peds = nlohmann::json::array();
  for (const Pedestrian& p : env.pedestrians()) {
    peds.push_back({p.body.position.x, p.body.position.y});
  }
  nlohmann::json contacts = nlohmann::json::array();
  for (const Contact& c : r.period.contacts) {
    contacts.push_back({{"a", c.body_a}, {"b", c.body_b}, {"wall", c.wall}, {"force", c.force}});
  }
  const double dt = env.config().dynamics.timing.control_dt;
  return {{"step", env.steps()},
          {"t", env.steps() * dt},
          {"robot",
           {{"x", robot.position.x},
            {"y", robot.position.y},
            {"vx", robot.velocity.x},
            {"vy", robot.velocity.y},
            {"camera", robot.camera_heading}}},
          {"action", {r.action.speed, r.action.motion_heading, r.action.camera_heading}},
          {"reward",
           {{"progress", r.reward.progress},
            {"force", r.reward.force},
            {"action_rate", r.reward.action_rate},
            {"terminal", r.reward.terminal}}},
          {"max_force", r.period.max_force},
          {"contacts", contacts},
          {"pedestrians", peds},
          {"termination", to_string(r.termination)}};
}

nlohmann::json outcome_json(const EpisodeOutcome& o) {
  return {{"kind", to_string(o.kind)}, {"time_to_completion", o.time_to_completion},
          {"max_force", o.max_force},  {"density", o.density},
          {"seed", o.seed},            {"steps", o.steps}};
}

EpisodeOutcome outcome_from_json(const nlohmann::json& j) {
  EpisodeOutcome o;
  o.kind = outcome_kind_from_string(j.at("kind").get<std::string>());
  o.time_to_completion = j.at("time_to_completion").get<double>();
  o.max_force = j.at("max_force").get<double>();
  o.density = j.at("density").get<double>();
  o.seed = j.at("seed").get<std::uint64_t>();
  o.steps = j.at("steps").get<int>();
  return o;
}

// Names the first differing leaf, or returns an empty string when equal.
std::string first_difference(const nlohmann::json& a, const nlohmann::json& b,
                             const std::string& path) {
  // Parsed integers come back unsigned while freshly built ones are signed; compare values.
  if (a.is_number() && b.is_number()) return a == b ? "" : path;
  if (a.type() != b.type()) return path;
  if (a.is_object()) {
    for (const auto& [k, v] : a.items()) {
      if (!b.contains(k)) return path + "/" + k;
      std::string d = first_difference(v, b.at(k), path + "/" + k);
      if (!d.empty()) return d;
    }
    return a.size() == b.size() ? "" : path;
  }
  if (a.is_array()) {
    if (a.size() != b.size()) return path;
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::string d = first_difference(a[i], b[i], path + "/" + std::to_string(i));
      if (!d.empty()) return d;
    }
    return "";
  }
  return a == b ? "" : path;
}

Controller make_controller(const EpisodeSpec& spec, const PolicyParams* params) {
  if (spec.controller == "constant") return constant_velocity_controller(spec.constant_speed);
  if (spec.controller == "policy") {
    if (params == nullptr) throw ConfigError("policy episode needs policy parameters");
    return policy_controller(*params, spec.mode, spec.seed);
  }
  throw ConfigError("unknown controller '" + spec.controller + "'");
}

}  // namespace

void EpisodeLog::write(std::ostream& out) const {
  out << header.dump() << '\n';
  for (const nlohmann::json& s : steps) out << s.dump() << '\n';
}

EpisodeLog EpisodeLog::read(std::istream& in) {
  EpisodeLog log;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("malformed episode log line: ") + e.what());
    }
    if (!have_header) {
      if (j.value("format", "") != "crowdnav-episode-log") {
        throw ConfigError("episode log must start with a header line");
      }
      log.header = std::move(j);
      have_header = true;
    } else {
      log.steps.push_back(std::move(j));
    }
  }
  if (!have_header) throw ConfigError("empty episode log");
  if (log.steps.empty()) throw ConfigError("episode log has no steps");
  if (!log.steps.back().contains("outcome")) throw ConfigError("episode log is truncated");
  log.outcome = outcome_from_json(log.steps.back().at("outcome"));
  return log;
}

EpisodeSpec spec_from_header(const nlohmann::json& header) {
  EpisodeSpec s;
  s.seed = header.at("seed").get<std::uint64_t>();
  s.density = header.at("density").get<double>();
  s.controller = header.at("controller").get<std::string>();
  s.mode = policy_mode_from_string(header.at("mode").get<std::string>());
  s.constant_speed = header.at("constant_speed").get<double>();
  s.checkpoint = header.value("checkpoint", "");
  return s;
}

EpisodeLog record_episode(const RunConfig& config, const EpisodeSpec& spec,
                          const PolicyParams* params) {
  EnvConfig env = config.env;
  env.crowd.density = spec.density;
  EpisodeLog log;
  log.header = {{"format", "crowdnav-episode-log"},
                {"version", 1},
                {"digest", config.digest()},
                {"config", config.to_json()},
                {"seed", spec.seed},
                {"density", spec.density},
                {"controller", spec.controller},
                {"mode", to_string(spec.mode)},
                {"constant_speed", spec.constant_speed},
                {"checkpoint", spec.checkpoint}};
  log.outcome = run_episode(env, spec.seed, make_controller(spec, params), {},
                            [&log](const NavEnv& e, const StepResult& r) {
                              log.steps.push_back(step_record(e, r));
                            });
  log.steps.back()["outcome"] = outcome_json(log.outcome);
  return log;
}

ReplayResult replay_episode(const EpisodeLog& log, const PolicyParams* params) {
  const RunConfig config = RunConfig::from_json(log.header.at("config"));
  if (log.header.at("digest").get<std::string>() != config.digest()) {
    throw DigestMismatch("episode log digest does not match its embedded config");
  }
  const EpisodeLog fresh = record_episode(config, spec_from_header(log.header), params);

  ReplayResult res;
  const std::size_t n = std::max(log.steps.size(), fresh.steps.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= log.steps.size() || i >= fresh.steps.size()) {
      res.match = false;
      res.first_divergent_step = static_cast<int>(i + 1);
      res.detail = i >= log.steps.size() ? "replay runs longer than the log"
                                         : "replay ends before the log";
      return res;
    }
    const std::string diff = first_difference(log.steps[i], fresh.steps[i], "");
    ++res.steps_compared;
    if (!diff.empty()) {
      res.match = false;
      res.first_divergent_step = static_cast<int>(i + 1);
      res.detail = "field " + diff + " differs";
      return res;
    }
  }
  return res;
}

}  // namespace crowdnav
