#include "crowdnav/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "crowdnav/errors.hpp"

namespace crowdnav {

namespace {

std::string format_double(double v) { return fmt::format("{}", v); }

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError("'" + key + "': not a number: '" + s + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& s) {
  Int v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError("'" + key + "': not an integer: '" + s + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("'" + key + "': not a boolean: '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::string key;
  bool in_digest = false;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define CN_DOUBLE(KEY, EXPR, DIGEST)                                                          \
  Field {                                                                                     \
    KEY, DIGEST, [](const RunConfig& c) { return format_double(c.EXPR); },                   \
        [](RunConfig& c, const std::string& v) { c.EXPR = parse_double(KEY, v); }            \
  }
#define CN_INT(KEY, EXPR, DIGEST)                                                             \
  Field {                                                                                     \
    KEY, DIGEST, [](const RunConfig& c) { return std::to_string(c.EXPR); },                  \
        [](RunConfig& c, const std::string& v) {                                              \
          c.EXPR = parse_int<std::remove_reference_t<decltype(c.EXPR)>>(KEY, v);              \
        }                                                                                     \
  }
#define CN_BOOL(KEY, EXPR, DIGEST)                                                            \
  Field {                                                                                     \
    KEY, DIGEST, [](const RunConfig& c) { return std::string(c.EXPR ? "true" : "false"); },  \
        [](RunConfig& c, const std::string& v) { c.EXPR = parse_bool(KEY, v); }              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"run.version", true, [](const RunConfig& c) { return c.version; },
            [](RunConfig& c, const std::string& v) {
              if (v != kConfigVersion) throw ConfigError("unsupported config version '" + v + "'");
              c.version = v;
            }},
      CN_INT("run.seed", seed, false),

      CN_DOUBLE("world.width_min", env.world.width_min, false),
      CN_DOUBLE("world.width_max", env.world.width_max, false),
      CN_DOUBLE("world.length_min", env.world.length_min, false),
      CN_DOUBLE("world.length_max", env.world.length_max, false),
      CN_DOUBLE("world.inset_rate", env.world.inset_rate, false),
      CN_DOUBLE("world.inset_depth_max", env.world.inset_depth_max, false),
      CN_DOUBLE("world.inset_length_min", env.world.inset_length_min, false),
      CN_DOUBLE("world.inset_length_max", env.world.inset_length_max, false),
      CN_DOUBLE("world.start_offset", env.world.start_offset, false),
      CN_DOUBLE("world.goal_distance", env.world.goal_distance, false),
      CN_DOUBLE("world.heading_jitter", env.world.heading_jitter, false),
      CN_DOUBLE("world.grid_resolution", env.world.grid_resolution, false),

      CN_DOUBLE("crowd.density", env.crowd.density, false),
      CN_DOUBLE("crowd.walker_fraction", env.crowd.walker_fraction, false),
      CN_DOUBLE("crowd.repulsion_strength", env.crowd.repulsion_strength, false),
      CN_DOUBLE("crowd.repulsion_range", env.crowd.repulsion_range, false),
      CN_DOUBLE("crowd.relaxation", env.crowd.relaxation, false),
      CN_DOUBLE("crowd.walker_speed_min", env.crowd.walker_speed_min, false),
      CN_DOUBLE("crowd.walker_speed_max", env.crowd.walker_speed_max, false),
      CN_DOUBLE("crowd.speed_cap_factor", env.crowd.speed_cap_factor, false),
      CN_DOUBLE("crowd.stander_speed_cap", env.crowd.stander_speed_cap, false),
      CN_BOOL("crowd.react_to_robot", env.crowd.react_to_robot, false),
      CN_DOUBLE("crowd.robot_repulsion_scale", env.crowd.robot_repulsion_scale, false),
      CN_INT("crowd.max_spawn_attempts", env.crowd.max_spawn_attempts, false),
      CN_DOUBLE("crowd.interaction_cutoff", env.crowd.interaction_cutoff, false),
      CN_DOUBLE("crowd.end_margin", env.crowd.end_margin, false),
      CN_INT("crowd.spawn_retries", env.spawn_retries, false),

      CN_DOUBLE("dynamics.control_dt", env.dynamics.timing.control_dt, true),
      CN_DOUBLE("dynamics.physics_dt", env.dynamics.timing.physics_dt, false),
      CN_INT("dynamics.substeps", env.dynamics.timing.substeps, false),
      CN_DOUBLE("dynamics.robot_radius", env.dynamics.robot_radius, false),
      CN_DOUBLE("dynamics.robot_mass", env.dynamics.robot_mass, false),
      CN_DOUBLE("dynamics.robot_max_speed", env.dynamics.robot_max_speed, true),
      CN_DOUBLE("dynamics.robot_max_accel", env.dynamics.robot_max_accel, false),
      CN_DOUBLE("dynamics.camera_max_rate", env.dynamics.camera_max_rate, false),
      CN_DOUBLE("dynamics.camera_inertia", env.dynamics.camera_inertia, false),
      CN_DOUBLE("dynamics.ped_radius", env.dynamics.ped_radius, false),
      CN_DOUBLE("dynamics.ped_mass", env.dynamics.ped_mass, false),
      CN_DOUBLE("dynamics.ped_stiffness", env.dynamics.ped_stiffness, false),
      CN_DOUBLE("dynamics.ped_damping", env.dynamics.ped_damping, false),
      CN_DOUBLE("dynamics.wall_stiffness", env.dynamics.wall_stiffness, false),
      CN_DOUBLE("dynamics.wall_damping", env.dynamics.wall_damping, false),
      CN_DOUBLE("dynamics.wall_slop", env.dynamics.wall_slop, false),
      CN_DOUBLE("dynamics.force_limit", env.dynamics.force_limit, true),

      Field{"sensing.rays", true, [](const RunConfig& c) { return std::to_string(c.env.sensing.rays); },
            [](RunConfig& c, const std::string& v) {
              c.env.sensing.rays = c.arch.rays = parse_int<int>("sensing.rays", v);
            }},
      CN_DOUBLE("sensing.fov", env.sensing.fov, true),
      CN_DOUBLE("sensing.min_range", env.sensing.min_range, true),
      CN_DOUBLE("sensing.max_range", env.sensing.max_range, true),
      Field{"sensing.history", true,
            [](const RunConfig& c) { return std::to_string(c.env.sensing.history); },
            [](RunConfig& c, const std::string& v) {
              c.env.sensing.history = c.arch.history = parse_int<int>("sensing.history", v);
            }},
      CN_BOOL("sensing.blind_zone", env.sensing.blind_zone, false),
      CN_DOUBLE("sensing.noise_std", env.sensing.noise_std, false),
      CN_DOUBLE("sensing.waypoint_lookahead", env.sensing.waypoint_lookahead, true),

      CN_DOUBLE("control.kp_v", env.gains.kp_velocity, false),
      CN_DOUBLE("control.kd_v", env.gains.kd_velocity, false),
      CN_DOUBLE("control.kp_cam", env.gains.kp_camera, false),
      CN_DOUBLE("control.kd_cam", env.gains.kd_camera, false),

      CN_INT("policy.conv1_channels", arch.conv1_channels, true),
      CN_INT("policy.conv1_kernel", arch.conv1_kernel, true),
      CN_INT("policy.conv1_stride", arch.conv1_stride, true),
      CN_INT("policy.conv2_channels", arch.conv2_channels, true),
      CN_INT("policy.conv2_kernel", arch.conv2_kernel, true),
      CN_INT("policy.conv2_stride", arch.conv2_stride, true),
      CN_INT("policy.feature_dim", arch.feature_dim, true),
      CN_INT("policy.hidden1", arch.hidden1, true),
      CN_INT("policy.hidden2", arch.hidden2, true),
      CN_DOUBLE("policy.log_std_min", arch.log_std_min, true),
      CN_DOUBLE("policy.log_std_max", arch.log_std_max, true),
      CN_DOUBLE("policy.log_std_init", init.log_std, false),
      CN_DOUBLE("policy.mean_head_gain", init.mean_head_gain, false),

      CN_DOUBLE("reward.progress", env.reward.progress, false),
      CN_DOUBLE("reward.force", env.reward.force, false),
      CN_DOUBLE("reward.success", env.reward.success, false),
      CN_DOUBLE("reward.failure", env.reward.failure, false),
      CN_DOUBLE("reward.action_rate", env.reward.action_rate, false),
      CN_DOUBLE("reward.goal_radius", env.termination.goal_radius, false),
      CN_INT("reward.max_steps", env.termination.max_steps, false),

      CN_DOUBLE("training.gamma", ppo.gamma, false),
      CN_DOUBLE("training.lambda", ppo.lambda, false),
      CN_DOUBLE("training.clip", ppo.clip, false),
      CN_INT("training.epochs", ppo.epochs, false),
      CN_INT("training.minibatch", ppo.minibatch, false),
      CN_DOUBLE("training.learning_rate", ppo.learning_rate, false),
      CN_DOUBLE("training.value_coef", ppo.value_coef, false),
      CN_DOUBLE("training.entropy_coef", ppo.entropy_coef, false),
      CN_DOUBLE("training.aux_coef", ppo.aux_coef, false),
      CN_DOUBLE("training.max_grad_norm", ppo.max_grad_norm, false),
      CN_INT("training.num_envs", ppo.num_envs, false),
      CN_INT("training.horizon", ppo.horizon, false),
      CN_DOUBLE("training.adam_beta1", ppo.adam_beta1, false),
      CN_DOUBLE("training.adam_beta2", ppo.adam_beta2, false),
      CN_DOUBLE("training.adam_eps", ppo.adam_eps, false),
      CN_INT("training.total_steps", total_steps, false),
      CN_INT("training.checkpoint_every", output.checkpoint_every, false),
      CN_BOOL("training.log_episodes", output.log_episodes, false),

      Field{"evaluation.densities", false,
            [](const RunConfig& c) {
              std::string s;
              for (std::size_t i = 0; i < c.eval.sweep.densities.size(); ++i) {
                if (i > 0) s += ",";
                s += format_double(c.eval.sweep.densities[i]);
              }
              return s;
            },
            [](RunConfig& c, const std::string& v) {
              std::vector<double> out;
              std::stringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ',')) {
                out.push_back(parse_double("evaluation.densities", trim(item)));
              }
              c.eval.sweep.densities = out;
            }},
      CN_INT("evaluation.trials_per_density", eval.sweep.trials_per_density, false),
      CN_INT("evaluation.base_seed", eval.sweep.base_seed, false),
      Field{"evaluation.mode", false,
            [](const RunConfig& c) { return std::string(to_string(c.eval.mode)); },
            [](RunConfig& c, const std::string& v) { c.eval.mode = policy_mode_from_string(v); }},
  };
  return table;
}

#undef CN_DOUBLE
#undef CN_INT
#undef CN_BOOL

const Field& find_field(const std::string& key) {
  static const std::map<std::string, const Field*> index = [] {
    std::map<std::string, const Field*> m;
    for (const Field& f : fields()) m.emplace(f.key, &f);
    return m;
  }();
  auto it = index.find(key);
  if (it == index.end()) throw ConfigError("unknown config key '" + key + "'");
  return *it->second;
}

std::string sha256_hex(const std::string& text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  find_field(key).set(*this, trim(value));
}

std::string RunConfig::get(const std::string& key) const { return find_field(key).get(*this); }

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must look like section.key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.key);
  return out;
}

RunConfig RunConfig::parse(const std::string& ini_text, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  boost::property_tree::ptree tree;
  std::istringstream in(ini_text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config key '" + section + "' must live inside a [section]");
    }
    for (const auto& [key, value] : body) cfg.set(section + "." + key, value.data());
  }
  for (const std::string& o : overrides) cfg.apply_override(o);
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), overrides);
}

std::string RunConfig::to_ini() const {
  std::string out;
  std::string section;
  for (const Field& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out += "\n";
      out += "[" + s + "]\n";
      section = s;
    }
    out += f.key.substr(dot + 1) + " = " + f.get(*this) + "\n";
  }
  return out;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const Field& f : fields()) j[f.key] = f.get(*this);
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  for (const auto& [key, value] : j.items()) cfg.set(key, value.get<std::string>());
  cfg.validate();
  return cfg;
}

std::string RunConfig::digest() const {
  std::string text = fmt::format("observation_layout={}\n", kObservationLayoutVersion);
  for (const Field& f : fields()) {
    if (f.in_digest) text += f.key + "=" + f.get(*this) + "\n";
  }
  return sha256_hex(text);
}

void RunConfig::validate() const {
  env.validate();
  arch.validate();
  ppo.validate();
  eval.sweep.validate();
  if (total_steps < 1) throw ConfigError("training.total_steps must be positive");
  if (output.checkpoint_every < 1) throw ConfigError("training.checkpoint_every must be positive");
  if (arch.history != env.sensing.history || arch.rays != env.sensing.rays) {
    throw ConfigError("policy input shape must match the sensing layout");
  }
}

TrainConfig RunConfig::train_config(int workers) const {
  TrainConfig t;
  t.ppo = ppo;
  t.env = env;
  t.arch = arch;
  t.init = init;
  t.total_steps = total_steps;
  t.seed = seed;
  t.workers = workers;
  return t;
}

}  // namespace crowdnav
