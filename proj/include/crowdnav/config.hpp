#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "crowdnav/env.hpp"
#include "crowdnav/evaluation.hpp"
#include "crowdnav/policy.hpp"
#include "crowdnav/training.hpp"

namespace crowdnav {

inline constexpr const char* kConfigVersion = "1";

struct EvalConfig {
  SweepSpec sweep;
  PolicyMode mode = PolicyMode::kMeanAction;
};

struct OutputConfig {
  int checkpoint_every = 10;  // updates
  bool log_episodes = true;
};

// Every tunable constant of a run, addressable as "section.key".
struct RunConfig {
  std::string version = kConfigVersion;
  std::uint64_t seed = 1;
  EnvConfig env;
  PolicyArch arch;
  PolicyInit init;
  PPOConfig ppo;
  std::int64_t total_steps = 3'000'000;
  EvalConfig eval;
  OutputConfig output;

  // Parses INI text; later overrides ("section.key=value") win. Unknown keys throw.
  static RunConfig parse(const std::string& ini_text, const std::vector<std::string>& overrides = {});
  static RunConfig load(const std::string& path, const std::vector<std::string>& overrides = {});

  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& assignment);  // "section.key=value"
  std::string get(const std::string& key) const;
  static std::vector<std::string> keys();

  std::string to_ini() const;
  nlohmann::json to_json() const;  // flat {"section.key": "value"} map plus version
  static RunConfig from_json(const nlohmann::json& j);

  // SHA-256 over the keys that fix the observation/action interface and network shape.
  std::string digest() const;

  void validate() const;
  TrainConfig train_config(int workers) const;
};

}  // namespace crowdnav
