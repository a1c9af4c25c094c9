#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "crowdnav/config.hpp"
#include "crowdnav/evaluation.hpp"

namespace crowdnav {

// What drove a logged episode.
struct EpisodeSpec {
  std::uint64_t seed = 0;
  double density = 1.0;
  // "policy" (needs parameters) or "constant" (scripted straight-line baseline).
  std::string controller = "policy";
  PolicyMode mode = PolicyMode::kMeanAction;
  double constant_speed = 1.0;
  std::string checkpoint;  // informational; replay may substitute another path
};

// A JSON-lines episode log: one header object, then one object per control step.
struct EpisodeLog {
  nlohmann::json header;
  std::vector<nlohmann::json> steps;
  EpisodeOutcome outcome;

  void write(std::ostream& out) const;
  // Throws ConfigError on an empty or malformed log.
  static EpisodeLog read(std::istream& in);
};

EpisodeLog record_episode(const RunConfig& config, const EpisodeSpec& spec,
                          const PolicyParams* params);

struct ReplayResult {
  bool match = true;
  int steps_compared = 0;
  int first_divergent_step = -1;  // 1-based control step, -1 when identical
  std::string detail;
};

// Re-simulates the logged episode and compares every step record exactly.
ReplayResult replay_episode(const EpisodeLog& log, const PolicyParams* params);

// Reads the episode spec back out of a log header.
EpisodeSpec spec_from_header(const nlohmann::json& header);

}  // namespace crowdnav
