#include "crowdnav/metrics.hpp"

#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

#include "crowdnav/errors.hpp"

namespace crowdnav {

std::vector<std::string> metrics_columns() {
  return {"update",        "total_steps",   "policy_loss",   "value_loss",     "entropy",
          "aux_loss",      "total_loss",    "approx_kl",     "clip_fraction",  "grad_norm",
          "mean_reward",   "episodes",      "success_rate",  "violation_rate", "mean_force_ratio",
          "faults"};
}

std::string metrics_preamble(const std::string& digest) {
  std::string out = fmt::format("# crowdnav-metrics version=1 digest={}\n", digest);
  const auto cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i > 0 ? "," : "") + cols[i];
  return out + "\n";
}

std::string metrics_row(const UpdateRecord& r) {
  const PPOLoss& l = r.stats.loss;
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.update, r.total_steps,
                     l.policy, l.value, l.entropy, l.aux, l.total, l.approx_kl, l.clip_fraction,
                     r.stats.grad_norm, r.mean_reward, r.episodes, r.success_rate,
                     r.violation_rate, r.mean_max_force_ratio, r.faults);
}

int MetricsTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("metrics table has no column '" + name + "'");
}

MetricsTable MetricsTable::read(std::istream& in) {
  MetricsTable t;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# crowdnav-metrics", 0) != 0) {
    throw ConfigError("metrics file must start with a '# crowdnav-metrics' line");
  }
  const auto pos = line.find("digest=");
  if (pos != std::string::npos) t.digest = line.substr(pos + 7);
  if (!std::getline(in, line) || line.empty()) throw ConfigError("metrics file has no column row");
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) t.columns.push_back(c);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("metrics file has a non-numeric cell '" + cell + "'");
      }
    }
    if (row.size() != t.columns.size()) throw ConfigError("metrics row has the wrong width");
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string episode_summary_line(const EpisodeSummary& ep, std::int64_t update) {
  const nlohmann::json j = {{"update", update},
                            {"env", ep.env},
                            {"seed", ep.seed},
                            {"steps", ep.steps},
                            {"termination", ep.fault ? "fault" : to_string(ep.termination)},
                            {"return", ep.reward.total()},
                            {"reward_progress", ep.reward.progress},
                            {"reward_force", ep.reward.force},
                            {"reward_action_rate", ep.reward.action_rate},
                            {"reward_terminal", ep.reward.terminal},
                            {"max_force_ratio", ep.max_force_ratio},
                            {"progress", ep.progress}};
  return j.dump() + "\n";
}

}  // namespace crowdnav
