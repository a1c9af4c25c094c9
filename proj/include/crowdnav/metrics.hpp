#pragma once

#include <istream>
#include <string>
#include <vector>

#include "crowdnav/training.hpp"

namespace crowdnav {

// Metrics CSV: a "# crowdnav-metrics version=1 digest=<hex>" line, a column row, then
// one row per PPO update. Values are printed with round-trip precision and contain no
// wall-clock data, so identical runs produce byte-identical files.
std::string metrics_preamble(const std::string& digest);
std::string metrics_row(const UpdateRecord& rec);
std::vector<std::string> metrics_columns();

struct MetricsTable {
  std::string digest;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  // Index of a named column; throws ConfigError when absent.
  int column(const std::string& name) const;
  static MetricsTable read(std::istream& in);
};

// JSON-lines summary of one finished training episode.
std::string episode_summary_line(const EpisodeSummary& ep, std::int64_t update);

}  // namespace crowdnav
