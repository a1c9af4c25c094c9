#pragma once

#include <string>

#include "crowdnav/episode_log.hpp"
#include "crowdnav/evaluation.hpp"
#include "crowdnav/metrics.hpp"

namespace crowdnav {

// All plots are self-contained SVG documents with fixed number formatting, so the same
// input always yields byte-identical output.

// One bar per density bucket.
std::string svg_success_plot(const EvalReport& report);
// Mean time-to-completion per bucket with sample-sigma whiskers.
std::string svg_time_plot(const EvalReport& report);
// Success rate and mean reward against environment steps.
std::string svg_training_curves(const MetricsTable& metrics);
// Top-down frames of a logged episode (every `stride` steps).
std::string svg_episode_strip(const EpisodeLog& log, int stride = 20);

}  // namespace crowdnav
