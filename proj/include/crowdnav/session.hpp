#pragma once

#include <functional>
#include <optional>
#include <string>

#include "crowdnav/checkpoint.hpp"
#include "crowdnav/config.hpp"

namespace crowdnav {

// Files written by a training run inside its output directory.
struct RunPaths {
  std::string dir;
  std::string metrics() const { return dir + "/metrics.csv"; }
  std::string episodes() const { return dir + "/episodes.jsonl"; }
  std::string checkpoint() const { return dir + "/checkpoint.ckpt"; }
  std::string config() const { return dir + "/config.cfg"; }
  std::string abort_dump() const { return dir + "/abort_state.ckpt"; }
};

struct TrainOptions {
  int workers = 1;
  std::optional<std::string> resume;  // checkpoint to continue from
  // Called after every update (progress reporting); may be empty.
  std::function<void(const UpdateRecord&)> on_update;
};

// Runs (or resumes) training until config.total_steps, streaming metrics and episode
// summaries and checkpointing every config.output.checkpoint_every updates and at the
// end. Returns the final trainer state. On a TrainingAborted error the state at the time
// of failure is dumped next to the (untouched) last checkpoint and the error rethrown.
TrainerState run_training(const RunConfig& config, const RunPaths& paths,
                          const TrainOptions& options);

}  // namespace crowdnav
