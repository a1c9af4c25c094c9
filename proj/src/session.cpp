#include "crowdnav/session.hpp"

#include <filesystem>
#include <fstream>

#include "crowdnav/errors.hpp"
#include "crowdnav/metrics.hpp"

namespace crowdnav {

namespace {

// Keeps the metrics file consistent with the checkpoint being resumed: rows beyond the
// checkpoint's update count (written after the last checkpoint) are dropped.
void truncate_metrics(const std::string& path, const std::string& digest, std::int64_t update) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot resume: metrics file '" + path + "' is missing");
  std::string preamble, columns, line, kept;
  std::getline(in, preamble);
  std::getline(in, columns);
  if (preamble + "\n" + columns + "\n" != metrics_preamble(digest)) {
    throw DigestMismatch("cannot resume: metrics file was written under a different config");
  }
  kept = preamble + "\n" + columns + "\n";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::int64_t row_update = std::stoll(line.substr(0, line.find(',')));
    if (row_update <= update) kept += line + "\n";
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  out << kept;
}

}  // namespace

TrainerState run_training(const RunConfig& config, const RunPaths& paths,
                          const TrainOptions& options) {
  config.validate();
  std::filesystem::create_directories(paths.dir);
  const std::string digest = config.digest();

  std::optional<Trainer> trainer;
  if (options.resume) {
    Checkpoint ck = load_checkpoint(*options.resume);
    require_compatible(ck, config);
    truncate_metrics(paths.metrics(), digest, ck.state.update);
    trainer.emplace(config.train_config(options.workers), std::move(ck.state));
  } else {
    trainer.emplace(config.train_config(options.workers));
    std::ofstream(paths.metrics(), std::ios::trunc) << metrics_preamble(digest);
    if (config.output.log_episodes) {
      std::ofstream(paths.episodes(), std::ios::trunc)
          << "{\"format\":\"crowdnav-training-episodes\",\"version\":1,\"digest\":\"" << digest
          << "\"}\n";
    }
  }
  {
    std::ofstream cfg(paths.config(), std::ios::trunc);
    cfg << config.to_ini();
  }

  std::ofstream metrics(paths.metrics(), std::ios::app);
  std::ofstream episodes;
  if (config.output.log_episodes) episodes.open(paths.episodes(), std::ios::app);

  while (!trainer->finished()) {
    UpdateRecord rec;
    try {
      rec = trainer->iterate();
    } catch (const TrainingAborted&) {
      save_checkpoint(paths.abort_dump(), config, trainer->state());
      throw;
    }
    metrics << metrics_row(rec);
    metrics.flush();
    if (episodes.is_open()) {
      for (const EpisodeSummary& ep : trainer->last_episodes()) {
        episodes << episode_summary_line(ep, rec.update);
      }
      episodes.flush();
    }
    if (options.on_update) options.on_update(rec);
    if (rec.update % config.output.checkpoint_every == 0 || trainer->finished()) {
      save_checkpoint(paths.checkpoint(), config, trainer->state());
    }
  }
  return trainer->state();
}

}  // namespace crowdnav
