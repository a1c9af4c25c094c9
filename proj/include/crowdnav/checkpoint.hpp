#pragma once

#include <string>

#include "crowdnav/config.hpp"
#include "crowdnav/training.hpp"

namespace crowdnav {

// Checkpoint container (all integers and floats little-endian):
//   8 bytes   magic "CNAVCKPT"
//   u32       container version (1)
//   u32       header length N
//   N bytes   JSON header: architecture, config digest, full config, training counters
//   f64 x P   policy parameters in ParamLayout order
//   f64 x 2P  Adam first and second moments (present when header.has_optimizer)
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  TrainerState state;
  std::string digest;
};

// Writes to a temporary file and renames it over the target, so an interrupted write
// never corrupts the previous checkpoint.
void save_checkpoint(const std::string& path, const RunConfig& config, const TrainerState& state);
Checkpoint load_checkpoint(const std::string& path);

// Throws DigestMismatch when the checkpoint's interface digest differs from config's.
void require_compatible(const Checkpoint& ckpt, const RunConfig& config);

}  // namespace crowdnav
