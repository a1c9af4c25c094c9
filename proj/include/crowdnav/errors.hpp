#pragma once

#include <stdexcept>
#include <string>

namespace crowdnav {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SpawnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite state after integration. Aborts the episode as a framework fault.
class SimulationDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Checkpoint or log was produced under a different observation/action layout.
class DigestMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crowdnav
