#pragma once

#include <deque>
#include <random>
#include <span>
#include <vector>

#include "crowdnav/control.hpp"
#include "crowdnav/dynamics.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

struct SensingParams {
  int rays = 64;
  double fov = 1.518;  // 87 degrees
  double min_range = 0.25;
  double max_range = 5.0;
  int history = 4;
  bool blind_zone = true;
  // Gaussian range noise (m); off by default.
  double noise_std = 0.0;
  // Waypoints closer than this (arc length) are skipped when picking the active one.
  double waypoint_lookahead = 0.3;

  void validate() const;
  double ray_bearing(int i, double camera_heading) const;
};

// Planar depth scan centred on the camera heading. Ranges are measured from the robot
// surface along each ray and normalized by max_range; misses, returns beyond max_range
// and returns inside the blind zone all read 1.0.
struct DepthScan {
  std::vector<double> ranges;
  double heading = 0.0;
};

DepthScan raycast_scan(std::span<const Segment> walls, std::span<const BodyState> pedestrians,
                       const BodyState& robot, const SensingParams& params,
                       std::mt19937_64* noise_rng = nullptr);

class ScanHistory {
 public:
  explicit ScanHistory(int capacity) : capacity_(capacity) {}

  // Fills the whole history with copies of the first scan.
  void reset(const DepthScan& first);
  void push(DepthScan scan);
  const std::deque<DepthScan>& scans() const { return scans_; }  // oldest first
  int capacity() const { return capacity_; }

 private:
  int capacity_;
  std::deque<DepthScan> scans_;
};

// Layout of the low-dimensional part of the observation.
namespace obs_index {
inline constexpr int kVelX = 0;
inline constexpr int kVelY = 1;
inline constexpr int kCamSin = 2;
inline constexpr int kCamCos = 3;
inline constexpr int kHeadingErrSin = 4;
inline constexpr int kHeadingErrCos = 5;
inline constexpr int kWaypointDist = 6;
inline constexpr int kRemaining = 7;
inline constexpr int kPrevSpeed = 8;
inline constexpr int kPrevMotion = 9;
inline constexpr int kPrevCamera = 10;
inline constexpr int kForceRatio = 11;
inline constexpr int kContactSin = 12;
inline constexpr int kContactCos = 13;
inline constexpr int kStateSize = 14;
}  // namespace obs_index

inline constexpr int kObservationLayoutVersion = 1;

struct Observation {
  // history x rays, oldest scan first.
  std::vector<double> scans;
  std::vector<double> state;  // obs_index::kStateSize entries

  int history = 0;
  int rays = 0;

  bool operator==(const Observation&) const = default;
};

struct ObservationContext {
  double max_speed = 1.0;
  double force_limit = kDefaultForceLimit;
};

Observation build_observation(const ScanHistory& history, const BodyState& robot,
                              const GlobalPath& path, std::span<const Contact> contacts,
                              const Action& prev_action, const SensingParams& params,
                              const ObservationContext& ctx);

// Auxiliary-head targets, each normalized by max_range.
struct AuxTargets {
  double wall_left = 1.0;
  double wall_right = 1.0;
  double human = 1.0;
};

AuxTargets aux_ground_truth(std::span<const Segment> walls, std::span<const BodyState> pedestrians,
                            const BodyState& robot, const SensingParams& params);

}  // namespace crowdnav
