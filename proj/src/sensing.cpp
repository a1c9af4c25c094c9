#include "crowdnav/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "crowdnav/errors.hpp"

namespace crowdnav {

namespace {

// Nearest hit distance from the robot centre along dir, or +inf.
double cast(const Vec2& origin, const Vec2& dir, std::span<const Segment> walls,
            std::span<const BodyState> peds, double max_t) {
  double best = std::numeric_limits<double>::infinity();
  for (const Segment& w : walls) {
    if (auto t = ray_segment(origin, dir, w); t && *t < best) best = *t;
  }
  for (const BodyState& p : peds) {
    const Vec2 oc = p.position - origin;
    const double along = oc.dot(dir);
    if (along + p.radius < 0.0 || along - p.radius > std::min(best, max_t)) continue;
    if (auto t = ray_circle(origin, dir, p.position, p.radius); t && *t < best) best = *t;
  }
  return best;
}

double clip(double v, double lo, double hi) { return std::clamp(v, lo, hi); }

}  // namespace

void SensingParams::validate() const {
  if (rays < 2) throw ConfigError("scan needs at least two rays");
  if (!(fov > 0.0 && fov < 2.0 * std::numbers::pi)) throw ConfigError("fov must lie in (0, 2pi)");
  if (!(min_range >= 0.0 && max_range > min_range)) {
    throw ConfigError("scan ranges must satisfy 0 <= min_range < max_range");
  }
  if (history < 1) throw ConfigError("scan history must hold at least one scan");
  if (noise_std < 0.0) throw ConfigError("noise std must be non-negative");
  if (waypoint_lookahead < 0.0) throw ConfigError("waypoint lookahead must be non-negative");
}

double SensingParams::ray_bearing(int i, double camera_heading) const {
  return camera_heading - fov / 2.0 + i * fov / (rays - 1);
}

DepthScan raycast_scan(std::span<const Segment> walls, std::span<const BodyState> pedestrians,
                       const BodyState& robot, const SensingParams& params,
                       std::mt19937_64* noise_rng) {
  DepthScan scan;
  scan.heading = robot.camera_heading;
  scan.ranges.resize(params.rays);
  const double reach = params.max_range + robot.radius;
  std::normal_distribution<double> noise(0.0, params.noise_std);
  for (int i = 0; i < params.rays; ++i) {
    const Vec2 dir = unit_from_angle(params.ray_bearing(i, robot.camera_heading));
    const double t = cast(robot.position, dir, walls, pedestrians, reach);
    double range = t - robot.radius;
    if (noise_rng != nullptr && params.noise_std > 0.0 && std::isfinite(range)) {
      range += noise(*noise_rng);
    }
    double value = 1.0;
    if (range < params.max_range) {
      if (range >= params.min_range) {
        value = range / params.max_range;
      } else if (!params.blind_zone) {
        value = std::max(range, 0.0) / params.max_range;
      }
    }
    scan.ranges[i] = value;
  }
  return scan;
}

void ScanHistory::reset(const DepthScan& first) {
  scans_.assign(capacity_, first);
}

void ScanHistory::push(DepthScan scan) {
  if (scans_.empty()) {
    reset(scan);
    return;
  }
  scans_.push_back(std::move(scan));
  while (static_cast<int>(scans_.size()) > capacity_) scans_.pop_front();
}

Observation build_observation(const ScanHistory& history, const BodyState& robot,
                              const GlobalPath& path, std::span<const Contact> contacts,
                              const Action& prev_action, const SensingParams& params,
                              const ObservationContext& ctx) {
  namespace oi = obs_index;
  if (path.waypoints.empty()) throw ContractViolation("observation needs a non-empty path");
  if (static_cast<int>(history.scans().size()) != history.capacity()) {
    throw ContractViolation("scan history is not full");
  }

  Observation obs;
  obs.history = history.capacity();
  obs.rays = params.rays;
  obs.scans.reserve(static_cast<std::size_t>(obs.history) * obs.rays);
  for (const DepthScan& s : history.scans()) {
    if (static_cast<int>(s.ranges.size()) != params.rays) {
      throw ContractViolation("scan width does not match the sensing layout");
    }
    obs.scans.insert(obs.scans.end(), s.ranges.begin(), s.ranges.end());
  }

  std::vector<double>& st = obs.state;
  st.assign(oi::kStateSize, 0.0);
  const double cam = robot.camera_heading;

  const Vec2 v_body = rotate(robot.velocity, -cam) / ctx.max_speed;
  st[oi::kVelX] = clip(v_body.x, -1.0, 1.0);
  st[oi::kVelY] = clip(v_body.y, -1.0, 1.0);
  st[oi::kCamSin] = std::sin(cam);
  st[oi::kCamCos] = std::cos(cam);

  const double s = path.project(robot.position);
  const std::vector<double> cum = path.cumulative();
  std::size_t active = path.waypoints.size() - 1;
  for (std::size_t i = 0; i < cum.size(); ++i) {
    if (cum[i] > s + params.waypoint_lookahead) {
      active = i;
      break;
    }
  }
  const Vec2 to_wp = path.waypoints[active] - robot.position;
  const double wp_dist = to_wp.norm();
  const double heading_err = wp_dist > 0.0 ? wrap_angle(std::atan2(to_wp.y, to_wp.x) - cam) : 0.0;
  st[oi::kHeadingErrSin] = std::sin(heading_err);
  st[oi::kHeadingErrCos] = std::cos(heading_err);
  st[oi::kWaypointDist] = std::min(wp_dist, params.max_range) / params.max_range;
  st[oi::kRemaining] =
      path.arc_length > 0.0 ? clip((path.arc_length - s) / path.arc_length, 0.0, 1.0) : 0.0;

  st[oi::kPrevSpeed] = clip(prev_action.speed / ctx.max_speed, 0.0, 1.0);
  st[oi::kPrevMotion] = clip(prev_action.motion_heading / std::numbers::pi, -1.0, 1.0);
  st[oi::kPrevCamera] = clip(prev_action.camera_heading / std::numbers::pi, -1.0, 1.0);

  double max_ratio = 0.0;
  Vec2 net;
  for (const Contact& c : contacts) {
    if (c.body_a != 0 && c.body_b != 0) continue;
    const bool pedestrian = c.body_b != kWallId;
    if (pedestrian) max_ratio = std::max(max_ratio, c.force / ctx.force_limit);
    net += (c.body_a == 0 ? c.normal : -c.normal) * c.force;
  }
  st[oi::kForceRatio] = clip(max_ratio, 0.0, 1.0);
  if (net.norm() > 1e-12) {
    const Vec2 nb = rotate(net, -cam);
    const double ang = std::atan2(nb.y, nb.x);
    st[oi::kContactSin] = std::sin(ang);
    st[oi::kContactCos] = std::cos(ang);
  }
  return obs;
}

AuxTargets aux_ground_truth(std::span<const Segment> walls, std::span<const BodyState> pedestrians,
                            const BodyState& robot, const SensingParams& params) {
  auto side = [&](const Vec2& dir) {
    double best = std::numeric_limits<double>::infinity();
    for (const Segment& w : walls) {
      if (auto t = ray_segment(robot.position, dir, w); t && *t < best) best = *t;
    }
    return clip(best - robot.radius, 0.0, params.max_range) / params.max_range;
  };
  AuxTargets out;
  out.wall_left = side({0.0, 1.0});
  out.wall_right = side({0.0, -1.0});

  double human = params.max_range;
  for (const BodyState& p : pedestrians) {
    const Vec2 d = p.position - robot.position;
    const double bearing = wrap_angle(std::atan2(d.y, d.x) - robot.camera_heading);
    if (std::abs(bearing) > params.fov / 2.0) continue;
    human = std::min(human, std::max(0.0, d.norm() - robot.radius - p.radius));
  }
  out.human = clip(human, 0.0, params.max_range) / params.max_range;
  return out;
}

}  // namespace crowdnav
