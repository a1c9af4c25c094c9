#include "crowdnav/crowd.hpp"

#include <cmath>
#include <random>

#include "crowdnav/errors.hpp"

namespace crowdnav {

namespace {

Vec2 goal_direction(const Pedestrian& p, const Vec2& position) {
  if (p.mode != PedMode::kWalker) return {};
  const Vec2 d = p.goal - position;
  const double n = d.norm();
  return n > 1e-12 ? d / n : Vec2{};
}

Vec2 pair_repulsion(const Vec2& self_pos, double self_radius, const BodyState& other,
                    const CrowdConfig& cfg) {
  const Vec2 d = self_pos - other.position;
  const double dist2 = d.squared_norm();
  if (dist2 > cfg.interaction_cutoff * cfg.interaction_cutoff) return {};
  const double dist = std::sqrt(dist2);
  const Vec2 n = dist > 0.0 ? d / dist : Vec2{1.0, 0.0};
  const double rsum = self_radius + other.radius;
  return n * (cfg.repulsion_strength * std::exp((rsum - dist) / cfg.repulsion_range));
}

Vec2 wall_repulsion(const Vec2& self_pos, double self_radius, std::span<const Segment> walls,
                    const CrowdConfig& cfg) {
  Vec2 f;
  for (const Segment& w : walls) {
    if (outside_segment_box(w, self_pos, cfg.interaction_cutoff)) continue;
    const Vec2 q = closest_point_on_segment(w, self_pos);
    const Vec2 d = self_pos - q;
    const double dist2 = d.squared_norm();
    if (dist2 > cfg.interaction_cutoff * cfg.interaction_cutoff) continue;
    const double dist = std::sqrt(dist2);
    const Vec2 n = dist > 0.0 ? d / dist : Vec2{1.0, 0.0};
    f += n * (cfg.repulsion_strength * std::exp((self_radius - dist) / cfg.repulsion_range));
  }
  return f;
}

}  // namespace

void CrowdConfig::validate() const {
  if (!(density >= 0.0)) throw ConfigError("crowd density must be non-negative");
  if (!(walker_fraction >= 0.0 && walker_fraction <= 1.0)) {
    throw ConfigError("walker fraction must lie in [0, 1]");
  }
  if (!(repulsion_strength >= 0.0 && repulsion_range > 0.0 && relaxation > 0.0)) {
    throw ConfigError("social force parameters must be positive");
  }
  if (!(walker_speed_min >= 0.5 && walker_speed_max <= 1.5 &&
        walker_speed_min <= walker_speed_max)) {
    throw ConfigError("walker preferred speeds must lie in [0.5, 1.5] m/s");
  }
  if (!(robot_repulsion_scale >= 0.0)) throw ConfigError("robot repulsion scale must be >= 0");
  if (!(speed_cap_factor >= 1.0 && stander_speed_cap > 0.0)) {
    throw ConfigError("pedestrian speed caps must be positive");
  }
  if (max_spawn_attempts < 1) throw ConfigError("max spawn attempts must be at least 1");
  if (!(interaction_cutoff > 0.0)) throw ConfigError("interaction cutoff must be positive");
}

int CrowdConfig::pedestrian_count(double free_area) const {
  return static_cast<int>(std::lround(density * free_area));
}

std::vector<Pedestrian> spawn_crowd(const CorridorWorld& world, const CrowdConfig& config,
                                    const DynamicsParams& bodies, std::uint64_t seed) {
  config.validate();
  const int count = config.pedestrian_count(world.free_area);
  std::vector<Pedestrian> peds;
  peds.reserve(count);
  if (count == 0) return peds;

  std::mt19937_64 rng(seed);
  const double r = bodies.ped_radius;
  std::uniform_real_distribution<double> ux(r, world.length - r);
  std::uniform_real_distribution<double> uy(r, world.width - r);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double goal_margin = std::min(0.9, world.width / 2.0);
  std::uniform_real_distribution<double> goal_y(goal_margin, world.width - goal_margin);
  const double start_clearance = r + bodies.robot_radius;

  int attempts = 0;
  while (static_cast<int>(peds.size()) < count) {
    if (attempts++ >= config.max_spawn_attempts) {
      throw SpawnError("could not place " + std::to_string(count) + " pedestrians within " +
                       std::to_string(config.max_spawn_attempts) + " attempts");
    }
    const Vec2 p{ux(rng), uy(rng)};
    if (!world.disc_is_free(p, r)) continue;
    if ((p - world.start).norm() < start_clearance) continue;
    bool overlap = false;
    for (const Pedestrian& o : peds) {
      if ((p - o.body.position).norm() < r + o.body.radius) {
        overlap = true;
        break;
      }
    }
    if (overlap) continue;

    Pedestrian ped;
    ped.body.position = p;
    ped.body.radius = r;
    ped.body.mass = bodies.ped_mass;
    ped.spawn = p;
    ped.relaxation = config.relaxation;
    if (unit(rng) < config.walker_fraction) {
      ped.mode = PedMode::kWalker;
      ped.preferred_speed = config.walker_speed_min +
                            (config.walker_speed_max - config.walker_speed_min) * unit(rng);
      const bool forward = unit(rng) < 0.5;
      ped.goal = {forward ? world.length - config.end_margin : config.end_margin, goal_y(rng)};
      ped.body.max_speed = config.speed_cap_factor * ped.preferred_speed;
      ped.body.velocity = goal_direction(ped, p) * ped.preferred_speed;
    } else {
      ped.mode = PedMode::kStander;
      ped.preferred_speed = 0.0;
      ped.goal = p;
      ped.body.max_speed = config.stander_speed_cap;
    }
    peds.push_back(ped);
  }
  return peds;
}

Vec2 social_force(const Pedestrian& self, std::span<const BodyState> neighbors,
                  std::span<const Segment> walls, const BodyState* robot,
                  const CrowdConfig& config) {
  const BodyState& b = self.body;
  Vec2 f = (goal_direction(self, b.position) * self.preferred_speed - b.velocity) *
           (b.mass / self.relaxation);
  for (const BodyState& other : neighbors) f += pair_repulsion(b.position, b.radius, other, config);
  if (robot != nullptr && config.react_to_robot) {
    f += pair_repulsion(b.position, b.radius, *robot, config) * config.robot_repulsion_scale;
  }
  f += wall_repulsion(b.position, b.radius, walls, config);
  return f;
}

void crowd_forces(std::span<const Pedestrian> peds, std::span<const BodyState> bodies,
                  std::span<const Segment> walls, const CrowdConfig& config,
                  std::vector<Vec2>& out) {
  out.assign(bodies.size(), Vec2{});
  for (std::size_t i = 0; i < peds.size(); ++i) {
    const std::size_t bi = i + 1;
    const BodyState& b = bodies[bi];
    const Pedestrian& p = peds[i];
    Vec2 f = (goal_direction(p, b.position) * p.preferred_speed - b.velocity) *
             (b.mass / p.relaxation);
    if (config.react_to_robot) {
      f += pair_repulsion(b.position, b.radius, bodies[0], config) * config.robot_repulsion_scale;
    }
    for (std::size_t j = 1; j < bodies.size(); ++j) {
      if (j == bi) continue;
      f += pair_repulsion(b.position, b.radius, bodies[j], config);
    }
    f += wall_repulsion(b.position, b.radius, walls, config);
    out[bi] = f;
  }
}

void retarget_walkers(std::vector<Pedestrian>& peds, const CorridorWorld& world,
                      const CrowdConfig& config) {
  for (Pedestrian& p : peds) {
    if (p.mode != PedMode::kWalker) continue;
    if (std::abs(p.body.position.x - p.goal.x) < config.end_margin) {
      const bool at_far_end = p.goal.x > world.length / 2.0;
      p.goal.x = at_far_end ? config.end_margin : world.length - config.end_margin;
    }
  }
}

}  // namespace crowdnav
