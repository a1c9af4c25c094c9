#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crowdnav/dynamics.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

enum class PedMode { kWalker, kStander };

struct Pedestrian {
  BodyState body;
  PedMode mode = PedMode::kStander;
  Vec2 goal;
  double preferred_speed = 0.0;
  double relaxation = 0.5;
  Vec2 spawn;
};

// Social-force crowd parameters (Helbing-style driving term plus exponential repulsion).
struct CrowdConfig {
  double density = 1.0;
  double walker_fraction = 0.5;
  double repulsion_strength = 2000.0;  // A, N
  double repulsion_range = 0.08;       // B, m
  double relaxation = 0.5;             // tau, s
  double walker_speed_min = 0.5;
  double walker_speed_max = 1.5;
  // Walkers are capped at this multiple of their preferred speed.
  double speed_cap_factor = 1.3;
  // Standers only shuffle aside when pressed; they never break into a run.
  double stander_speed_cap = 0.5;
  bool react_to_robot = true;
  // Repulsion from the robot relative to pedestrian-pedestrian repulsion; 1 is the plain
  // social force model, smaller values emulate crowds that yield less.
  double robot_repulsion_scale = 1.0;
  int max_spawn_attempts = 10000;
  // Repulsion beyond this centre distance is below 1e-10 N for the default A, B.
  double interaction_cutoff = 3.0;
  // Walkers re-target the opposite end once within this distance of their goal.
  double end_margin = 0.5;

  void validate() const;
  int pedestrian_count(double free_area) const;
};

std::vector<Pedestrian> spawn_crowd(const CorridorWorld& world, const CrowdConfig& config,
                                    const DynamicsParams& bodies, std::uint64_t seed);

// Social force on one pedestrian; physical contact forces are handled by the physics
// step. Neighbors must not include the pedestrian itself. A null robot is ignored.
Vec2 social_force(const Pedestrian& self, std::span<const BodyState> neighbors,
                  std::span<const Segment> walls, const BodyState* robot,
                  const CrowdConfig& config);

// Social forces for every pedestrian, with neighbour bodies read from the physics body
// list (robot at index 0, pedestrian i at index i + 1). Output is index-aligned with
// the body list; entry 0 is left at zero.
void crowd_forces(std::span<const Pedestrian> peds, std::span<const BodyState> bodies,
                  std::span<const Segment> walls, const CrowdConfig& config,
                  std::vector<Vec2>& out);

// Swaps a walker's goal to the opposite corridor end once it arrives.
void retarget_walkers(std::vector<Pedestrian>& peds, const CorridorWorld& world,
                      const CrowdConfig& config);

}  // namespace crowdnav
