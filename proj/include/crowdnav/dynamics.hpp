#pragma once

#include <functional>
#include <span>
#include <vector>

#include "crowdnav/geometry.hpp"

namespace crowdnav {

// Contact threshold used for force ratios: lower-leg blunt-impact pain threshold.
inline constexpr double kDefaultForceLimit = 130.0;

struct StepTiming {
  double control_dt = 0.1;
  double physics_dt = 0.01;
  int substeps = 4;

  double integrator_dt() const { return physics_dt / substeps; }
  int physics_ticks_per_control() const;
  int substeps_per_control() const { return physics_ticks_per_control() * substeps; }
};

struct DynamicsParams {
  StepTiming timing;

  double robot_radius = 0.3;
  double robot_mass = 30.0;
  double robot_max_speed = 1.0;
  double robot_max_accel = 1.5;
  double camera_max_rate = 2.0;
  double camera_inertia = 1.0;

  double ped_radius = 0.25;
  double ped_mass = 80.0;
  double ped_stiffness = 10000.0;
  double ped_damping = 500.0;

  double wall_stiffness = 100000.0;
  double wall_damping = 1000.0;
  // Penetration into a wall beyond this depth is removed by projection.
  double wall_slop = 0.02;

  double force_limit = kDefaultForceLimit;

  void validate() const;
};

struct BodyState {
  Vec2 position;
  Vec2 velocity;
  double radius = 0.25;
  double mass = 80.0;
  // Speed cap applied after every substep; pedestrians use their behavioural cap.
  double max_speed = 1.0;
  double camera_heading = 0.0;
  double camera_rate = 0.0;
  // Acceleration realised by the actuation command during the last substep.
  Vec2 command_accel;
};

inline constexpr int kWallId = -1;

struct Contact {
  int body_a = 0;
  int body_b = kWallId;
  int wall = -1;
  Vec2 point;
  Vec2 normal;  // unit, pointing from b towards a
  double force = 0.0;
  double force_ratio = 0.0;
};

struct ContactCandidate {
  int body_a = 0;
  int body_b = kWallId;
  int wall = -1;  // wall segment index when body_b == kWallId
  double overlap = 0.0;
  double overlap_rate = 0.0;
  Vec2 normal;
  Vec2 point;
};

// Spring-damper contact law: max(0, k*overlap + c*overlap_rate).
double contact_force(double overlap, double overlap_rate, double stiffness, double damping);

// Disc-disc pairs with centre distance strictly below the radius sum and disc-wall
// pairs strictly closer than the radius. Pairs are ordered (a < b), walls last per disc.
std::vector<ContactCandidate> detect_contacts(std::span<const BodyState> bodies,
                                              std::span<const Segment> walls);
// Same as above, reusing the caller's buffer (cleared first).
void detect_contacts(std::span<const BodyState> bodies, std::span<const Segment> walls,
                     std::vector<ContactCandidate>& out);

struct ActuationInput {
  Vec2 robot_force;
  double camera_torque = 0.0;
  // External (non-contact) force per body, index-aligned with the body list. The
  // robot entry is ignored; its actuation goes through robot_force.
  std::vector<Vec2> body_forces;
};

struct PeriodReport {
  // Peak record per touching pair within the period.
  std::vector<Contact> contacts;
  // Maximum instantaneous robot-pedestrian force and its ratio to the limit.
  double max_force = 0.0;
  double max_force_ratio = 0.0;
  // Time integral of every contact force acting on the robot.
  Vec2 robot_contact_impulse;
};

// Planar physics for one environment: body 0 is the omnidirectional robot, the rest are
// compliant pedestrian discs; walls are static segments. Semi-implicit Euler at
// physics_dt / substeps.
class PhysicsWorld {
 public:
  using InputFn = std::function<void(const PhysicsWorld&, ActuationInput&)>;

  PhysicsWorld(DynamicsParams params, std::vector<Segment> walls, std::vector<BodyState> bodies);

  // Runs one control period. The input callback is evaluated at every physics tick
  // (physics_dt) and held across that tick's substeps.
  PeriodReport step_control_period(const InputFn& inputs);
  PeriodReport step_control_period(const ActuationInput& constant);

  // One integrator substep; contact peaks and impulses are folded into `report`.
  void substep(const ActuationInput& input, PeriodReport& report);

  const std::vector<BodyState>& bodies() const { return bodies_; }
  std::vector<BodyState>& mutable_bodies() { return bodies_; }
  const BodyState& robot() const { return bodies_.front(); }
  const std::vector<Segment>& walls() const { return walls_; }
  const DynamicsParams& params() const { return params_; }
  double time() const { return time_; }

 private:
  void check_finite() const;

  DynamicsParams params_;
  std::vector<Segment> walls_;
  std::vector<BodyState> bodies_;
  std::vector<Vec2> contact_forces_;
  std::vector<ContactCandidate> candidates_;
  double time_ = 0.0;
};

}  // namespace crowdnav
