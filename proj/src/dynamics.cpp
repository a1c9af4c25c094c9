#include "crowdnav/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crowdnav/errors.hpp"

namespace crowdnav {

int StepTiming::physics_ticks_per_control() const {
  return static_cast<int>(std::lround(control_dt / physics_dt));
}

void DynamicsParams::validate() const {
  if (!(timing.control_dt > 0.0 && timing.physics_dt > 0.0 && timing.substeps >= 1)) {
    throw ConfigError("timing must be positive");
  }
  const double ticks = timing.control_dt / timing.physics_dt;
  if (std::abs(ticks - std::round(ticks)) > 1e-9) {
    throw ConfigError("control_dt must be an integer multiple of physics_dt");
  }
  if (!(robot_radius > 0.0 && robot_mass > 0.0 && ped_radius > 0.0 && ped_mass > 0.0)) {
    throw ConfigError("body radii and masses must be positive");
  }
  if (!(robot_max_speed > 0.0 && robot_max_accel > 0.0 && camera_max_rate > 0.0 &&
        camera_inertia > 0.0)) {
    throw ConfigError("robot actuation limits must be positive");
  }
  if (ped_stiffness < 0.0 || ped_damping < 0.0 || wall_stiffness < 0.0 || wall_damping < 0.0) {
    throw ConfigError("contact stiffness and damping must be non-negative");
  }
  if (!(force_limit > 0.0)) throw ConfigError("force limit must be positive");
  if (wall_slop < 0.0) throw ConfigError("wall slop must be non-negative");
}

double contact_force(double overlap, double overlap_rate, double stiffness, double damping) {
  if (stiffness < 0.0 || damping < 0.0) {
    throw ConfigError("contact stiffness and damping must be non-negative");
  }
  return std::max(0.0, stiffness * overlap + damping * overlap_rate);
}

std::vector<ContactCandidate> detect_contacts(std::span<const BodyState> bodies,
                                              std::span<const Segment> walls) {
  std::vector<ContactCandidate> out;
  detect_contacts(bodies, walls, out);
  return out;
}

void detect_contacts(std::span<const BodyState> bodies, std::span<const Segment> walls,
                     std::vector<ContactCandidate>& out) {
  out.clear();
  const int n = static_cast<int>(bodies.size());
  for (int a = 0; a < n; ++a) {
    const BodyState& A = bodies[a];
    for (int b = a + 1; b < n; ++b) {
      const BodyState& B = bodies[b];
      const double rsum = A.radius + B.radius;
      const Vec2 d = A.position - B.position;
      if (std::abs(d.x) >= rsum || std::abs(d.y) >= rsum) continue;
      const double dist2 = d.squared_norm();
      if (dist2 >= rsum * rsum) continue;
      const double dist = std::sqrt(dist2);
      const Vec2 normal = dist > 0.0 ? d / dist : Vec2{1.0, 0.0};
      ContactCandidate c;
      c.body_a = a;
      c.body_b = b;
      c.overlap = rsum - dist;
      c.overlap_rate = -(A.velocity - B.velocity).dot(normal);
      c.normal = normal;
      c.point = B.position + normal * (B.radius - 0.5 * c.overlap);
      out.push_back(c);
    }
    for (int w = 0; w < static_cast<int>(walls.size()); ++w) {
      if (outside_segment_box(walls[w], A.position, A.radius)) continue;
      const Vec2 q = closest_point_on_segment(walls[w], A.position);
      const Vec2 d = A.position - q;
      const double dist2 = d.squared_norm();
      if (dist2 >= A.radius * A.radius) continue;
      const double dist = std::sqrt(dist2);
      const Vec2 normal = dist > 0.0 ? d / dist : Vec2{1.0, 0.0};
      ContactCandidate c;
      c.body_a = a;
      c.body_b = kWallId;
      c.wall = w;
      c.overlap = A.radius - dist;
      c.overlap_rate = -A.velocity.dot(normal);
      c.normal = normal;
      c.point = q;
      out.push_back(c);
    }
  }
}

PhysicsWorld::PhysicsWorld(DynamicsParams params, std::vector<Segment> walls,
                           std::vector<BodyState> bodies)
    : params_(std::move(params)), walls_(std::move(walls)), bodies_(std::move(bodies)) {
  params_.validate();
  if (bodies_.empty()) throw ContractViolation("physics world needs a robot body");
  contact_forces_.resize(bodies_.size());
}

void PhysicsWorld::substep(const ActuationInput& input, PeriodReport& report) {
  const double dt = params_.timing.integrator_dt();
  const std::size_t n = bodies_.size();
  if (contact_forces_.size() != n) contact_forces_.resize(n);
  std::fill(contact_forces_.begin(), contact_forces_.end(), Vec2{});

  detect_contacts(bodies_, walls_, candidates_);
  for (const ContactCandidate& c : candidates_) {
    const bool wall = c.body_b == kWallId;
    const double k = wall ? params_.wall_stiffness : params_.ped_stiffness;
    const double damp = wall ? params_.wall_damping : params_.ped_damping;
    const double f = contact_force(c.overlap, c.overlap_rate, k, damp);
    const Vec2 fa = c.normal * f;
    contact_forces_[c.body_a] += fa;
    if (!wall) contact_forces_[c.body_b] -= fa;

    if (c.body_a == 0) report.robot_contact_impulse += fa * dt;
    if (c.body_b == 0) report.robot_contact_impulse -= fa * dt;
    const double ratio = f / params_.force_limit;
    if (!wall && (c.body_a == 0 || c.body_b == 0) && f > report.max_force) {
      report.max_force = f;
      report.max_force_ratio = ratio;
    }

    auto it = std::find_if(report.contacts.begin(), report.contacts.end(), [&](const Contact& r) {
      return r.body_a == c.body_a && r.body_b == c.body_b && r.wall == c.wall;
    });
    const Contact record{c.body_a, c.body_b, c.wall, c.point, c.normal, f, ratio};
    if (it == report.contacts.end()) {
      report.contacts.push_back(record);
    } else if (f > it->force) {
      *it = record;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    BodyState& b = bodies_[i];
    const Vec2 contact_accel = contact_forces_[i] / b.mass;
    if (i == 0) {
      Vec2 cmd = input.robot_force / b.mass;
      const double cmd_norm = cmd.norm();
      if (cmd_norm > params_.robot_max_accel) cmd *= params_.robot_max_accel / cmd_norm;
      Vec2 v_cmd = b.velocity + cmd * dt;
      const double speed = b.velocity.norm();
      const double cmd_speed = v_cmd.norm();
      if (cmd_speed > params_.robot_max_speed && cmd_speed > speed) {
        v_cmd *= std::max(params_.robot_max_speed, speed) / cmd_speed;
      }
      b.command_accel = (v_cmd - b.velocity) / dt;
      b.velocity = v_cmd + contact_accel * dt;
      const double hard_cap = 2.0 * params_.robot_max_speed;
      const double v_norm = b.velocity.norm();
      if (v_norm > hard_cap) b.velocity *= hard_cap / v_norm;

      b.camera_rate += input.camera_torque / params_.camera_inertia * dt;
      b.camera_rate = std::clamp(b.camera_rate, -params_.camera_max_rate, params_.camera_max_rate);
      b.camera_heading = wrap_angle(b.camera_heading + b.camera_rate * dt);
    } else {
      const Vec2 ext = i < input.body_forces.size() ? input.body_forces[i] : Vec2{};
      b.velocity += (ext / b.mass + contact_accel) * dt;
      const double v_norm = b.velocity.norm();
      if (v_norm > b.max_speed) b.velocity *= b.max_speed / v_norm;
    }
    b.position += b.velocity * dt;

    for (const Segment& w : walls_) {
      if (outside_segment_box(w, b.position, b.radius)) continue;
      const Vec2 q = closest_point_on_segment(w, b.position);
      const Vec2 d = b.position - q;
      const double dist = d.norm();
      const double min_dist = b.radius - params_.wall_slop;
      if (dist >= min_dist || dist == 0.0) continue;
      const Vec2 normal = d / dist;
      b.position = q + normal * min_dist;
      const double vn = b.velocity.dot(normal);
      if (vn < 0.0) b.velocity -= normal * vn;
    }
  }
  time_ += dt;
}

PeriodReport PhysicsWorld::step_control_period(const InputFn& inputs) {
  PeriodReport report;
  ActuationInput input;
  const int ticks = params_.timing.physics_ticks_per_control();
  for (int t = 0; t < ticks; ++t) {
    input.robot_force = {};
    input.camera_torque = 0.0;
    input.body_forces.assign(bodies_.size(), Vec2{});
    inputs(*this, input);
    if (!std::isfinite(input.robot_force.x) || !std::isfinite(input.robot_force.y) ||
        !std::isfinite(input.camera_torque)) {
      throw SimulationDiverged("non-finite actuation command");
    }
    for (int s = 0; s < params_.timing.substeps; ++s) substep(input, report);
  }
  check_finite();
  return report;
}

PeriodReport PhysicsWorld::step_control_period(const ActuationInput& constant) {
  return step_control_period(
      [&constant](const PhysicsWorld&, ActuationInput& in) {
        in.robot_force = constant.robot_force;
        in.camera_torque = constant.camera_torque;
        for (std::size_t i = 0; i < constant.body_forces.size() && i < in.body_forces.size(); ++i) {
          in.body_forces[i] = constant.body_forces[i];
        }
      });
}

void PhysicsWorld::check_finite() const {
  for (std::size_t i = 0; i < bodies_.size(); ++i) {
    const BodyState& b = bodies_[i];
    if (!std::isfinite(b.position.x) || !std::isfinite(b.position.y) ||
        !std::isfinite(b.velocity.x) || !std::isfinite(b.velocity.y) ||
        !std::isfinite(b.camera_heading) || !std::isfinite(b.camera_rate)) {
      throw SimulationDiverged("non-finite state for body " + std::to_string(i) + " at t=" +
                               std::to_string(time_));
    }
  }
}

}  // namespace crowdnav
