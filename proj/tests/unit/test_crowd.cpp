#include <gtest/gtest.h>

#include <cmath>

#include "crowdnav/crowd.hpp"
#include "crowdnav/errors.hpp"

namespace crowdnav {
namespace {

CorridorWorld rectangle_world(double width, double length) {
  WorldParams p;
  p.width_min = p.width_max = width;
  p.length_min = p.length_max = length;
  p.inset_rate = 0.0;
  return generate_corridor(5, p);
}

Pedestrian lone_walker(Vec2 position, Vec2 velocity, double v0) {
  Pedestrian p;
  p.mode = PedMode::kWalker;
  p.body.position = position;
  p.body.velocity = velocity;
  p.body.mass = 80.0;
  p.body.radius = 0.25;
  p.goal = {position.x + 50.0, position.y};
  p.preferred_speed = v0;
  p.relaxation = 0.5;
  return p;
}

TEST(SpawnCrowd, CountFollowsDensityTimesArea) {
  const CorridorWorld w = rectangle_world(2.0, 7.0);
  ASSERT_DOUBLE_EQ(w.free_area, 14.0);
  CrowdConfig c;
  c.density = 1.0;
  EXPECT_EQ(spawn_crowd(w, c, DynamicsParams{}, 1).size(), 14u);
  c.density = 0.0;
  EXPECT_TRUE(spawn_crowd(w, c, DynamicsParams{}, 1).empty());
}

TEST(SpawnCrowd, CountIsRoundedAndMonotoneInDensity) {
  const CorridorWorld w = generate_corridor(12, WorldParams{});
  std::size_t prev = 0;
  for (int i = 0; i <= 16; ++i) {
    CrowdConfig c;
    c.density = 0.1 * i;
    const auto peds = spawn_crowd(w, c, DynamicsParams{}, 3);
    EXPECT_EQ(static_cast<long>(peds.size()), std::lround(c.density * w.free_area));
    EXPECT_GE(peds.size(), prev);
    prev = peds.size();
  }
}

TEST(SpawnCrowd, SameSeedSamePlacements) {
  const CorridorWorld w = generate_corridor(4, WorldParams{});
  const CrowdConfig c;
  const auto a = spawn_crowd(w, c, DynamicsParams{}, 77);
  const auto b = spawn_crowd(w, c, DynamicsParams{}, 77);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].body.position, b[i].body.position);
    EXPECT_EQ(a[i].goal, b[i].goal);
    EXPECT_EQ(a[i].preferred_speed, b[i].preferred_speed);
  }
}

TEST(SpawnCrowd, PlacementInvariants) {
  const DynamicsParams dyn;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const CorridorWorld w = generate_corridor(seed, WorldParams{});
    CrowdConfig c;
    c.density = 1.4;
    const auto peds = spawn_crowd(w, c, dyn, seed);
    for (std::size_t i = 0; i < peds.size(); ++i) {
      const Pedestrian& p = peds[i];
      if (p.mode == PedMode::kWalker) {
        EXPECT_GE(p.preferred_speed, 0.5);
        EXPECT_LE(p.preferred_speed, 1.5);
      } else {
        EXPECT_EQ(p.preferred_speed, 0.0);
      }
      EXPECT_GE((p.body.position - w.start).norm(), dyn.ped_radius + dyn.robot_radius);
      EXPECT_TRUE(w.disc_is_free(p.body.position, p.body.radius));
      for (std::size_t j = 0; j < i; ++j) {
        EXPECT_GE((p.body.position - peds[j].body.position).norm(),
                  p.body.radius + peds[j].body.radius);
      }
    }
  }
}

TEST(SpawnCrowd, ImpossibleDensityThrows) {
  const CorridorWorld w = rectangle_world(2.0, 7.0);
  CrowdConfig c;
  c.density = 6.0;
  c.max_spawn_attempts = 2000;
  EXPECT_THROW(spawn_crowd(w, c, DynamicsParams{}, 1), SpawnError);
}

TEST(SocialForce, WalkerAtPreferredVelocityFeelsNothing) {
  const Pedestrian p = lone_walker({0.0, 0.0}, {1.2, 0.0}, 1.2);
  const Vec2 f = social_force(p, {}, {}, nullptr, CrowdConfig{});
  EXPECT_NEAR(f.norm(), 0.0, 1e-12);
}

TEST(SocialForce, WalkerAtRestIsDrivenTowardsGoal) {
  const Pedestrian p = lone_walker({0.0, 0.0}, {0.0, 0.0}, 1.2);
  const Vec2 f = social_force(p, {}, {}, nullptr, CrowdConfig{});
  EXPECT_NEAR(f.norm(), 80.0 * 1.2 / 0.5, 1e-9);
  EXPECT_GT(f.x, 0.0);
}

TEST(SocialForce, PairRepulsionMagnitude) {
  Pedestrian self;
  self.body.position = {0.0, 0.0};
  self.body.radius = 0.25;
  BodyState other;
  other.position = {0.6, 0.0};
  other.radius = 0.25;
  const std::vector<BodyState> neighbors{other};
  const Vec2 f = social_force(self, neighbors, {}, nullptr, CrowdConfig{});
  const double expected = 2000.0 * std::exp((0.5 - 0.6) / 0.08);
  EXPECT_NEAR(f.norm(), expected, 1e-9);
  EXPECT_NEAR(f.norm(), 573.0, 0.05);
  EXPECT_LT(f.x, 0.0);  // pushed away from the neighbour
}

TEST(SocialForce, RepulsionIsSymmetric) {
  Pedestrian a, b;
  a.body.position = {0.1, 0.2};
  b.body.position = {0.5, 0.7};
  const std::vector<BodyState> na{b.body}, nb{a.body};
  const Vec2 fa = social_force(a, na, {}, nullptr, CrowdConfig{});
  const Vec2 fb = social_force(b, nb, {}, nullptr, CrowdConfig{});
  EXPECT_NEAR(fa.norm(), fb.norm(), 1e-12);
  EXPECT_NEAR((fa + fb).norm(), 0.0, 1e-9);
}

TEST(SocialForce, RobotRepulsionIsScaledAndOptional) {
  Pedestrian self;
  BodyState robot;
  robot.position = {0.6, 0.0};
  robot.radius = 0.3;
  CrowdConfig c;
  const double full = c.repulsion_strength * std::exp((0.55 - 0.6) / c.repulsion_range);
  EXPECT_NEAR(social_force(self, {}, {}, &robot, c).norm(), full, 1e-9);
  c.robot_repulsion_scale = 0.5;
  EXPECT_NEAR(social_force(self, {}, {}, &robot, c).norm(), 0.5 * full, 1e-9);
  c.react_to_robot = false;
  EXPECT_EQ(social_force(self, {}, {}, &robot, c).norm(), 0.0);
}

TEST(SocialForce, CrowdForcesAgreeWithPerPedestrianForce) {
  const CorridorWorld w = generate_corridor(9, WorldParams{});
  const CrowdConfig c;
  const auto peds = spawn_crowd(w, c, DynamicsParams{}, 9);
  std::vector<BodyState> bodies;
  BodyState robot;
  robot.position = w.start;
  robot.radius = 0.3;
  bodies.push_back(robot);
  for (const Pedestrian& p : peds) bodies.push_back(p.body);
  std::vector<Vec2> out;
  crowd_forces(peds, bodies, w.walls, c, out);
  ASSERT_EQ(out.size(), bodies.size());
  EXPECT_EQ(out[0], Vec2{});
  for (std::size_t i = 0; i < peds.size(); ++i) {
    std::vector<BodyState> others;
    for (std::size_t j = 0; j < peds.size(); ++j) {
      if (j != i) others.push_back(peds[j].body);
    }
    const Vec2 f = social_force(peds[i], others, w.walls, &robot, c);
    EXPECT_NEAR((f - out[i + 1]).norm(), 0.0, 1e-9 * (1.0 + f.norm()));
  }
}

// Drives the crowd with the physics engine around a motionless robot.
struct CrowdRollout {
  double max_walker_speed_ratio = 0.0;
  double max_unpushed_stander_drift = 0.0;
  int standers = 0;
};

CrowdRollout roll_crowd(std::uint64_t seed, double seconds) {
  const CorridorWorld w = generate_corridor(seed, WorldParams{});
  const CrowdConfig c;
  const DynamicsParams dyn;
  std::vector<Pedestrian> peds = spawn_crowd(w, c, dyn, seed);
  std::vector<BodyState> bodies;
  BodyState robot;
  robot.position = w.start;
  robot.radius = dyn.robot_radius;
  robot.mass = dyn.robot_mass;
  bodies.push_back(robot);
  for (const Pedestrian& p : peds) bodies.push_back(p.body);
  PhysicsWorld physics(dyn, w.walls, bodies);

  // A stander counts as pushed once it has touched anything or felt a repulsive social
  // force above 1 N from a neighbour, wall or the robot.
  std::vector<bool> pushed(peds.size(), false);
  std::vector<Vec2> forces;
  CrowdRollout out;
  const int periods = static_cast<int>(std::lround(seconds / dyn.timing.control_dt));
  for (int k = 0; k < periods; ++k) {
    const PeriodReport rep = physics.step_control_period(
        [&](const PhysicsWorld& pw, ActuationInput& in) {
          for (std::size_t i = 0; i < peds.size(); ++i) peds[i].body = pw.bodies()[i + 1];
          crowd_forces(peds, pw.bodies(), pw.walls(), c, forces);
          for (std::size_t i = 0; i < peds.size(); ++i) {
            in.body_forces[i + 1] = forces[i + 1];
            if (peds[i].mode == PedMode::kStander) {
              const BodyState& b = pw.bodies()[i + 1];
              const Vec2 repulsion = forces[i + 1] + b.velocity * (b.mass / peds[i].relaxation);
              if (repulsion.norm() > 1.0) pushed[i] = true;
            }
          }
        });
    for (const Contact& ct : rep.contacts) {
      if (ct.body_a > 0) pushed[ct.body_a - 1] = true;
      if (ct.body_b > 0) pushed[ct.body_b - 1] = true;
    }
    for (std::size_t i = 0; i < peds.size(); ++i) {
      const BodyState& b = physics.bodies()[i + 1];
      peds[i].body = b;
      if (peds[i].mode == PedMode::kWalker) {
        out.max_walker_speed_ratio =
            std::max(out.max_walker_speed_ratio, b.velocity.norm() / peds[i].preferred_speed);
      } else if (!pushed[i]) {
        out.max_unpushed_stander_drift =
            std::max(out.max_unpushed_stander_drift, (b.position - peds[i].spawn).norm());
      }
    }
    retarget_walkers(peds, w, c);
  }
  for (const Pedestrian& p : peds) out.standers += p.mode == PedMode::kStander;
  return out;
}

TEST(CrowdRollout, WalkerSpeedsStayBelowCap) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const CrowdRollout r = roll_crowd(seed, 10.0);
    EXPECT_LE(r.max_walker_speed_ratio, 1.3 + 1e-12) << "seed " << seed;
  }
}

TEST(CrowdRollout, UnpushedStandersStayPut) {
  int standers = 0;
  for (std::uint64_t seed : {4u, 5u, 6u}) {
    const CrowdRollout r = roll_crowd(seed, 10.0);
    EXPECT_LE(r.max_unpushed_stander_drift, 0.05) << "seed " << seed;
    standers += r.standers;
  }
  EXPECT_GT(standers, 0);
}

TEST(RetargetWalkers, ArrivingWalkerTurnsAround) {
  const CorridorWorld w = rectangle_world(2.0, 7.0);
  CrowdConfig c;
  std::vector<Pedestrian> peds{lone_walker({6.4, 1.0}, {1.0, 0.0}, 1.0)};
  peds[0].goal = {6.5, 1.0};
  retarget_walkers(peds, w, c);
  EXPECT_LT(peds[0].goal.x, 1.0);
}

TEST(CrowdConfig, Validation) {
  CrowdConfig c;
  EXPECT_NO_THROW(c.validate());
  c.density = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  CrowdConfig d;
  d.walker_speed_max = 2.0;
  EXPECT_THROW(d.validate(), ConfigError);
  CrowdConfig e;
  e.robot_repulsion_scale = -1.0;
  EXPECT_THROW(e.validate(), ConfigError);
}

}  // namespace
}  // namespace crowdnav
