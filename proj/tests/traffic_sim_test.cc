#include "hrl_cruise/traffic_sim.h"

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

namespace hrl_cruise {
namespace {

VehicleState Vehicle(double s, double d, double speed, double heading = 0.0) {
  VehicleState v;
  v.pose = {s, d, heading, speed};
  return v;
}

TEST(IdmTest, FreeRoadAcceleration) {
  const IdmParams idm;
  // 1.5 * (1 - (10/20)^4)
  EXPECT_NEAR(AmbientAccel(Vehicle(0, 0, 10.0), 20.0, kNoLeader, 0.0, idm, 6.0),
              1.40625, 1e-12);
  EXPECT_NEAR(AmbientAccel(Vehicle(0, 0, 0.0), 20.0, kNoLeader, 0.0, idm, 6.0),
              1.5, 1e-12);
  EXPECT_NEAR(AmbientAccel(Vehicle(0, 0, 20.0), 20.0, kNoLeader, 0.0, idm, 6.0),
              0.0, 1e-12);
}

TEST(IdmTest, FollowingAtEqualSpeed) {
  const IdmParams idm;
  // s* = 2 + 10 * 1.5 = 17; 1.5 * (1 - 1/16 - (17/30)^2)
  const double expected = 1.5 * (1.0 - 0.0625 - (17.0 / 30.0) * (17.0 / 30.0));
  EXPECT_NEAR(AmbientAccel(Vehicle(0, 0, 10.0), 20.0, 30.0, 10.0, idm, 6.0),
              expected, 1e-12);
}

TEST(IdmTest, ClosingSpeedRaisesDesiredGap) {
  const IdmParams idm;
  // s* = 2 + 15 + 10 * 4 / (2 * sqrt(3))
  const double s_star = 2.0 + 15.0 + 40.0 / (2.0 * std::sqrt(3.0));
  const double expected =
      1.5 * (1.0 - 0.0625 - (s_star / 40.0) * (s_star / 40.0));
  EXPECT_NEAR(AmbientAccel(Vehicle(0, 0, 10.0), 20.0, 40.0, 6.0, idm, 6.0),
              expected, 1e-12);
}

TEST(IdmTest, BrakingIsBounded) {
  const IdmParams idm;
  EXPECT_DOUBLE_EQ(
      AmbientAccel(Vehicle(0, 0, 13.0), 14.0, 0.5, 0.0, idm, 6.0), -6.0);
}

TEST(BoxTest, AxisAlignedOverlapArithmetic) {
  const RoadNetwork road;
  const VehicleState a = Vehicle(100.0, 0.0, 0.0);
  // Lengths 4.5: centers closer than 4.5 overlap, at 4.5 they only touch.
  EXPECT_TRUE(BoxesOverlap(a, Vehicle(104.4, 0.0, 0.0), road));
  EXPECT_FALSE(BoxesOverlap(a, Vehicle(104.5, 0.0, 0.0), road));
  // Widths 1.8.
  EXPECT_TRUE(BoxesOverlap(a, Vehicle(101.0, 1.79, 0.0), road));
  EXPECT_FALSE(BoxesOverlap(a, Vehicle(101.0, 1.8, 0.0), road));
  EXPECT_FALSE(BoxesOverlap(a, Vehicle(101.0, 3.5, 0.0), road));
}

TEST(BoxTest, RotatedBoxCornerCase) {
  const RoadNetwork road;
  const VehicleState a = Vehicle(100.0, 0.0, 0.0);
  // b rotated 90 degrees: its long side lies along d. Its half extent along s
  // is 0.9, so contact needs center distance < 2.25 + 0.9.
  EXPECT_TRUE(BoxesOverlap(a, Vehicle(103.1, 0.0, 0.0, M_PI / 2), road));
  EXPECT_FALSE(BoxesOverlap(a, Vehicle(103.2, 0.0, 0.0, M_PI / 2), road));
  // A 45 degree box shifted so its rearmost corner sits on a's centerline:
  // the corner trails the center by 0.5 * (4.5 + 1.8) / sqrt(2) in s.
  const double reach = 0.5 * (4.5 + 1.8) / std::sqrt(2.0);
  const double shift = 0.5 * (4.5 - 1.8) / std::sqrt(2.0);
  EXPECT_TRUE(BoxesOverlap(a, Vehicle(100.0 + 2.25 + reach - 0.01, shift, 0.0,
                                      M_PI / 4), road));
  EXPECT_FALSE(BoxesOverlap(a, Vehicle(100.0 + 2.25 + reach + 0.01, shift, 0.0,
                                       M_PI / 4), road));
}

TEST(BoxTest, WrapsAroundTheRing) {
  const RoadNetwork road;
  EXPECT_TRUE(BoxesOverlap(Vehicle(999.0, 0.0, 0.0), Vehicle(1.0, 0.0, 0.0), road));
  EXPECT_FALSE(BoxesOverlap(Vehicle(990.0, 0.0, 0.0), Vehicle(1.0, 0.0, 0.0), road));
}

TEST(SpawnTest, RespectsCountsAndInitialGaps) {
  const RoadNetwork road;
  SpawnConfig spawn;
  spawn.ego_lane = 1;
  spawn.ego_speed = 9.0;
  const SimParams params;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    const WorldState w = SpawnWorld(road, spawn, params, seed);
    EXPECT_DOUBLE_EQ(w.ego.pose.d, road.LaneCenter(1));
    EXPECT_DOUBLE_EQ(w.ego.speed(), 9.0);
    EXPECT_LE(static_cast<int>(w.others.size()), spawn.max_vehicles);
    std::vector<VehicleState> all = {w.ego};
    for (const auto& o : w.others) {
      all.push_back(o.state);
      EXPECT_GE(o.desired_speed, 0.5 * road.speed_limit - 1e-12);
      EXPECT_LE(o.desired_speed, 0.95 * road.speed_limit + 1e-12);
    }
    for (size_t i = 0; i < all.size(); ++i) {
      for (size_t j = i + 1; j < all.size(); ++j) {
        if (LaneOf(all[i].pose.d, road) != LaneOf(all[j].pose.d, road)) continue;
        const double gap =
            std::abs(road.RingDelta(all[i].pose.s, all[j].pose.s)) - 4.5;
        EXPECT_GE(gap, spawn.min_initial_gap - 1e-9);
      }
    }
  }
}

TEST(SpawnTest, SeedDeterminesTheWorld) {
  const RoadNetwork road;
  const SimParams params;
  const WorldState a = SpawnWorld(road, {}, params, 5);
  const WorldState b = SpawnWorld(road, {}, params, 5);
  ASSERT_EQ(a.others.size(), b.others.size());
  for (size_t i = 0; i < a.others.size(); ++i) {
    EXPECT_EQ(a.others[i].state.pose.s, b.others[i].state.pose.s);
    EXPECT_EQ(a.others[i].desired_speed, b.others[i].desired_speed);
  }
}

TEST(StepTest, PointFollowTracksTrajectoryExactly) {
  const RoadNetwork road;
  const SimParams params;
  WorldState w;
  w.ego = Vehicle(10.0, road.LaneCenter(0), 10.0);
  // 30 m horizon plus 20 m tail; 20 steps cover 40 m.
  const Trajectory t = GenerateTrajectory(w.ego.pose, 7, 10.0, road);
  for (int i = 0; i < 20; ++i) {
    w = StepWorld(w, t, 0.2, DynamicsMode::kPointFollow, road, params);
    EXPECT_NEAR(w.ego.pose.d, t.LateralAt(w.ego.pose.s), 1e-12);
    EXPECT_NEAR(w.ego.speed(), 10.0, 1e-12);
  }
  EXPECT_GT(w.ego.pose.s, t.s_start() + t.horizon());
  EXPECT_NEAR(w.ego.pose.d, CorridorCenter(7, road), 1e-9);
  EXPECT_NEAR(w.time, 4.0, 1e-9);
  EXPECT_EQ(w.step_count, 20);
}

TEST(StepTest, PointFollowAccelerationIsClipped) {
  const RoadNetwork road;
  const SimParams params;
  WorldState w;
  w.ego = Vehicle(0.0, 0.0, 5.0);
  const Trajectory t = Trajectory::Straight(0.0, 0.0, 100.0, 13.9, 7);
  w = StepWorld(w, t, 0.2, DynamicsMode::kPointFollow, road, params);
  EXPECT_NEAR(w.ego.speed(), 5.8, 1e-12);
  EXPECT_NEAR(w.ego.accel, 4.0, 1e-12);
  // Position integrates the mean speed.
  EXPECT_NEAR(w.ego.pose.s, 0.2 * 5.4, 1e-12);
}

TEST(StepTest, BicycleConvergesToCorridorAndSpeed) {
  const RoadNetwork road;
  const SimParams params;
  WorldState w;
  w.ego = Vehicle(0.0, road.LaneCenter(0), 8.0);
  for (int i = 0; i < 150; ++i) {
    const Trajectory t = GenerateTrajectory(w.ego.pose, 7, 12.0, road);
    w = StepWorld(w, t, 0.2, DynamicsMode::kBicycle, road, params);
  }
  EXPECT_NEAR(w.ego.pose.d, 0.0, 0.05);
  EXPECT_NEAR(w.ego.speed(), 12.0, 0.05);
  EXPECT_NEAR(w.ego.pose.heading_offset, 0.0, 0.01);
}

TEST(StepTest, TrackingSaturatesAtLimits) {
  const SimParams params;
  const RoadNetwork road;
  const VehicleState ego = Vehicle(0.0, 0.0, 1.0);
  const Trajectory sharp(0.0, 3.0, FitQuintic(0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 3.0),
                         0.0, 1.0, 13.9, 0);
  const ControlCommand c = TrackTrajectory(ego, sharp, 0.02, params);
  EXPECT_LE(std::abs(c.steer), params.limits.max_steer + 1e-12);
  EXPECT_DOUBLE_EQ(c.accel, params.max_accel);
  EXPECT_TRUE(TrackTrajectory(ego, Trajectory(), 0.02, params).fault);
}

TEST(StepTest, AmbientTrafficStaysCollisionFree) {
  const RoadNetwork road;
  SimParams params;
  params.lane_change_probability = 0.01;
  SpawnConfig spawn;
  spawn.min_vehicles = spawn.max_vehicles = 25;
  WorldState w = SpawnWorld(road, spawn, params, 3);
  // Park the ego far off the traffic flow by keeping it out of the count.
  for (int i = 0; i < 3000; ++i) {
    const Trajectory t = Trajectory::Straight(w.ego.pose.s, w.ego.pose.d, 50.0,
                                              w.ego.speed(), 2);
    w = StepWorld(w, t, 0.2, DynamicsMode::kPointFollow, road, params);
    ASSERT_EQ(CountAmbientCollisions(w, road), 0) << "step " << i;
  }
}

TEST(StepTest, RandomStreamIndependentOfEgo) {
  const RoadNetwork road;
  const SimParams params;
  const WorldState start = SpawnWorld(road, {}, params, 9);
  WorldState a = start;
  WorldState b = start;
  for (int i = 0; i < 20; ++i) {
    a = StepWorld(a, Trajectory::Straight(a.ego.pose.s, a.ego.pose.d, 50.0, 5.0, 2),
                  0.2, DynamicsMode::kPointFollow, road, params);
    b = StepWorld(b, Trajectory::Straight(b.ego.pose.s, b.ego.pose.d, 50.0, 9.0, 2),
                  0.2, DynamicsMode::kPointFollow, road, params);
  }
  EXPECT_EQ(a.rng(), b.rng());
}

TEST(StepTest, RejectsNonPositiveDt) {
  const RoadNetwork road;
  EXPECT_THROW(StepWorld(WorldState{}, Trajectory(), 0.0,
                         DynamicsMode::kPointFollow, road, SimParams{}),
               std::invalid_argument);
}

TEST(CollisionTest, DetectsEgoOverlap) {
  const RoadNetwork road;
  WorldState w;
  w.ego = Vehicle(50.0, 0.0, 5.0);
  AmbientVehicle other;
  other.state = Vehicle(53.0, 0.5, 5.0);
  w.others.push_back(other);
  EXPECT_TRUE(DetectCollision(w, road));
  w.others[0].state.pose.d = 3.5;
  EXPECT_FALSE(DetectCollision(w, road));
}

TEST(SnapshotTest, WritesOneJsonObjectPerLine) {
  const RoadNetwork road;
  const WorldState w = SpawnWorld(road, {}, SimParams{}, 4);
  std::ostringstream out;
  AppendSnapshot(out, w);
  AppendSnapshot(out, w);
  std::istringstream in(out.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("others").size(), w.others.size());
    EXPECT_DOUBLE_EQ(j.at("ego").at("speed").get<double>(), w.ego.speed());
    ++lines;
  }
  EXPECT_EQ(lines, 2);
}

TEST(ModeTest, ParsesNames) {
  EXPECT_EQ(ParseDynamicsMode("point"), DynamicsMode::kPointFollow);
  EXPECT_EQ(ParseDynamicsMode("bicycle"), DynamicsMode::kBicycle);
  EXPECT_THROW(ParseDynamicsMode("boat"), std::invalid_argument);
  EXPECT_STREQ(ToString(DynamicsMode::kBicycle), "bicycle");
}

}  // namespace
}  // namespace hrl_cruise
