#include "hrl_cruise/road_geometry.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>
#include <gtest/gtest.h>

namespace hrl_cruise {
namespace {

RoadNetwork DefaultRoad() { return RoadNetwork{}; }

// Corridor k spans (lo_k, hi_k]; the rightmost one also owns the road edge.
int TilingOracle(double d, const RoadNetwork& road) {
  const double w = road.lane_width / road.corridors_per_lane;
  const double edge = -0.5 * road.num_lanes * road.lane_width;
  const int n = road.num_lanes * road.corridors_per_lane;
  if (d < edge || d > -edge) return kOffRoad;
  for (int k = 0; k < n; ++k) {
    const double hi = edge + (k + 1) * w;
    if (d <= hi + 1e-12) return k;
  }
  return n - 1;
}

double Poly(const std::array<double, 6>& c, double u, int derivative) {
  double sum = 0.0;
  for (int i = derivative; i < 6; ++i) {
    double factor = 1.0;
    for (int j = 0; j < derivative; ++j) factor *= (i - j);
    sum += factor * c[i] * std::pow(u, i - derivative);
  }
  return sum;
}

TEST(RoadNetworkTest, DefaultGridDimensions) {
  const RoadNetwork road = DefaultRoad();
  EXPECT_NO_THROW(road.Validate());
  EXPECT_EQ(road.NumCorridors(), 15);
  EXPECT_DOUBLE_EQ(road.CorridorWidth(), 0.7);
  EXPECT_DOUBLE_EQ(road.Width(), 10.5);
  EXPECT_EQ(road.MiddleCorridorOfLane(0), 2);
  EXPECT_EQ(road.MiddleCorridorOfLane(1), 7);
  EXPECT_EQ(road.MiddleCorridorOfLane(2), 12);
}

TEST(RoadNetworkTest, RejectsMalformedGrids) {
  RoadNetwork road;
  road.corridors_per_lane = 4;
  EXPECT_THROW(road.Validate(), std::invalid_argument);
  road.corridors_per_lane = 1;
  EXPECT_THROW(road.Validate(), std::invalid_argument);
  road = RoadNetwork{};
  road.num_lanes = 0;
  EXPECT_THROW(road.Validate(), std::invalid_argument);
  road = RoadNetwork{};
  road.lane_width = 1.5;
  EXPECT_THROW(road.Validate(1.8), std::invalid_argument);
  road = RoadNetwork{};
  road.length = 0.0;
  EXPECT_THROW(road.Validate(), std::invalid_argument);
}

TEST(RoadNetworkTest, RingArithmetic) {
  const RoadNetwork road = DefaultRoad();
  EXPECT_DOUBLE_EQ(road.WrapS(1010.0), 10.0);
  EXPECT_DOUBLE_EQ(road.WrapS(-10.0), 990.0);
  EXPECT_DOUBLE_EQ(road.RingDelta(990.0, 10.0), 20.0);
  EXPECT_DOUBLE_EQ(road.RingDelta(10.0, 990.0), -20.0);
  EXPECT_DOUBLE_EQ(road.RingDelta(100.0, 150.0), 50.0);
}

TEST(FrenetTest, StraightRoadMapping) {
  const RoadNetwork road = DefaultRoad();
  const CartesianPose c = FrenetToCartesian({12.5, -1.75, 0.1, 9.0}, road);
  EXPECT_DOUBLE_EQ(c.x, 12.5);
  EXPECT_DOUBLE_EQ(c.y, -1.75);
  EXPECT_DOUBLE_EQ(c.yaw, 0.1);
  EXPECT_DOUBLE_EQ(c.speed, 9.0);
}

TEST(FrenetTest, RoundTripRandomPoses) {
  const RoadNetwork road = DefaultRoad();
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> s(0.0, road.length);
  std::uniform_real_distribution<double> d(-road.HalfWidth(), road.HalfWidth());
  std::uniform_real_distribution<double> h(-0.5, 0.5);
  for (int i = 0; i < 10000; ++i) {
    const FrenetPose p{s(rng), d(rng), h(rng), 5.0};
    const FrenetPose q = CartesianToFrenet(FrenetToCartesian(p, road), road);
    ASSERT_LT(std::abs(q.s - p.s), 1e-9);
    ASSERT_LT(std::abs(q.d - p.d), 1e-9);
    ASSERT_LT(std::abs(q.heading_offset - p.heading_offset), 1e-12);
  }
}

TEST(FrenetTest, RejectsPosesOffTheRoadSegment) {
  const RoadNetwork road = DefaultRoad();
  EXPECT_THROW(FrenetToCartesian({-1.0, 0.0, 0.0, 0.0}, road), std::domain_error);
  EXPECT_THROW(FrenetToCartesian({1000.5, 0.0, 0.0, 0.0}, road),
               std::domain_error);
}

TEST(CorridorTest, CenterThenLookupIsIdentity) {
  const RoadNetwork road = DefaultRoad();
  for (int k = 0; k < road.NumCorridors(); ++k) {
    EXPECT_EQ(CorridorOf(CorridorCenter(k, road), road), k);
  }
  EXPECT_DOUBLE_EQ(CorridorCenter(0, road), -5.25 + 0.35);
  EXPECT_DOUBLE_EQ(CorridorCenter(7, road), 0.0);
}

TEST(CorridorTest, MatchesTilingOracle) {
  for (int lanes : {1, 2, 3, 4}) {
    for (int per_lane : {3, 5, 7}) {
      RoadNetwork road;
      road.num_lanes = lanes;
      road.corridors_per_lane = per_lane;
      std::mt19937_64 rng(lanes * 10 + per_lane);
      std::uniform_real_distribution<double> d(-road.HalfWidth() - 0.5,
                                               road.HalfWidth() + 0.5);
      for (int i = 0; i < 2000; ++i) {
        const double x = d(rng);
        ASSERT_EQ(CorridorOf(x, road), TilingOracle(x, road)) << x;
      }
    }
  }
}

TEST(CorridorTest, BoundaryBelongsToRightCorridor) {
  const RoadNetwork road = DefaultRoad();
  // Lane boundary between lanes 0 and 1.
  EXPECT_EQ(CorridorOf(-1.75, road), 4);
  EXPECT_EQ(LaneOf(-1.75, road), 0);
  EXPECT_EQ(CorridorOf(-1.75 + 1e-9, road), 5);
  EXPECT_EQ(LaneOf(-1.75 + 1e-9, road), 1);
  EXPECT_EQ(CorridorOf(-road.HalfWidth(), road), 0);
  EXPECT_EQ(CorridorOf(road.HalfWidth(), road), 14);
}

TEST(CorridorTest, OffRoadAndInvalidIndices) {
  const RoadNetwork road = DefaultRoad();
  EXPECT_EQ(CorridorOf(5.26, road), kOffRoad);
  EXPECT_EQ(CorridorOf(-5.26, road), kOffRoad);
  EXPECT_EQ(LaneOf(6.0, road), kOffRoad);
  EXPECT_THROW(CorridorCenter(-1, road), std::domain_error);
  EXPECT_THROW(CorridorCenter(15, road), std::domain_error);
}

TEST(CorridorTest, CorridorsTileEachLane) {
  const RoadNetwork road = DefaultRoad();
  for (int k = 0; k < road.NumCorridors(); ++k) {
    const int lane = road.LaneOfCorridor(k);
    EXPECT_EQ(LaneOf(CorridorCenter(k, road), road), lane);
  }
}

TEST(QuinticTest, MatchesLinearSystemSolution) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double L = 20.0 + 30.0 * (u(rng) + 1.0);
    const double b[6] = {u(rng), 0.1 * u(rng), 0.01 * u(rng),
                         3.0 * u(rng), 0.1 * u(rng), 0.01 * u(rng)};
    Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
    A(0, 0) = 1.0;
    A(1, 1) = 1.0;
    A(2, 2) = 2.0;
    for (int i = 0; i < 6; ++i) {
      A(3, i) = std::pow(L, i);
      if (i >= 1) A(4, i) = i * std::pow(L, i - 1);
      if (i >= 2) A(5, i) = i * (i - 1) * std::pow(L, i - 2);
    }
    Eigen::Matrix<double, 6, 1> rhs;
    rhs << b[0], b[1], b[2], b[3], b[4], b[5];
    const Eigen::Matrix<double, 6, 1> x = A.fullPivLu().solve(rhs);
    const auto c = FitQuintic(b[0], b[1], b[2], b[3], b[4], b[5], L);
    for (int i = 0; i < 6; ++i) {
      EXPECT_NEAR(c[i], x(i), 1e-9 * std::max(1.0, std::abs(x(i))));
    }
  }
}

TEST(TrajectoryTest, BoundaryConditionsAndSettling) {
  const RoadNetwork road = DefaultRoad();
  const FrenetPose ego{100.0, road.LaneCenter(0), 0.02, 13.9};
  const int target = road.MiddleCorridorOfLane(1);
  const Trajectory t = GenerateTrajectory(ego, target, 13.9, road);
  const double L = t.horizon();
  EXPECT_DOUBLE_EQ(L, 3.0 * 13.9);
  EXPECT_NEAR(t.LateralAt(ego.s), ego.d, 1e-6);
  EXPECT_NEAR(t.SlopeAt(ego.s), std::tan(0.02), 1e-6);
  EXPECT_NEAR(t.SecondDerivativeAt(ego.s), 0.0, 1e-6);
  const double end = ego.s + L;
  EXPECT_NEAR(t.LateralAt(end), CorridorCenter(target, road), 1e-6);
  EXPECT_NEAR(t.SlopeAt(end - 1e-9), 0.0, 1e-6);
  EXPECT_NEAR(t.SecondDerivativeAt(end - 1e-9), 0.0, 1e-6);
  EXPECT_EQ(t.target_corridor(), target);
  EXPECT_DOUBLE_EQ(t.speed_setpoint(), 13.9);
}

TEST(TrajectoryTest, PointsStrictlyIncreasingAtFixedSpacing) {
  const RoadNetwork road = DefaultRoad();
  const Trajectory t =
      GenerateTrajectory({5.0, 0.0, 0.0, 4.0}, 9, 5.0, road);
  ASSERT_GE(t.points().size(), 2u);
  EXPECT_DOUBLE_EQ(t.horizon(), 20.0);  // min horizon at low speed
  for (size_t i = 1; i < t.points().size(); ++i) {
    const double ds = t.points()[i].s - t.points()[i - 1].s;
    EXPECT_GT(ds, 0.0);
    EXPECT_LE(ds, 1.0 + 1e-12);
  }
  EXPECT_NEAR(t.points().back().s, 5.0 + 20.0 + 20.0, 1e-9);
  EXPECT_NEAR(t.points().back().d, CorridorCenter(9, road), 1e-9);
}

TEST(TrajectoryTest, CurvatureWithinSteeringLimit) {
  const RoadNetwork road = DefaultRoad();
  const VehicleLimits limits;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> corridor(0, road.NumCorridors() - 1);
  std::uniform_real_distribution<double> speed(0.0, 13.9);
  for (int i = 0; i < 200; ++i) {
    const FrenetPose ego{0.0, CorridorCenter(corridor(rng), road), 0.0,
                         speed(rng)};
    const Trajectory t =
        GenerateTrajectory(ego, corridor(rng), ego.speed, road);
    // Independent sampling of the analytic curvature.
    for (int k = 0; k <= 400; ++k) {
      const double s = ego.s + t.horizon() * k / 400.0;
      ASSERT_LE(std::abs(t.CurvatureAt(s)), limits.MaxCurvature() + 1e-9);
    }
  }
}

TEST(TrajectoryTest, InfeasibleRequestThrows) {
  const RoadNetwork road = DefaultRoad();
  TrajectoryOptions options;
  options.min_horizon = 0.5;
  EXPECT_THROW(GenerateTrajectory({0.0, CorridorCenter(0, road), 0.0, 0.0}, 14,
                                  0.0, road, options),
               std::runtime_error);
}

TEST(TrajectoryTest, OffRoadEgoIsRejected) {
  const RoadNetwork road = DefaultRoad();
  EXPECT_THROW(GenerateTrajectory({0.0, 8.0, 0.0, 5.0}, 7, 5.0, road),
               std::domain_error);
}

TEST(TrajectoryTest, LateralProfileIsTheFittedPolynomial) {
  const RoadNetwork road = DefaultRoad();
  const FrenetPose ego{0.0, 0.3, 0.0, 10.0};
  const Trajectory t = GenerateTrajectory(ego, 10, 10.0, road);
  const auto c = FitQuintic(0.3, 0.0, 0.0, CorridorCenter(10, road), 0.0, 0.0,
                            t.horizon());
  for (double u : {0.0, 3.0, 11.0, 29.0}) {
    EXPECT_NEAR(t.LateralAt(u), Poly(c, u, 0), 1e-12);
    EXPECT_NEAR(t.SlopeAt(u), Poly(c, u, 1), 1e-12);
    EXPECT_NEAR(t.SecondDerivativeAt(u), Poly(c, u, 2), 1e-12);
  }
}

}  // namespace
}  // namespace hrl_cruise
