#pragma once

#include <array>
#include <vector>

namespace hrl_cruise {

// Straight multi-lane road. The reference line runs through the road center
// along +x; lanes and corridors are numbered from the rightmost one (d < 0).
struct RoadNetwork {
  int num_lanes = 3;
  double lane_width = 3.5;
  int corridors_per_lane = 5;
  double length = 1000.0;
  double speed_limit = 13.9;

  // Throws std::invalid_argument when the grid is malformed or a vehicle of
  // the given width does not fit in a lane.
  void Validate(double vehicle_width = 1.8) const;

  double Width() const { return num_lanes * lane_width; }
  double HalfWidth() const { return 0.5 * Width(); }
  double CorridorWidth() const { return lane_width / corridors_per_lane; }
  int NumCorridors() const { return num_lanes * corridors_per_lane; }
  int MiddleCorridorOfLane(int lane) const {
    return lane * corridors_per_lane + corridors_per_lane / 2;
  }
  int LaneOfCorridor(int corridor) const {
    return corridor / corridors_per_lane;
  }
  double LaneCenter(int lane) const;
  // Wraps s into [0, length) on the ring.
  double WrapS(double s) const;
  // Signed ring distance from `from` to `to`, in [-length/2, length/2).
  double RingDelta(double from, double to) const;
};

struct FrenetPose {
  double s = 0.0;
  double d = 0.0;
  double heading_offset = 0.0;
  double speed = 0.0;
};

struct CartesianPose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double speed = 0.0;
};

inline constexpr int kOffRoad = -1;

CartesianPose FrenetToCartesian(const FrenetPose& pose, const RoadNetwork& road);
FrenetPose CartesianToFrenet(const CartesianPose& pose, const RoadNetwork& road);

double CorridorCenter(int global_corridor, const RoadNetwork& road);

// Corridor containing lateral offset d. A point on the boundary between two
// corridors belongs to the right (lower) one. Returns kOffRoad outside the road.
int CorridorOf(double d, const RoadNetwork& road);

// Same convention as CorridorOf but at lane granularity.
int LaneOf(double d, const RoadNetwork& road);

struct VehicleLimits {
  double wheelbase = 2.7;
  double max_steer = 0.5;  // rad
  double MaxCurvature() const;
};

struct TrajectoryPoint {
  double s = 0.0;
  double d = 0.0;
};

// Lateral profile d(s) = quintic over [s_start, s_start + horizon], constant
// at the target corridor center afterwards.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(double s_start, double horizon, std::array<double, 6> coeffs,
             double extension, double spacing, double speed_setpoint,
             int target_corridor);

  static Trajectory Straight(double s_start, double d, double length,
                             double speed_setpoint, int target_corridor);

  const std::vector<TrajectoryPoint>& points() const { return points_; }
  bool empty() const { return points_.empty(); }
  double speed_setpoint() const { return speed_setpoint_; }
  void set_speed_setpoint(double v) { speed_setpoint_ = v; }
  int target_corridor() const { return target_corridor_; }
  double s_start() const { return s_start_; }
  double horizon() const { return horizon_; }
  double s_end() const { return points_.empty() ? s_start_ : points_.back().s; }
  double end_d() const { return LateralAt(s_start_ + horizon_); }

  // Evaluated on the unwrapped arclength axis of the trajectory.
  double LateralAt(double s) const;
  double SlopeAt(double s) const;
  double SecondDerivativeAt(double s) const;
  double CurvatureAt(double s) const;
  double MaxCurvature() const;

 private:
  double Local(double s) const;

  double s_start_ = 0.0;
  double horizon_ = 0.0;
  std::array<double, 6> coeffs_{};
  double speed_setpoint_ = 0.0;
  int target_corridor_ = 0;
  std::vector<TrajectoryPoint> points_;
};

struct TrajectoryOptions {
  double horizon_time = 3.0;   // s of travel at the current speed
  double min_horizon = 20.0;   // m
  double extension = 20.0;     // m past the horizon along the corridor
  double spacing = 1.0;        // m between samples
  VehicleLimits limits;
};

// Quintic lateral fit from the ego pose to the center of target_corridor with
// zero end slope and curvature. Throws std::runtime_error if the profile
// exceeds the steering curvature even after one 50% horizon extension.
Trajectory GenerateTrajectory(const FrenetPose& ego, int target_corridor,
                              double speed_setpoint, const RoadNetwork& road,
                              const TrajectoryOptions& options = {});

// Coefficients a0..a5 of the quintic matching (d, d', d'') at 0 and at length.
std::array<double, 6> FitQuintic(double d0, double slope0, double curv0,
                                 double d1, double slope1, double curv1,
                                 double length);

}  // namespace hrl_cruise
