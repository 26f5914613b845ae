#include "hrl_cruise/road_geometry.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hrl_cruise {

void RoadNetwork::Validate(double vehicle_width) const {
  if (num_lanes < 1) throw std::invalid_argument("road: lanes must be >= 1");
  if (corridors_per_lane < 3 || corridors_per_lane % 2 == 0) {
    throw std::invalid_argument(
        "road: corridors_per_lane must be odd and >= 3, got " +
        std::to_string(corridors_per_lane));
  }
  if (!(lane_width > vehicle_width)) {
    throw std::invalid_argument("road: lane_width must exceed vehicle width");
  }
  if (!(length > 0.0)) throw std::invalid_argument("road: length must be > 0");
  if (!(speed_limit > 0.0)) {
    throw std::invalid_argument("road: speed_limit must be > 0");
  }
}

double RoadNetwork::LaneCenter(int lane) const {
  return -HalfWidth() + (lane + 0.5) * lane_width;
}

double RoadNetwork::WrapS(double s) const {
  double w = std::fmod(s, length);
  if (w < 0.0) w += length;
  return w;
}

double RoadNetwork::RingDelta(double from, double to) const {
  double delta = std::fmod(to - from, length);
  if (delta < -0.5 * length) delta += length;
  if (delta >= 0.5 * length) delta -= length;
  return delta;
}

CartesianPose FrenetToCartesian(const FrenetPose& pose,
                                const RoadNetwork& road) {
  if (!(pose.s >= 0.0 && pose.s <= road.length) || !std::isfinite(pose.d)) {
    throw std::domain_error("frenet pose outside road: s=" +
                            std::to_string(pose.s));
  }
  return {pose.s, pose.d, pose.heading_offset, pose.speed};
}

FrenetPose CartesianToFrenet(const CartesianPose& pose,
                             const RoadNetwork& road) {
  if (!(pose.x >= 0.0 && pose.x <= road.length) || !std::isfinite(pose.y)) {
    throw std::domain_error("cartesian pose outside road: x=" +
                            std::to_string(pose.x));
  }
  return {pose.x, pose.y, pose.yaw, pose.speed};
}

double CorridorCenter(int global_corridor, const RoadNetwork& road) {
  if (global_corridor < 0 || global_corridor >= road.NumCorridors()) {
    throw std::domain_error("invalid corridor index " +
                            std::to_string(global_corridor));
  }
  return -road.HalfWidth() + (global_corridor + 0.5) * road.CorridorWidth();
}

namespace {

int CellOf(double d, double half_width, double cell_width, int cells) {
  if (!(d >= -half_width && d <= half_width)) return kOffRoad;
  // Boundaries go to the lower cell: (k, k+1] maps to k.
  const double x = (d + half_width) / cell_width;
  const int k = static_cast<int>(std::ceil(x)) - 1;
  return std::clamp(k, 0, cells - 1);
}

}  // namespace

int CorridorOf(double d, const RoadNetwork& road) {
  return CellOf(d, road.HalfWidth(), road.CorridorWidth(), road.NumCorridors());
}

int LaneOf(double d, const RoadNetwork& road) {
  return CellOf(d, road.HalfWidth(), road.lane_width, road.num_lanes);
}

double VehicleLimits::MaxCurvature() const {
  return std::tan(max_steer) / wheelbase;
}

std::array<double, 6> FitQuintic(double d0, double slope0, double curv0,
                                 double d1, double slope1, double curv1,
                                 double length) {
  // Closed form of the 3x3 system for a3..a5.
  const double L = length;
  const double L2 = L * L;
  const double L3 = L2 * L;
  const double a0 = d0;
  const double a1 = slope0;
  const double a2 = 0.5 * curv0;
  const double h = d1 - (a0 + a1 * L + a2 * L2);
  const double hp = slope1 - (a1 + 2.0 * a2 * L);
  const double hpp = curv1 - 2.0 * a2;
  const double a3 = (20.0 * h - 8.0 * hp * L + hpp * L2) / (2.0 * L3);
  const double a4 = (-30.0 * h + 14.0 * hp * L - 2.0 * hpp * L2) / (2.0 * L3 * L);
  const double a5 = (12.0 * h - 6.0 * hp * L + hpp * L2) / (2.0 * L3 * L2);
  return {a0, a1, a2, a3, a4, a5};
}

Trajectory::Trajectory(double s_start, double horizon,
                       std::array<double, 6> coeffs, double extension,
                       double spacing, double speed_setpoint,
                       int target_corridor)
    : s_start_(s_start),
      horizon_(horizon),
      coeffs_(coeffs),
      speed_setpoint_(speed_setpoint),
      target_corridor_(target_corridor) {
  const double total = horizon + extension;
  const int n = static_cast<int>(std::ceil(total / spacing));
  points_.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double s = s_start + std::min(i * spacing, total);
    points_.push_back({s, LateralAt(s)});
  }
}

Trajectory Trajectory::Straight(double s_start, double d, double length,
                                double speed_setpoint, int target_corridor) {
  return Trajectory(s_start, length, {d, 0, 0, 0, 0, 0}, 0.0, 1.0,
                    speed_setpoint, target_corridor);
}

double Trajectory::Local(double s) const {
  return std::clamp(s - s_start_, 0.0, horizon_);
}

double Trajectory::LateralAt(double s) const {
  const double u = Local(s);
  const auto& c = coeffs_;
  return c[0] + u * (c[1] + u * (c[2] + u * (c[3] + u * (c[4] + u * c[5]))));
}

double Trajectory::SlopeAt(double s) const {
  if (s - s_start_ > horizon_) return 0.0;
  const double u = Local(s);
  const auto& c = coeffs_;
  return c[1] + u * (2 * c[2] + u * (3 * c[3] + u * (4 * c[4] + u * 5 * c[5])));
}

double Trajectory::SecondDerivativeAt(double s) const {
  if (s - s_start_ > horizon_) return 0.0;
  const double u = Local(s);
  const auto& c = coeffs_;
  return 2 * c[2] + u * (6 * c[3] + u * (12 * c[4] + u * 20 * c[5]));
}

double Trajectory::CurvatureAt(double s) const {
  const double slope = SlopeAt(s);
  return SecondDerivativeAt(s) / std::pow(1.0 + slope * slope, 1.5);
}

double Trajectory::MaxCurvature() const {
  double kappa = 0.0;
  const int samples = 200;
  for (int i = 0; i <= samples; ++i) {
    const double s = s_start_ + horizon_ * i / samples;
    kappa = std::max(kappa, std::abs(CurvatureAt(s)));
  }
  return kappa;
}

Trajectory GenerateTrajectory(const FrenetPose& ego, int target_corridor,
                              double speed_setpoint, const RoadNetwork& road,
                              const TrajectoryOptions& options) {
  const double target_d = CorridorCenter(target_corridor, road);
  if (CorridorOf(ego.d, road) == kOffRoad) {
    throw std::domain_error("ego off-road at d=" + std::to_string(ego.d));
  }
  const double slope = std::tan(ego.heading_offset);
  double horizon =
      std::max(options.horizon_time * ego.speed, options.min_horizon);
  const double kappa_max = options.limits.MaxCurvature();
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto coeffs =
        FitQuintic(ego.d, slope, 0.0, target_d, 0.0, 0.0, horizon);
    Trajectory trajectory(ego.s, horizon, coeffs, options.extension,
                          options.spacing, speed_setpoint, target_corridor);
    if (trajectory.MaxCurvature() <= kappa_max) return trajectory;
    horizon *= 1.5;
  }
  throw std::runtime_error("no feasible trajectory to corridor " +
                           std::to_string(target_corridor));
}

}  // namespace hrl_cruise
