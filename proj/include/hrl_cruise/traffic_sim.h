#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "hrl_cruise/road_geometry.h"

namespace hrl_cruise {

struct VehicleState {
  int id = 0;
  FrenetPose pose;  // pose.speed is the vehicle speed
  double accel = 0.0;
  double length = 4.5;
  double width = 1.8;

  double speed() const { return pose.speed; }
};

enum class DynamicsMode { kPointFollow, kBicycle };

const char* ToString(DynamicsMode mode);
DynamicsMode ParseDynamicsMode(const std::string& text);

struct IdmParams {
  double time_headway = 1.5;  // T
  double max_accel = 1.5;     // a
  double comfort_decel = 2.0; // b
  double min_gap = 2.0;       // s0
  double exponent = 4.0;
};

// Ambient driver: IDM car following plus occasional gap-accepting lane
// changes with a smooth lateral profile.
struct AmbientVehicle {
  VehicleState state;
  double desired_speed = 10.0;
  int lane = 0;
  int target_lane = 0;
  double lane_change_from = 0.0;
  double lane_change_elapsed = 0.0;

  bool changing_lane() const { return lane != target_lane; }
};

struct SimParams {
  double max_accel = 4.0;       // a_max, ego and ambient acceleration bound
  double max_decel = 6.0;       // b_max, ambient emergency braking
  IdmParams idm;
  VehicleLimits limits;
  double speed_gain = 3.0;      // 1/s, bicycle speed loop
  int bicycle_substeps = 10;
  double lane_change_probability = 0.001;  // per vehicle per step
  double lane_change_min_gap = 30.0;       // m, both sides in target lane
  double lane_change_duration = 4.0;       // s
  double vehicle_length = 4.5;
  double vehicle_width = 1.8;
};

struct WorldState {
  VehicleState ego;
  std::vector<AmbientVehicle> others;
  double time = 0.0;
  int64_t step_count = 0;
  std::mt19937_64 rng{0};
};

struct SpawnConfig {
  int min_vehicles = 10;
  int max_vehicles = 20;
  double min_desired_fraction = 0.5;
  double max_desired_fraction = 0.95;
  double min_initial_gap = 15.0;
  int ego_lane = 0;
  double ego_speed = 10.0;
};

// Ego at s = 0 in spawn.ego_lane; ambient vehicles placed uniformly over lanes
// with bumper gaps of at least min_initial_gap to every vehicle in the lane.
WorldState SpawnWorld(const RoadNetwork& road, const SpawnConfig& spawn,
                      const SimParams& params, uint64_t seed);

inline constexpr double kNoLeader = std::numeric_limits<double>::infinity();

// IDM acceleration bounded to [-max_decel, idm.max_accel]. Pass
// leader_gap = kNoLeader for a free road.
double AmbientAccel(const VehicleState& follower, double desired_speed,
                    double leader_gap, double leader_speed,
                    const IdmParams& idm, double max_decel);

struct ControlCommand {
  double steer = 0.0;
  double accel = 0.0;
  bool fault = false;
};

// Pure pursuit toward the trajectory point max(0.5 v, 3 m) ahead plus a
// proportional speed loop; both saturated at the vehicle limits.
ControlCommand TrackTrajectory(const VehicleState& ego,
                               const Trajectory& trajectory, double dt,
                               const SimParams& params);

WorldState StepWorld(const WorldState& world, const Trajectory& trajectory,
                     double dt, DynamicsMode mode, const RoadNetwork& road,
                     const SimParams& params);

// Separating-axis test between oriented boxes, ring-aware in s.
bool BoxesOverlap(const VehicleState& a, const VehicleState& b,
                  const RoadNetwork& road);
bool DetectCollision(const WorldState& world, const RoadNetwork& road);

// Number of overlapping ambient pairs; used to audit the traffic model.
int CountAmbientCollisions(const WorldState& world, const RoadNetwork& road);

// One JSON object per call, terminated by a newline.
void AppendSnapshot(std::ostream& out, const WorldState& world);

}  // namespace hrl_cruise
