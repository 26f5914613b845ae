#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hrl_cruise/road_geometry.h"
#include "hrl_cruise/traffic_sim.h"

namespace hrl_cruise {

enum class BpAction { kKeepLane = 0, kSwitchLeft = 1, kSwitchRight = 2 };
inline constexpr int kNumBpActions = 3;

const char* ToString(BpAction action);
BpAction BpActionFromIndex(int index);

struct MopAction {
  int corridor_delta = 0;  // -1 right, +1 left
  int speed_delta = 0;     // m/s

  bool operator==(const MopAction&) const = default;
};
inline constexpr int kNumMopActions = 9;

// Index layout: (corridor_delta + 1) * 3 + (speed_delta + 1).
MopAction MopActionFromIndex(int index);
int MopActionIndex(const MopAction& action);

struct NeighborGaps {
  double front_gap = 0.0;
  double front_rel_speed = 0.0;
  double back_gap = 0.0;
  double back_rel_speed = 0.0;
};

struct BpObservation {
  static constexpr int kSize = 14;
  int ego_lane = 0;
  double ego_speed = 0.0;
  NeighborGaps left;
  NeighborGaps current;
  NeighborGaps right;

  std::vector<double> Raw() const;
  // Agent input: every entry in [-1, 1].
  std::vector<double> Features(const RoadNetwork& road, double max_gap) const;
};

struct CorridorSlot {
  int corridor = kOffRoad;  // global index, kOffRoad when outside the road
  bool blocked = false;
  double front_gap = 0.0;
  double front_gap_rate = 0.0;
  double back_gap = 0.0;
  double back_gap_rate = 0.0;
};

struct MopObservation {
  double ego_speed = 0.0;
  double speed_setpoint = 0.0;
  double bp_target_speed = 0.0;
  int current_corridor_offset = 0;  // ego corridor minus window middle
  int window_start = 0;             // global index of slot 0, may be off-road
  std::vector<CorridorSlot> slots;  // N_c entries, right to left

  int Size() const { return 4 + 4 * static_cast<int>(slots.size()); }
  int MiddleSlot() const { return static_cast<int>(slots.size()) / 2; }
  int EgoSlot() const { return MiddleSlot() + current_corridor_offset; }
  int WindowMiddle() const { return window_start + MiddleSlot(); }
  std::vector<double> Raw() const;
  std::vector<double> Features(const RoadNetwork& road, double max_gap) const;
};

struct RewardParams {
  std::vector<double> lane_thresholds = {8.0, 10.0, 12.0};  // right to left
  double left_change_penalty = -5.0;
  double headway = 1.0;        // tau, s
  double standstill_gap = 2.0; // d0, m
  double speed_tolerance = 1.0;
  double gap_tolerance_fraction = 0.2;
  bool accel_penalty = true;
  double accel_penalty_weight = 0.1;
  double accel_penalty_onset = 2.0;
};

double BpReward(int lane_t, int lane_prev, double speed,
                const std::vector<double>& thresholds,
                double left_change_penalty = -5.0);

// d = v * tau + d0. Throws std::domain_error for v < 0.
double SafeDistance(double v, double tau, double d0);

// Window blocked ahead: no slot offers a front gap beyond the safe distance d,
// so the obstacle cannot be bypassed inside the window.
bool AllCorridorsBlocked(const MopObservation& obs, double safe_distance);

// Smallest positive front gap in the window; 0 if every slot reports 0.
double MinFrontGap(const MopObservation& obs);

double MopReward(const MopObservation& obs, double ego_accel,
                 double bp_target_speed, const RewardParams& params);

// Lateral-extent based gap measurement for one corridor strip.
struct CorridorGaps {
  double front = 0.0;
  double back = 0.0;
};
CorridorGaps MeasureCorridorGaps(const WorldState& world, double lo, double hi,
                                 const RoadNetwork& road, double max_gap);

// Front/back gaps for every global corridor.
std::vector<CorridorGaps> MeasureAllCorridorGaps(const WorldState& world,
                                                 const RoadNetwork& road,
                                                 double max_gap);

BpObservation BuildBpObservation(const WorldState& world,
                                 const RoadNetwork& road, double max_gap);

struct WindowContext {
  double speed_setpoint = 0.0;
  double bp_target_speed = 0.0;
  double vehicle_width = 1.8;
  double max_gap = 100.0;
  double dt = 0.2;
  // Previous-step gaps per global corridor; empty means zero rates.
  const std::vector<CorridorGaps>* previous_gaps = nullptr;
};

// Switch actions toward a lane that does not exist are treated as KeepLane.
BpAction EffectiveBpAction(BpAction action, int ego_lane,
                           const RoadNetwork& road);

MopObservation BuildMopWindow(const WorldState& world, BpAction bp_action,
                              const RoadNetwork& road,
                              const WindowContext& context);

struct ActionLimits {
  double min_speed = 0.0;
  double max_speed = 13.9;
};

struct AbsoluteCommand {
  int corridor = 0;
  double speed_setpoint = 0.0;
};

AbsoluteCommand PostprocessAction(const MopAction& action,
                                  int current_corridor, double setpoint,
                                  const MopObservation& window,
                                  const RoadNetwork& road,
                                  const ActionLimits& limits);

// Seed of episode `episode` within a run; paired evaluations share it.
uint64_t EpisodeSeed(uint64_t run_seed, uint64_t episode);

class LifecycleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct EnvParams {
  RoadNetwork road;
  SimParams sim;
  SpawnConfig spawn;
  RewardParams reward;
  TrajectoryOptions trajectory;
  DynamicsMode mode = DynamicsMode::kPointFollow;
  double dt = 0.2;
  int episode_length = 1000;
  double max_gap = 100.0;
  // Empty means the road speed limit.
  std::optional<double> bp_target_speed;
  // Ego initial speed is drawn from [min, max] * speed_limit.
  double ego_speed_min_fraction = 0.5;
  double ego_speed_max_fraction = 1.0;
};

struct StepInfo {
  bool collision = false;
  bool off_road = false;
  bool blocked_entry = false;  // ego moved into a blocked window corridor
  int lane = 0;
  int corridor = 0;
  double speed = 0.0;
  double accel = 0.0;
  int target_corridor = 0;
  double speed_setpoint = 0.0;
  std::string termination_cause;  // "", "collision", "horizon"
};

struct StepResult {
  BpObservation bp_observation;
  // Window under the same BP action, used for the MoP reward and TD target.
  MopObservation mop_observation;
  double bp_reward = 0.0;
  double mop_reward = 0.0;
  bool terminated = false;
  StepInfo info;
};

// Gym-style episode wrapper around the traffic world.
class CruiseEnv {
 public:
  explicit CruiseEnv(EnvParams params);

  // Spawns a fresh world. Episode i of a seed always sees the same traffic.
  BpObservation Reset(uint64_t seed);
  // Starts from a hand-built world (scripted scenarios).
  BpObservation ResetWithWorld(WorldState world);

  BpObservation ObserveBp() const;
  MopObservation ObserveMop(BpAction bp_action) const;

  StepResult Step(BpAction bp_action, const MopAction& mop_action);

  const WorldState& world() const { return world_; }
  const EnvParams& params() const { return params_; }
  const Trajectory& last_trajectory() const { return trajectory_; }
  double speed_setpoint() const { return setpoint_; }
  double bp_target_speed() const;
  int ego_lane() const;
  int ego_corridor() const;
  bool terminated() const { return terminated_; }
  int64_t steps_in_episode() const { return world_.step_count; }

 private:
  WindowContext Context() const;
  bool KeepsTrajectory(int target_corridor) const;

  EnvParams params_;
  WorldState world_;
  Trajectory trajectory_;
  std::vector<CorridorGaps> previous_gaps_;
  double setpoint_ = 0.0;
  bool terminated_ = true;
};

}  // namespace hrl_cruise
