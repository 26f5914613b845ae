#pragma once

#include <cstdint>
#include <random>

#include "hrl_cruise/cruise_env.h"

namespace hrl_cruise {

struct RuleBpConfig {
  double min_gain = 2.0;             // m/s below desired speed to overtake
  double min_safe_gap_front = 20.0;  // m
  double min_safe_gap_back = 15.0;   // m
  int cooldown = 25;                 // steps after a completed change
  double lookahead = 60.0;           // m, leaders beyond this are ignored
  double desired_speed = 13.9;       // m/s
  std::vector<double> lane_thresholds = {8.0, 10.0, 12.0};

  void Validate() const;
};

// Overtake on the left when the leader holds us back, return right when the
// right lane is safe and fast enough, otherwise keep the lane. A requested
// change is held until the ego reaches the target lane.
class RuleBp {
 public:
  explicit RuleBp(RuleBpConfig config, int num_lanes);

  BpAction Act(const BpObservation& obs);
  void Reset();

  int target_lane() const { return target_lane_; }

 private:
  bool LaneSafe(const NeighborGaps& gaps) const;
  // Speed the ego could hold in a lane given its nearest leader.
  double AttainableSpeed(const BpObservation& obs, const NeighborGaps& gaps) const;

  RuleBpConfig config_;
  int num_lanes_;
  int target_lane_ = -1;
  int cooldown_left_ = 0;
};

struct RuleMopConfig {
  double headway = 1.0;
  double standstill_gap = 2.0;
  double speed_up_margin = 1.2;
  double gap_tolerance_fraction = 0.2;
};

MopAction RuleMop(const MopObservation& obs, BpAction bp_action,
                  const RuleMopConfig& config = {});

struct RandomBpSchedule {
  int period = 100;
};

// Every `period` steps draws a target lane among the current and adjacent
// lanes, then steers toward it with Switch actions until it is reached.
class RandomBp {
 public:
  RandomBp(RandomBpSchedule schedule, int num_lanes, uint64_t seed);

  BpAction Act(int64_t step, int ego_lane);

  int target_lane() const { return target_lane_; }
  void set_target_lane(int lane) { target_lane_ = lane; }

 private:
  RandomBpSchedule schedule_;
  int num_lanes_;
  std::mt19937_64 rng_;
  int target_lane_ = -1;
};

}  // namespace hrl_cruise
