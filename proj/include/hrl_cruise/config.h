#pragma once

#include <stdexcept>
#include <string>

#include "hrl_cruise/cruise_env.h"
#include "hrl_cruise/dqn.h"
#include "hrl_cruise/planners_rule.h"

namespace hrl_cruise {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything a run can be configured with. Sections of the JSON file:
//   road     lanes, lane_width_m, corridors_per_lane, length_m, speed_limit_mps
//   scenario min_vehicles, max_vehicles, mode, dt, episode_length, max_gap_m,
//            lane_change_probability, bp_target_speed_mps
//   reward   lane_thresholds, headway_s, standstill_gap_m, accel_penalty
//   train    shared agent settings, with optional "mop" / "bp" overrides
//   rule_bp  rule-based behavior planner tuning
struct ExperimentConfig {
  EnvParams env;
  TrainConfig mop_train;
  TrainConfig bp_train;
  RuleBpConfig rule_bp;
};

// Defaults used when no config file is given.
ExperimentConfig DefaultExperimentConfig();

// Unknown keys and wrongly typed values raise ConfigError.
ExperimentConfig ParseExperimentConfig(const std::string& json_text);
ExperimentConfig LoadExperimentConfig(const std::string& path);

}  // namespace hrl_cruise
