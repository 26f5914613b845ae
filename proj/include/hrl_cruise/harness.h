#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hrl_cruise/config.h"
#include "hrl_cruise/cruise_env.h"
#include "hrl_cruise/dqn.h"
#include "hrl_cruise/planners_rule.h"

namespace hrl_cruise {

// rl: learned BP and MoP; rule: rule BP and rule MoP; mixed: rule BP over the
// learned MoP.
enum class PlannerStack { kRl, kRule, kMixed };

const char* ToString(PlannerStack stack);
PlannerStack ParsePlannerStack(const std::string& text);

struct RunConfig {
  DynamicsMode mode = DynamicsMode::kPointFollow;
  PlannerStack stack = PlannerStack::kRl;
  uint64_t seed = 1;
  int64_t steps = 40'000;
  // Stops early after this many finished episodes when set.
  std::optional<int> max_episodes;
  std::string mop_model;
  std::string bp_model;

  // Throws ConfigError when a model the stack needs is missing.
  void Validate() const;
};

struct EpisodeStats {
  int episode = 0;
  int64_t length = 0;
  double bp_reward = 0.0;
  bool collided = false;
  int lane_changes = 0;
  double mean_speed_kph = 0.0;
};

// Per-1000-step averages over completed windows, plus per-episode rows.
struct EvalReport {
  std::string stack;
  std::string mode;
  int64_t steps = 0;
  int windows = 0;
  double avg_bp_reward = 0.0;
  double avg_collisions = 0.0;
  double avg_lane_changes = 0.0;
  double avg_speed_kph = 0.0;
  std::vector<EpisodeStats> episodes;
};

inline constexpr int kReportWindow = 1000;

// Decisions of one planner stack; keeps the rule BP's internal state.
class StackPolicy {
 public:
  StackPolicy(PlannerStack stack, const QNetwork* bp_net,
              const QNetwork* mop_net, const RuleBpConfig& rule_bp,
              const RoadNetwork& road);

  void Reset();
  BpAction ActBp(const CruiseEnv& env);
  MopAction ActMop(const CruiseEnv& env, BpAction bp);

 private:
  PlannerStack stack_;
  const QNetwork* bp_net_;
  const QNetwork* mop_net_;
  RuleBp rule_bp_;
};

// Episodes are reset with EpisodeSeed(run.seed, i), so stacks evaluated on the
// same seed see the same traffic. `trace` receives one JSON object per step.
EvalReport Evaluate(const EnvParams& env_params, const RunConfig& run,
                    const QNetwork* bp_net, const QNetwork* mop_net,
                    const RuleBpConfig& rule_bp, std::ostream* trace = nullptr);

// Loads the models the stack needs and runs Evaluate.
EvalReport EvaluateRun(const ExperimentConfig& config, const RunConfig& run,
                       std::ostream* trace = nullptr);

void WriteReportTable(std::ostream& out, const std::vector<EvalReport>& reports);
void WriteReportCsv(std::ostream& out, const std::vector<EvalReport>& reports);
void WriteEpisodesCsv(std::ostream& out, const EvalReport& report);

// Scripted lane change on an empty road: lane 0 at `speed`, switch-left
// commanded at t = 0 and held until the ego reaches lane 1.
struct LaneChangeResult {
  bool completed = false;
  double duration = 0.0;  // s until the ego enters the middle corridor
  std::vector<double> lateral;  // ego d per step, for inspection
};
LaneChangeResult RunLaneChange(const EnvParams& env_params,
                               const QNetwork* mop_net, double speed,
                               double time_limit = 30.0);

// Keep-lane behind a slower leader on an otherwise empty road.
struct FollowResult {
  bool collided = false;
  bool settled = false;       // ego speed came within 1 m/s of the leader
  double settle_time = 0.0;
  double min_gap_ratio = 0.0; // smallest gap / safe distance after settling
  std::vector<double> gaps;
  std::vector<double> speeds;
};
FollowResult RunFollow(const EnvParams& env_params, const QNetwork* mop_net,
                       double ego_speed, double leader_speed,
                       double initial_gap, double duration = 60.0);

struct TransferReport {
  EvalReport point;
  EvalReport bicycle;
  LaneChangeResult lane_change;  // bicycle mode
  FollowResult follow;           // bicycle mode
  double collision_ratio = 0.0;  // bicycle / point, 0 when both are 0
  bool lane_change_ok = false;   // duration within [6, 12] s
  bool follow_ok = false;        // gap never below half the safe distance
  bool collisions_ok = false;    // bicycle <= 2 x point
};

TransferReport RunTransfer(const ExperimentConfig& config, const RunConfig& run);
void WriteTransferReport(std::ostream& out, const TransferReport& report);

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct TraceRow {
  int64_t step = 0;
  double time = 0.0;
  double speed = 0.0;
  double lateral = 0.0;
  double front_gap = 0.0;
  int lane = 0;
};

// Reads an evaluation trace. Blank lines are skipped.
std::vector<TraceRow> ParseTrace(std::istream& in);
// Nothing is written for an empty trace.
void WriteReplayCsv(std::ostream& out, const std::vector<TraceRow>& rows);
// One text row per step with the ego marked in its lane.
void WriteReplayAscii(std::ostream& out, const std::vector<TraceRow>& rows,
                      int num_lanes);

}  // namespace hrl_cruise
