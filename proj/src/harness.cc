#include "hrl_cruise/harness.h"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

namespace hrl_cruise {

namespace {

constexpr double kMpsToKph = 3.6;

std::string Format(const char* fmt, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), fmt, value);
  return buffer;
}

int GreedyFor(const QNetwork& net, const std::vector<double>& features) {
  return GreedyAction(net.Forward(features));
}

MopAction MopDecision(const QNetwork* mop_net, const CruiseEnv& env,
                      BpAction bp) {
  const MopObservation obs = env.ObserveMop(bp);
  if (mop_net == nullptr) {
    RuleMopConfig rule;
    rule.headway = env.params().reward.headway;
    rule.standstill_gap = env.params().reward.standstill_gap;
    return RuleMop(obs, bp, rule);
  }
  return MopActionFromIndex(
      GreedyFor(*mop_net, obs.Features(env.params().road, env.params().max_gap)));
}

// Empty road with the ego on the center of `lane`.
WorldState ScriptedWorld(const RoadNetwork& road, int lane, double speed) {
  WorldState world;
  world.ego.id = 0;
  world.ego.pose = {0.0, road.LaneCenter(lane), 0.0, speed};
  world.rng.seed(7);
  return world;
}

EnvParams ScriptedParams(EnvParams params) {
  params.sim.lane_change_probability = 0.0;
  params.episode_length = std::numeric_limits<int>::max();
  return params;
}

void WriteTraceRecord(std::ostream& out, const CruiseEnv& env, BpAction bp,
                      const MopAction& mop, const StepResult& result,
                      int episode) {
  const VehicleState& ego = env.world().ego;
  nlohmann::json record;
  record["episode"] = episode;
  record["step"] = env.world().step_count;
  record["t"] = env.world().time;
  record["ego"] = {{"s", ego.pose.s},
                   {"d", ego.pose.d},
                   {"heading", ego.pose.heading_offset},
                   {"speed", ego.pose.speed},
                   {"accel", ego.accel}};
  record["lane"] = result.info.lane;
  record["corridor"] = result.info.corridor;
  record["front_gap"] = result.bp_observation.current.front_gap;
  record["bp_action"] = ToString(bp);
  record["mop_action"] = {{"corridor_delta", mop.corridor_delta},
                          {"speed_delta", mop.speed_delta}};
  record["speed_setpoint"] = result.info.speed_setpoint;
  record["bp_reward"] = result.bp_reward;
  record["mop_reward"] = result.mop_reward;
  record["termination"] = result.info.termination_cause;
  record["blocked_entry"] = result.info.blocked_entry;
  out << record.dump() << '\n';
}

}  // namespace

const char* ToString(PlannerStack stack) {
  switch (stack) {
    case PlannerStack::kRl: return "rl";
    case PlannerStack::kRule: return "rule";
    case PlannerStack::kMixed: return "mixed";
  }
  return "?";
}

PlannerStack ParsePlannerStack(const std::string& text) {
  if (text == "rl") return PlannerStack::kRl;
  if (text == "rule") return PlannerStack::kRule;
  if (text == "mixed") return PlannerStack::kMixed;
  throw std::invalid_argument("unknown stack '" + text + "'");
}

void RunConfig::Validate() const {
  if (steps <= 0) throw ConfigError("run: steps must be > 0");
  if (max_episodes && *max_episodes <= 0) {
    throw ConfigError("run: episodes must be > 0");
  }
  auto require = [](const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string("missing ") + what);
    if (!std::filesystem::exists(path)) {
      throw ConfigError(std::string(what) + " not found: " + path);
    }
  };
  if (stack != PlannerStack::kRule) require(mop_model, "MoP model");
  if (stack == PlannerStack::kRl) require(bp_model, "BP model");
}

StackPolicy::StackPolicy(PlannerStack stack, const QNetwork* bp_net,
                         const QNetwork* mop_net, const RuleBpConfig& rule_bp,
                         const RoadNetwork& road)
    : stack_(stack),
      bp_net_(bp_net),
      mop_net_(mop_net),
      rule_bp_(rule_bp, road.num_lanes) {
  if (stack_ == PlannerStack::kRl && bp_net_ == nullptr) {
    throw std::invalid_argument("rl stack needs a BP network");
  }
  if (stack_ != PlannerStack::kRule && mop_net_ == nullptr) {
    throw std::invalid_argument("stack needs a MoP network");
  }
}

void StackPolicy::Reset() { rule_bp_.Reset(); }

BpAction StackPolicy::ActBp(const CruiseEnv& env) {
  const BpObservation obs = env.ObserveBp();
  if (stack_ == PlannerStack::kRl) {
    return BpActionFromIndex(GreedyFor(
        *bp_net_, obs.Features(env.params().road, env.params().max_gap)));
  }
  return rule_bp_.Act(obs);
}

MopAction StackPolicy::ActMop(const CruiseEnv& env, BpAction bp) {
  return MopDecision(stack_ == PlannerStack::kRule ? nullptr : mop_net_, env,
                     bp);
}

EvalReport Evaluate(const EnvParams& env_params, const RunConfig& run,
                    const QNetwork* bp_net, const QNetwork* mop_net,
                    const RuleBpConfig& rule_bp, std::ostream* trace) {
  EnvParams params = env_params;
  params.mode = run.mode;
  CruiseEnv env(params);
  StackPolicy policy(run.stack, bp_net, mop_net, rule_bp, params.road);

  EvalReport report;
  report.stack = ToString(run.stack);
  report.mode = ToString(run.mode);

  // Totals over completed windows and the window in progress.
  struct Sums {
    double reward = 0.0;
    double speed = 0.0;
    int64_t collisions = 0;
    int64_t lane_changes = 0;
  };
  Sums done;
  Sums open;

  EpisodeStats episode;
  double episode_speed = 0.0;
  env.Reset(EpisodeSeed(run.seed, 0));
  policy.Reset();
  int64_t step = 0;
  for (; step < run.steps; ++step) {
    const int lane_before = env.ego_lane();
    const BpAction bp = policy.ActBp(env);
    const MopAction mop = policy.ActMop(env, bp);
    const StepResult result = env.Step(bp, mop);
    const bool crashed = result.info.collision || result.info.off_road;
    const bool changed = result.info.lane != lane_before;

    open.reward += result.bp_reward;
    open.speed += result.info.speed;
    open.collisions += crashed ? 1 : 0;
    open.lane_changes += changed ? 1 : 0;
    if ((step + 1) % kReportWindow == 0) {
      done.reward += open.reward;
      done.speed += open.speed;
      done.collisions += open.collisions;
      done.lane_changes += open.lane_changes;
      open = Sums{};
    }
    ++episode.length;
    episode.bp_reward += result.bp_reward;
    episode.lane_changes += changed ? 1 : 0;
    episode_speed += result.info.speed;
    if (trace != nullptr) {
      WriteTraceRecord(*trace, env, bp, mop, result, episode.episode);
    }

    if (result.terminated) {
      episode.collided = crashed;
      episode.mean_speed_kph = episode_speed / episode.length * kMpsToKph;
      report.episodes.push_back(episode);
      const int next = episode.episode + 1;
      if (run.max_episodes && next >= *run.max_episodes) {
        ++step;
        break;
      }
      episode = EpisodeStats{};
      episode.episode = next;
      episode_speed = 0.0;
      env.Reset(EpisodeSeed(run.seed, next));
      policy.Reset();
    }
  }
  report.steps = step;
  report.windows = static_cast<int>(step / kReportWindow);
  if (report.windows > 0) {
    const double windows = report.windows;
    report.avg_bp_reward = done.reward / windows;
    report.avg_collisions = done.collisions / windows;
    report.avg_lane_changes = done.lane_changes / windows;
    report.avg_speed_kph = done.speed / (windows * kReportWindow) * kMpsToKph;
  }
  return report;
}

EvalReport EvaluateRun(const ExperimentConfig& config, const RunConfig& run,
                       std::ostream* trace) {
  run.Validate();
  std::optional<QNetwork> bp_net;
  std::optional<QNetwork> mop_net;
  if (run.stack != PlannerStack::kRule) mop_net = LoadModel(run.mop_model);
  if (run.stack == PlannerStack::kRl) bp_net = LoadModel(run.bp_model);
  return Evaluate(config.env, run, bp_net ? &*bp_net : nullptr,
                  mop_net ? &*mop_net : nullptr, config.rule_bp, trace);
}

void WriteReportTable(std::ostream& out,
                      const std::vector<EvalReport>& reports) {
  char line[200];
  std::snprintf(line, sizeof(line), "%-6s %-8s %8s %12s %12s %12s %12s\n",
                "stack", "mode", "steps", "bp_reward", "collisions",
                "lane_chg", "speed_kph");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line),
                  "%-6s %-8s %8" PRId64 " %12.3f %12.3f %12.3f %12.3f\n",
                  r.stack.c_str(), r.mode.c_str(), r.steps, r.avg_bp_reward,
                  r.avg_collisions, r.avg_lane_changes, r.avg_speed_kph);
    out << line;
  }
}

void WriteReportCsv(std::ostream& out, const std::vector<EvalReport>& reports) {
  out << "stack,mode,steps,windows,avg_bp_reward,avg_collisions,"
         "avg_lane_changes,avg_speed_kph,episodes\n";
  for (const auto& r : reports) {
    out << r.stack << ',' << r.mode << ',' << r.steps << ',' << r.windows << ','
        << Format("%.6f", r.avg_bp_reward) << ','
        << Format("%.6f", r.avg_collisions) << ','
        << Format("%.6f", r.avg_lane_changes) << ','
        << Format("%.6f", r.avg_speed_kph) << ',' << r.episodes.size() << '\n';
  }
}

void WriteEpisodesCsv(std::ostream& out, const EvalReport& report) {
  out << "episode,length,bp_reward,collided,lane_changes,mean_speed_kph\n";
  for (const auto& e : report.episodes) {
    out << e.episode << ',' << e.length << ',' << Format("%.6f", e.bp_reward)
        << ',' << (e.collided ? 1 : 0) << ',' << e.lane_changes << ','
        << Format("%.6f", e.mean_speed_kph) << '\n';
  }
}

LaneChangeResult RunLaneChange(const EnvParams& env_params,
                               const QNetwork* mop_net, double speed,
                               double time_limit) {
  const RoadNetwork& road = env_params.road;
  if (road.num_lanes < 2) {
    throw std::invalid_argument("lane change needs at least two lanes");
  }
  CruiseEnv env(ScriptedParams(env_params));
  env.ResetWithWorld(ScriptedWorld(road, 0, speed));
  const int goal = road.MiddleCorridorOfLane(1);

  LaneChangeResult result;
  while (env.world().time < time_limit - 1e-9) {
    const BpAction bp =
        env.ego_lane() < 1 ? BpAction::kSwitchLeft : BpAction::kKeepLane;
    const StepResult step = env.Step(bp, MopDecision(mop_net, env, bp));
    result.lateral.push_back(env.world().ego.pose.d);
    if (step.terminated) break;
    if (env.ego_corridor() == goal) {
      result.completed = true;
      result.duration = env.world().time;
      break;
    }
  }
  return result;
}

FollowResult RunFollow(const EnvParams& env_params, const QNetwork* mop_net,
                       double ego_speed, double leader_speed,
                       double initial_gap, double duration) {
  const RoadNetwork& road = env_params.road;
  CruiseEnv env(ScriptedParams(env_params));
  WorldState world = ScriptedWorld(road, 0, ego_speed);
  AmbientVehicle leader;
  leader.state.id = 1;
  leader.state.length = env_params.sim.vehicle_length;
  leader.state.width = env_params.sim.vehicle_width;
  leader.state.pose = {world.ego.length + initial_gap, road.LaneCenter(0), 0.0,
                       leader_speed};
  leader.desired_speed = leader_speed;
  world.others.push_back(leader);
  env.ResetWithWorld(std::move(world));

  const RewardParams& reward = env_params.reward;
  FollowResult result;
  result.min_gap_ratio = std::numeric_limits<double>::infinity();
  while (env.world().time < duration - 1e-9) {
    const BpAction bp = BpAction::kKeepLane;
    const StepResult step = env.Step(bp, MopDecision(mop_net, env, bp));
    const double v = env.world().ego.speed();
    const double gap = step.bp_observation.current.front_gap;
    result.gaps.push_back(gap);
    result.speeds.push_back(v);
    if (step.info.collision || step.info.off_road) {
      result.collided = true;
      result.min_gap_ratio = 0.0;
      break;
    }
    if (!result.settled && std::abs(v - leader_speed) < 1.0) {
      result.settled = true;
      result.settle_time = env.world().time;
    }
    if (result.settled) {
      const double d = SafeDistance(v, reward.headway, reward.standstill_gap);
      result.min_gap_ratio = std::min(result.min_gap_ratio, gap / d);
    }
  }
  if (!result.settled) result.min_gap_ratio = 0.0;
  return result;
}

TransferReport RunTransfer(const ExperimentConfig& config,
                           const RunConfig& run) {
  RunConfig checked = run;
  checked.stack = PlannerStack::kRl;
  checked.Validate();
  const QNetwork mop = LoadModel(run.mop_model);
  const QNetwork bp = LoadModel(run.bp_model);

  TransferReport report;
  checked.mode = DynamicsMode::kPointFollow;
  report.point = Evaluate(config.env, checked, &bp, &mop, config.rule_bp);
  checked.mode = DynamicsMode::kBicycle;
  report.bicycle = Evaluate(config.env, checked, &bp, &mop, config.rule_bp);

  EnvParams bicycle = config.env;
  bicycle.mode = DynamicsMode::kBicycle;
  const double limit = bicycle.road.speed_limit;
  report.lane_change = RunLaneChange(bicycle, &mop, limit);
  report.follow = RunFollow(bicycle, &mop, limit, 0.6 * limit, 60.0);

  const double p = report.point.avg_collisions;
  const double b = report.bicycle.avg_collisions;
  report.collision_ratio =
      p > 0.0 ? b / p : (b > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  report.lane_change_ok = report.lane_change.completed &&
                          report.lane_change.duration >= 6.0 &&
                          report.lane_change.duration <= 12.0;
  report.follow_ok = !report.follow.collided && report.follow.settled &&
                     report.follow.min_gap_ratio >= 0.5;
  report.collisions_ok = b <= 2.0 * p;
  return report;
}

void WriteTransferReport(std::ostream& out, const TransferReport& report) {
  WriteReportTable(out, {report.point, report.bicycle});
  char line[200];
  std::snprintf(line, sizeof(line),
                "lane change (bicycle): %s, %.1f s [%s]\n",
                report.lane_change.completed ? "completed" : "not completed",
                report.lane_change.duration,
                report.lane_change_ok ? "ok" : "FAIL");
  out << line;
  std::snprintf(line, sizeof(line),
                "following (bicycle): settled at %.1f s, min gap %.2f d [%s]\n",
                report.follow.settle_time, report.follow.min_gap_ratio,
                report.follow_ok ? "ok" : "FAIL");
  out << line;
  std::snprintf(line, sizeof(line),
                "collision ratio bicycle/point: %.3f [%s]\n",
                report.collision_ratio, report.collisions_ok ? "ok" : "FAIL");
  out << line;
}

std::vector<TraceRow> ParseTrace(std::istream& in) {
  std::vector<TraceRow> rows;
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw TraceParseError(line, e.what());
    }
    try {
      TraceRow row;
      row.step = record.at("step").get<int64_t>();
      row.time = record.at("t").get<double>();
      row.speed = record.at("ego").at("speed").get<double>();
      row.lateral = record.at("ego").at("d").get<double>();
      row.front_gap = record.at("front_gap").get<double>();
      row.lane = record.at("lane").get<int>();
      rows.push_back(row);
    } catch (const nlohmann::json::exception& e) {
      throw TraceParseError(line, e.what());
    }
  }
  return rows;
}

void WriteReplayCsv(std::ostream& out, const std::vector<TraceRow>& rows) {
  if (rows.empty()) return;
  out << "step,t,speed,lateral,front_gap,lane\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%" PRId64 ",%.3f,%.6f,%.6f,%.6f,%d\n",
                  r.step, r.time, r.speed, r.lateral, r.front_gap, r.lane);
    out << line;
  }
}

void WriteReplayAscii(std::ostream& out, const std::vector<TraceRow>& rows,
                      int num_lanes) {
  char line[160];
  for (const auto& r : rows) {
    std::string lanes;
    // Leftmost lane first, as seen from behind the ego.
    for (int lane = num_lanes - 1; lane >= 0; --lane) {
      lanes += lane == r.lane ? "| E " : "|   ";
    }
    lanes += "|";
    std::snprintf(line, sizeof(line), "%8.1f %s v=%5.1f gap=%6.1f\n", r.time,
                  lanes.c_str(), r.speed, r.front_gap);
    out << line;
  }
}

}  // namespace hrl_cruise
