#include "hrl_cruise/cruise_env.h"

#include <algorithm>
#include <cmath>
#include <utility>

namespace hrl_cruise {

const char* ToString(BpAction action) {
  switch (action) {
    case BpAction::kKeepLane:
      return "keep";
    case BpAction::kSwitchLeft:
      return "left";
    case BpAction::kSwitchRight:
      return "right";
  }
  return "?";
}

BpAction BpActionFromIndex(int index) {
  if (index < 0 || index >= kNumBpActions) {
    throw std::out_of_range("bp action index " + std::to_string(index));
  }
  return static_cast<BpAction>(index);
}

MopAction MopActionFromIndex(int index) {
  if (index < 0 || index >= kNumMopActions) {
    throw std::out_of_range("mop action index " + std::to_string(index));
  }
  return {index / 3 - 1, index % 3 - 1};
}

int MopActionIndex(const MopAction& action) {
  return (action.corridor_delta + 1) * 3 + (action.speed_delta + 1);
}

namespace {

// m of lateral tracking error before the path is refit from the ego pose.
constexpr double kTrajectoryTolerance = 0.2;

double Clip(double x, double lo, double hi) { return std::clamp(x, lo, hi); }

void AppendGaps(std::vector<double>& out, const NeighborGaps& g) {
  out.insert(out.end(),
             {g.front_gap, g.front_rel_speed, g.back_gap, g.back_rel_speed});
}

}  // namespace

std::vector<double> BpObservation::Raw() const {
  std::vector<double> out = {static_cast<double>(ego_lane), ego_speed};
  AppendGaps(out, left);
  AppendGaps(out, current);
  AppendGaps(out, right);
  return out;
}

std::vector<double> BpObservation::Features(const RoadNetwork& road,
                                            double max_gap) const {
  const double v = road.speed_limit;
  std::vector<double> out;
  out.reserve(kSize);
  out.push_back(road.num_lanes > 1
                    ? static_cast<double>(ego_lane) / (road.num_lanes - 1)
                    : 0.0);
  out.push_back(Clip(ego_speed / v, 0.0, 1.0));
  for (const NeighborGaps* g : {&left, &current, &right}) {
    out.push_back(Clip(g->front_gap / max_gap, 0.0, 1.0));
    out.push_back(Clip(g->front_rel_speed / v, -1.0, 1.0));
    out.push_back(Clip(g->back_gap / max_gap, 0.0, 1.0));
    out.push_back(Clip(g->back_rel_speed / v, -1.0, 1.0));
  }
  return out;
}

std::vector<double> MopObservation::Raw() const {
  std::vector<double> out = {ego_speed, speed_setpoint, bp_target_speed,
                             static_cast<double>(current_corridor_offset)};
  for (const auto& slot : slots) {
    out.insert(out.end(), {slot.front_gap, slot.front_gap_rate, slot.back_gap,
                           slot.back_gap_rate});
  }
  return out;
}

std::vector<double> MopObservation::Features(const RoadNetwork& road,
                                             double max_gap) const {
  const double v = road.speed_limit;
  const double half = std::max(1, static_cast<int>(slots.size()) / 2);
  std::vector<double> out;
  out.reserve(Size());
  out.push_back(Clip(ego_speed / v, 0.0, 1.0));
  out.push_back(Clip(speed_setpoint / v, 0.0, 1.0));
  out.push_back(Clip(bp_target_speed / v, 0.0, 1.0));
  out.push_back(Clip(current_corridor_offset / half, -1.0, 1.0));
  for (const auto& slot : slots) {
    out.push_back(Clip(slot.front_gap / max_gap, 0.0, 1.0));
    out.push_back(Clip(slot.front_gap_rate / v, -1.0, 1.0));
    out.push_back(Clip(slot.back_gap / max_gap, 0.0, 1.0));
    out.push_back(Clip(slot.back_gap_rate / v, -1.0, 1.0));
  }
  return out;
}

double BpReward(int lane_t, int lane_prev, double speed,
                const std::vector<double>& thresholds,
                double left_change_penalty) {
  if (lane_t > lane_prev) return left_change_penalty;
  if (thresholds.empty()) return 0.0;
  const size_t index =
      std::min(static_cast<size_t>(std::max(lane_t, 0)), thresholds.size() - 1);
  return speed > thresholds[index] ? 1.0 : 0.0;
}

double SafeDistance(double v, double tau, double d0) {
  if (v < 0.0) throw std::domain_error("safe distance: negative speed");
  return v * tau + d0;
}

bool AllCorridorsBlocked(const MopObservation& obs, double safe_distance) {
  return std::all_of(obs.slots.begin(), obs.slots.end(),
                     [&](const CorridorSlot& slot) {
                       return slot.front_gap <= safe_distance;
                     });
}

double MinFrontGap(const MopObservation& obs) {
  double best = 0.0;
  for (const auto& slot : obs.slots) {
    if (slot.front_gap > 0.0 && (best == 0.0 || slot.front_gap < best)) {
      best = slot.front_gap;
    }
  }
  return best;
}

double MopReward(const MopObservation& obs, double ego_accel,
                 double bp_target_speed, const RewardParams& params) {
  double reward = 0.0;
  if (obs.current_corridor_offset == 0) {
    const bool speed_match =
        std::abs(obs.ego_speed - bp_target_speed) < params.speed_tolerance;
    const double safe =
        SafeDistance(obs.ego_speed, params.headway, params.standstill_gap);
    const bool safe_follow =
        AllCorridorsBlocked(obs, safe) &&
        std::abs(MinFrontGap(obs) - safe) < params.gap_tolerance_fraction * safe;
    if (speed_match || safe_follow) reward = 1.0;
  }
  if (params.accel_penalty) {
    const double excess =
        std::max(0.0, std::abs(ego_accel) - params.accel_penalty_onset);
    reward -= std::min(params.accel_penalty_weight,
                       params.accel_penalty_weight * excess / 2.0);
  }
  return reward;
}

CorridorGaps MeasureCorridorGaps(const WorldState& world, double lo, double hi,
                                 const RoadNetwork& road, double max_gap) {
  CorridorGaps gaps{max_gap, max_gap};
  const VehicleState& ego = world.ego;
  for (const auto& other : world.others) {
    const VehicleState& v = other.state;
    const double v_lo = v.pose.d - 0.5 * v.width;
    const double v_hi = v.pose.d + 0.5 * v.width;
    if (!(v_lo < hi && lo < v_hi)) continue;
    const double delta = road.RingDelta(ego.pose.s, v.pose.s);
    const double gap =
        std::max(0.0, std::abs(delta) - 0.5 * (ego.length + v.length));
    double& slot = delta >= 0.0 ? gaps.front : gaps.back;
    slot = std::min(slot, gap);
  }
  return gaps;
}

std::vector<CorridorGaps> MeasureAllCorridorGaps(const WorldState& world,
                                                 const RoadNetwork& road,
                                                 double max_gap) {
  std::vector<CorridorGaps> out(road.NumCorridors());
  const double half = 0.5 * road.CorridorWidth();
  for (int c = 0; c < road.NumCorridors(); ++c) {
    const double center = CorridorCenter(c, road);
    out[c] = MeasureCorridorGaps(world, center - half, center + half, road,
                                 max_gap);
  }
  return out;
}

BpObservation BuildBpObservation(const WorldState& world,
                                 const RoadNetwork& road, double max_gap) {
  BpObservation obs;
  const VehicleState& ego = world.ego;
  obs.ego_lane = LaneOf(ego.pose.d, road);
  obs.ego_speed = ego.speed();
  auto lane_gaps = [&](int lane) {
    NeighborGaps g;
    if (lane < 0 || lane >= road.num_lanes) return g;
    g.front_gap = g.back_gap = max_gap;
    for (const auto& other : world.others) {
      const VehicleState& v = other.state;
      if (LaneOf(v.pose.d, road) != lane) continue;
      const double delta = road.RingDelta(ego.pose.s, v.pose.s);
      const double gap =
          std::max(0.0, std::abs(delta) - 0.5 * (ego.length + v.length));
      if (delta >= 0.0) {
        if (gap < g.front_gap) {
          g.front_gap = gap;
          g.front_rel_speed = v.speed() - ego.speed();
        }
      } else if (gap < g.back_gap) {
        g.back_gap = gap;
        g.back_rel_speed = v.speed() - ego.speed();
      }
    }
    return g;
  };
  obs.left = lane_gaps(obs.ego_lane + 1);
  obs.current = lane_gaps(obs.ego_lane);
  obs.right = lane_gaps(obs.ego_lane - 1);
  return obs;
}

BpAction EffectiveBpAction(BpAction action, int ego_lane,
                           const RoadNetwork& road) {
  if (action == BpAction::kSwitchLeft && ego_lane + 1 >= road.num_lanes) {
    return BpAction::kKeepLane;
  }
  if (action == BpAction::kSwitchRight && ego_lane - 1 < 0) {
    return BpAction::kKeepLane;
  }
  return action;
}

MopObservation BuildMopWindow(const WorldState& world, BpAction bp_action,
                              const RoadNetwork& road,
                              const WindowContext& context) {
  const int corridor = CorridorOf(world.ego.pose.d, road);
  if (corridor == kOffRoad) {
    throw std::domain_error("ego off-road at d=" +
                            std::to_string(world.ego.pose.d));
  }
  const int n = road.corridors_per_lane;
  const int lane = road.LaneOfCorridor(corridor);
  const BpAction action = EffectiveBpAction(bp_action, lane, road);

  int start = lane * n;
  int lane_lo = lane;
  int lane_hi = lane;
  if (action == BpAction::kSwitchLeft) {
    // Ego one corridor right of the window middle.
    start = corridor - n / 2 + 1;
    lane_hi = lane + 1;
  } else if (action == BpAction::kSwitchRight) {
    start = corridor - n / 2 - 1;
    lane_lo = lane - 1;
  }
  const double span_lo = road.LaneCenter(lane_lo) - 0.5 * road.lane_width;
  const double span_hi = road.LaneCenter(lane_hi) + 0.5 * road.lane_width;

  MopObservation obs;
  obs.ego_speed = world.ego.speed();
  obs.speed_setpoint = context.speed_setpoint;
  obs.bp_target_speed = context.bp_target_speed;
  obs.window_start = start;
  obs.current_corridor_offset = corridor - (start + n / 2);
  obs.slots.resize(n);

  const double half_corridor = 0.5 * road.CorridorWidth();
  const double half_vehicle = 0.5 * context.vehicle_width;
  constexpr double kEps = 1e-9;
  for (int k = 0; k < n; ++k) {
    CorridorSlot& slot = obs.slots[k];
    const int g = start + k;
    if (g < 0 || g >= road.NumCorridors()) {
      slot.corridor = kOffRoad;
      slot.blocked = true;
      continue;
    }
    slot.corridor = g;
    const double center = CorridorCenter(g, road);
    // The ego's own corridor is never blocked: a finished lane change leaves
    // it in an edge corridor it must be able to leave.
    if (g != corridor && (center - half_vehicle < span_lo - kEps ||
                          center + half_vehicle > span_hi + kEps)) {
      slot.blocked = true;
      continue;
    }
    const CorridorGaps gaps =
        MeasureCorridorGaps(world, center - half_corridor,
                            center + half_corridor, road, context.max_gap);
    slot.front_gap = gaps.front;
    slot.back_gap = gaps.back;
    if (context.previous_gaps != nullptr &&
        static_cast<int>(context.previous_gaps->size()) > g) {
      const CorridorGaps& prev = (*context.previous_gaps)[g];
      slot.front_gap_rate = (gaps.front - prev.front) / context.dt;
      slot.back_gap_rate = (gaps.back - prev.back) / context.dt;
    }
  }
  return obs;
}

AbsoluteCommand PostprocessAction(const MopAction& action,
                                  int current_corridor, double setpoint,
                                  const MopObservation& window,
                                  const RoadNetwork& road,
                                  const ActionLimits& limits) {
  const int lo = std::max(window.window_start, 0);
  const int hi = std::min(window.window_start +
                              static_cast<int>(window.slots.size()) - 1,
                          road.NumCorridors() - 1);
  AbsoluteCommand command;
  command.corridor = std::clamp(current_corridor + action.corridor_delta, lo, hi);
  command.speed_setpoint =
      std::clamp(setpoint + action.speed_delta, limits.min_speed, limits.max_speed);
  return command;
}

uint64_t EpisodeSeed(uint64_t run_seed, uint64_t episode) {
  // splitmix64 finalizer over the pair.
  uint64_t z = run_seed * 0x9E3779B97F4A7C15ULL + episode + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

CruiseEnv::CruiseEnv(EnvParams params) : params_(std::move(params)) {
  params_.road.Validate(params_.sim.vehicle_width);
  if (!(params_.dt > 0.0)) throw std::invalid_argument("env: dt must be > 0");
  if (params_.episode_length <= 0) {
    throw std::invalid_argument("env: episode_length must be > 0");
  }
}

double CruiseEnv::bp_target_speed() const {
  return params_.bp_target_speed.value_or(params_.road.speed_limit);
}

int CruiseEnv::ego_lane() const { return LaneOf(world_.ego.pose.d, params_.road); }

int CruiseEnv::ego_corridor() const {
  return CorridorOf(world_.ego.pose.d, params_.road);
}

BpObservation CruiseEnv::Reset(uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xA5A5A5A5DEADBEEFULL);
  SpawnConfig spawn = params_.spawn;
  spawn.ego_lane =
      std::uniform_int_distribution<int>(0, params_.road.num_lanes - 1)(rng);
  spawn.ego_speed = std::uniform_real_distribution<double>(
      params_.ego_speed_min_fraction * params_.road.speed_limit,
      params_.ego_speed_max_fraction * params_.road.speed_limit)(rng);
  return ResetWithWorld(SpawnWorld(params_.road, spawn, params_.sim, seed));
}

BpObservation CruiseEnv::ResetWithWorld(WorldState world) {
  world_ = std::move(world);
  setpoint_ = std::clamp(world_.ego.speed(), 0.0, params_.road.speed_limit);
  previous_gaps_ =
      MeasureAllCorridorGaps(world_, params_.road, params_.max_gap);
  const int corridor = std::max(0, ego_corridor());
  trajectory_ = Trajectory::Straight(world_.ego.pose.s, world_.ego.pose.d, 50.0,
                                     setpoint_, corridor);
  terminated_ = false;
  return ObserveBp();
}

// The active path is followed until the ego reaches its straight tail or the
// target changes. Refitting every step from zero curvature overshoots.
bool CruiseEnv::KeepsTrajectory(int target_corridor) const {
  if (trajectory_.empty() || trajectory_.target_corridor() != target_corridor) {
    return false;
  }
  const double along =
      params_.road.RingDelta(trajectory_.s_start(), world_.ego.pose.s);
  const double margin = world_.ego.speed() * params_.dt + 1.0;
  if (along < 0.0 ||
      trajectory_.s_start() + along + margin > trajectory_.s_end() ||
      along > trajectory_.horizon()) {
    return false;
  }
  return std::abs(trajectory_.LateralAt(trajectory_.s_start() + along) -
                  world_.ego.pose.d) < kTrajectoryTolerance;
}

WindowContext CruiseEnv::Context() const {
  WindowContext context;
  context.speed_setpoint = setpoint_;
  context.bp_target_speed = bp_target_speed();
  context.vehicle_width = params_.sim.vehicle_width;
  context.max_gap = params_.max_gap;
  context.dt = params_.dt;
  context.previous_gaps = &previous_gaps_;
  return context;
}

BpObservation CruiseEnv::ObserveBp() const {
  return BuildBpObservation(world_, params_.road, params_.max_gap);
}

MopObservation CruiseEnv::ObserveMop(BpAction bp_action) const {
  return BuildMopWindow(world_, bp_action, params_.road, Context());
}

StepResult CruiseEnv::Step(BpAction bp_action, const MopAction& mop_action) {
  if (terminated_) {
    throw LifecycleError("step called on a terminated episode; call Reset");
  }
  const RoadNetwork& road = params_.road;
  const MopObservation window = ObserveMop(bp_action);
  const int corridor = ego_corridor();
  const int lane_prev = ego_lane();
  const AbsoluteCommand command =
      PostprocessAction(mop_action, corridor, setpoint_, window, road,
                        ActionLimits{0.0, road.speed_limit});
  setpoint_ = command.speed_setpoint;
  if (KeepsTrajectory(command.corridor)) {
    trajectory_.set_speed_setpoint(setpoint_);
  } else {
    trajectory_ = GenerateTrajectory(world_.ego.pose, command.corridor,
                                     setpoint_, road, params_.trajectory);
  }

  std::vector<CorridorGaps> gaps_before =
      MeasureAllCorridorGaps(world_, road, params_.max_gap);
  world_ = StepWorld(world_, trajectory_, params_.dt, params_.mode, road,
                     params_.sim);
  previous_gaps_ = std::move(gaps_before);

  StepResult result;
  StepInfo& info = result.info;
  info.collision = DetectCollision(world_, road);
  info.off_road = CorridorOf(world_.ego.pose.d, road) == kOffRoad;
  if (!info.off_road && ego_corridor() != corridor) {
    // Steering into a corridor the window reported blocked counts as a
    // collision.
    const int slot = ego_corridor() - window.window_start;
    info.blocked_entry = slot >= 0 && slot < static_cast<int>(window.slots.size()) &&
                         window.slots[slot].blocked;
    info.collision = info.collision || info.blocked_entry;
  }
  info.lane = info.off_road ? lane_prev : ego_lane();
  info.corridor = info.off_road ? corridor : ego_corridor();
  info.speed = world_.ego.speed();
  info.accel = world_.ego.accel;
  info.target_corridor = command.corridor;
  info.speed_setpoint = setpoint_;

  result.bp_reward = BpReward(info.lane, lane_prev, info.speed,
                              params_.reward.lane_thresholds,
                              params_.reward.left_change_penalty);
  if (!info.off_road) {
    result.mop_observation = ObserveMop(bp_action);
    result.mop_reward = MopReward(result.mop_observation, info.accel,
                                  bp_target_speed(), params_.reward);
    result.bp_observation = ObserveBp();
  } else {
    result.mop_observation = window;
    result.bp_observation = BuildBpObservation(world_, road, params_.max_gap);
    result.bp_observation.ego_lane = lane_prev;
  }

  if (info.collision || info.off_road) {
    info.termination_cause = "collision";
  } else if (world_.step_count >= params_.episode_length) {
    info.termination_cause = "horizon";
  }
  result.terminated = !info.termination_cause.empty();
  terminated_ = result.terminated;
  return result;
}

}  // namespace hrl_cruise
