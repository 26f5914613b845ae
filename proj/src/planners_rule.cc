#include "hrl_cruise/planners_rule.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hrl_cruise {

void RuleBpConfig::Validate() const {
  if (cooldown < 0) throw std::invalid_argument("rule_bp: cooldown must be >= 0");
  if (!(min_safe_gap_front > 0.0) || !(min_safe_gap_back > 0.0)) {
    throw std::invalid_argument("rule_bp: safe gaps must be > 0");
  }
}

RuleBp::RuleBp(RuleBpConfig config, int num_lanes)
    : config_(std::move(config)), num_lanes_(num_lanes) {
  config_.Validate();
}

void RuleBp::Reset() {
  target_lane_ = -1;
  cooldown_left_ = 0;
}

bool RuleBp::LaneSafe(const NeighborGaps& gaps) const {
  return gaps.front_gap >= config_.min_safe_gap_front &&
         gaps.back_gap >= config_.min_safe_gap_back;
}

double RuleBp::AttainableSpeed(const BpObservation& obs,
                               const NeighborGaps& gaps) const {
  if (gaps.front_gap >= config_.lookahead) return config_.desired_speed;
  return std::min(config_.desired_speed, obs.ego_speed + gaps.front_rel_speed);
}

BpAction RuleBp::Act(const BpObservation& obs) {
  const int lane = obs.ego_lane;
  if (target_lane_ >= 0) {
    if (lane == target_lane_) {
      target_lane_ = -1;
      cooldown_left_ = config_.cooldown;
    } else if (target_lane_ > lane) {
      return BpAction::kSwitchLeft;
    } else {
      return BpAction::kSwitchRight;
    }
  }
  if (cooldown_left_ > 0) {
    --cooldown_left_;
    return BpAction::kKeepLane;
  }

  const double here = AttainableSpeed(obs, obs.current);
  const bool has_left = lane + 1 < num_lanes_;
  const bool has_right = lane > 0;
  if (has_left && config_.desired_speed - here >= config_.min_gain &&
      LaneSafe(obs.left) && AttainableSpeed(obs, obs.left) > here) {
    target_lane_ = lane + 1;
    return BpAction::kSwitchLeft;
  }
  if (has_right && LaneSafe(obs.right)) {
    const size_t index = std::min(static_cast<size_t>(lane - 1),
                                  config_.lane_thresholds.size() - 1);
    const double threshold = config_.lane_thresholds.empty()
                                 ? 0.0
                                 : config_.lane_thresholds[index];
    const double right_speed = AttainableSpeed(obs, obs.right);
    if (right_speed > threshold && right_speed >= here - 0.5) {
      target_lane_ = lane - 1;
      return BpAction::kSwitchRight;
    }
  }
  return BpAction::kKeepLane;
}

MopAction RuleMop(const MopObservation& obs, BpAction bp_action,
                  const RuleMopConfig& config) {
  (void)bp_action;
  MopAction action;
  const double safe =
      SafeDistance(obs.ego_speed, config.headway, config.standstill_gap);
  const int n = static_cast<int>(obs.slots.size());
  const bool all_zero = std::all_of(
      obs.slots.begin(), obs.slots.end(),
      [](const CorridorSlot& slot) { return slot.front_gap <= 0.0; });
  if (all_zero) {
    action.speed_delta = -1;
    return action;
  }

  const int ego_slot = std::clamp(obs.EgoSlot(), 0, n - 1);
  if (obs.current_corridor_offset != 0) {
    const int toward = obs.current_corridor_offset > 0 ? -1 : 1;
    const int next = ego_slot + toward;
    if (next >= 0 && next < n) {
      const CorridorSlot& slot = obs.slots[next];
      if (!slot.blocked && slot.front_gap > safe && slot.back_gap > safe) {
        action.corridor_delta = toward;
      }
    }
  }

  // Closest leader over the corridors the ego body covers.
  double front = obs.slots[ego_slot].front_gap;
  double rate = obs.slots[ego_slot].front_gap_rate;
  for (int k = std::max(0, ego_slot - 1); k <= std::min(n - 1, ego_slot + 1); ++k) {
    const CorridorSlot& slot = obs.slots[k];
    if (slot.blocked || slot.front_gap <= 0.0) continue;
    if (slot.front_gap < front || front <= 0.0) {
      front = slot.front_gap;
      rate = slot.front_gap_rate;
    }
  }
  if (front < safe && rate <= 0.5) {
    action.speed_delta = -1;
  } else if (obs.speed_setpoint < obs.bp_target_speed &&
             front > config.speed_up_margin * safe) {
    action.speed_delta = 1;
  }
  return action;
}

RandomBp::RandomBp(RandomBpSchedule schedule, int num_lanes, uint64_t seed)
    : schedule_(schedule), num_lanes_(num_lanes), rng_(seed) {
  if (schedule_.period <= 0) {
    throw std::invalid_argument("random_bp: period must be > 0");
  }
}

BpAction RandomBp::Act(int64_t step, int ego_lane) {
  if (target_lane_ < 0) target_lane_ = ego_lane;
  if (step > 0 && step % schedule_.period == 0) {
    const int lo = std::max(0, ego_lane - 1);
    const int hi = std::min(num_lanes_ - 1, ego_lane + 1);
    target_lane_ = std::uniform_int_distribution<int>(lo, hi)(rng_);
  }
  if (target_lane_ > ego_lane) return BpAction::kSwitchLeft;
  if (target_lane_ < ego_lane) return BpAction::kSwitchRight;
  return BpAction::kKeepLane;
}

}  // namespace hrl_cruise
