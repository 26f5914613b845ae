#include "hrl_cruise/traffic_sim.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace hrl_cruise {

const char* ToString(DynamicsMode mode) {
  return mode == DynamicsMode::kPointFollow ? "point" : "bicycle";
}

DynamicsMode ParseDynamicsMode(const std::string& text) {
  if (text == "point" || text == "point-follow" || text == "PointFollow") {
    return DynamicsMode::kPointFollow;
  }
  if (text == "bicycle" || text == "Bicycle") return DynamicsMode::kBicycle;
  throw std::invalid_argument("unknown dynamics mode '" + text + "'");
}

namespace {

VehicleState MakeVehicle(int id, double s, double d, double speed,
                         const SimParams& params) {
  VehicleState v;
  v.id = id;
  v.pose = {s, d, 0.0, speed};
  v.length = params.vehicle_length;
  v.width = params.vehicle_width;
  return v;
}

bool LateralOverlap(double lo_a, double hi_a, double lo_b, double hi_b) {
  return lo_a < hi_b && lo_b < hi_a;
}

}  // namespace

WorldState SpawnWorld(const RoadNetwork& road, const SpawnConfig& spawn,
                      const SimParams& params, uint64_t seed) {
  WorldState world;
  world.rng.seed(seed);
  auto& rng = world.rng;
  const int lane = std::clamp(spawn.ego_lane, 0, road.num_lanes - 1);
  world.ego = MakeVehicle(0, 0.0, road.LaneCenter(lane), spawn.ego_speed, params);

  std::uniform_int_distribution<int> count_dist(spawn.min_vehicles,
                                                spawn.max_vehicles);
  std::uniform_int_distribution<int> lane_dist(0, road.num_lanes - 1);
  std::uniform_real_distribution<double> s_dist(0.0, road.length);
  std::uniform_real_distribution<double> speed_dist(
      spawn.min_desired_fraction * road.speed_limit,
      spawn.max_desired_fraction * road.speed_limit);
  const int count = count_dist(rng);
  for (int i = 0; i < count; ++i) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const int l = lane_dist(rng);
      const double s = s_dist(rng);
      const double desired = speed_dist(rng);
      VehicleState candidate =
          MakeVehicle(i + 1, s, road.LaneCenter(l), desired, params);
      auto clear = [&](const VehicleState& other) {
        if (LaneOf(other.pose.d, road) != l) return true;
        const double center_gap =
            std::abs(road.RingDelta(other.pose.s, candidate.pose.s));
        return center_gap - 0.5 * (other.length + candidate.length) >=
               spawn.min_initial_gap;
      };
      bool ok = clear(world.ego);
      for (const auto& other : world.others) ok = ok && clear(other.state);
      if (!ok) continue;
      AmbientVehicle ambient;
      ambient.state = candidate;
      ambient.desired_speed = desired;
      ambient.lane = ambient.target_lane = l;
      world.others.push_back(ambient);
      break;
    }
  }
  return world;
}

double AmbientAccel(const VehicleState& follower, double desired_speed,
                    double leader_gap, double leader_speed,
                    const IdmParams& idm, double max_decel) {
  const double v = follower.speed();
  const double v0 = std::max(desired_speed, 0.1);
  double accel = idm.max_accel * (1.0 - std::pow(v / v0, idm.exponent));
  if (std::isfinite(leader_gap)) {
    const double gap = std::max(leader_gap, 0.01);
    const double closing = v - leader_speed;
    const double desired_gap =
        idm.min_gap +
        std::max(0.0, v * idm.time_headway +
                          v * closing /
                              (2.0 * std::sqrt(idm.max_accel * idm.comfort_decel)));
    accel -= idm.max_accel * (desired_gap / gap) * (desired_gap / gap);
  }
  return std::clamp(accel, -max_decel, idm.max_accel);
}

ControlCommand TrackTrajectory(const VehicleState& ego,
                               const Trajectory& trajectory, double dt,
                               const SimParams& params) {
  (void)dt;
  ControlCommand command;
  if (trajectory.empty()) {
    command.fault = true;
    return command;
  }
  const double v = ego.speed();
  const double lookahead = std::max(0.5 * v, 3.0);
  const double s_target = ego.pose.s + lookahead;
  const double d_target = trajectory.LateralAt(s_target);
  const double dx = s_target - ego.pose.s;
  const double dy = d_target - ego.pose.d;
  const double alpha = std::atan2(dy, dx) - ego.pose.heading_offset;
  const double distance = std::hypot(dx, dy);
  const double wheelbase = params.limits.wheelbase;
  const double steer =
      std::atan(2.0 * wheelbase * std::sin(alpha) / std::max(distance, 1e-6));
  command.steer =
      std::clamp(steer, -params.limits.max_steer, params.limits.max_steer);
  command.accel =
      std::clamp(params.speed_gain * (trajectory.speed_setpoint() - v),
                 -params.max_accel, params.max_accel);
  return command;
}

namespace {

// Ego pose with s expressed on the trajectory's unwrapped axis.
VehicleState OnTrajectoryAxis(const VehicleState& ego,
                              const Trajectory& trajectory,
                              const RoadNetwork& road) {
  VehicleState local = ego;
  local.pose.s = trajectory.s_start() +
                 road.RingDelta(road.WrapS(trajectory.s_start()), ego.pose.s);
  return local;
}

VehicleState StepPointFollow(const VehicleState& ego,
                             const Trajectory& trajectory, double dt,
                             const RoadNetwork& road, const SimParams& params) {
  VehicleState next = OnTrajectoryAxis(ego, trajectory, road);
  const double v0 = ego.speed();
  const double accel = std::clamp((trajectory.speed_setpoint() - v0) / dt,
                                  -params.max_accel, params.max_accel);
  const double v1 = std::max(0.0, v0 + accel * dt);
  const double arc = 0.5 * (v0 + v1) * dt;
  double s = next.pose.s;
  if (!trajectory.empty() && arc > 0.0) {
    const double slope = trajectory.SlopeAt(s + 0.5 * arc);
    s += arc / std::sqrt(1.0 + slope * slope);
  }
  next.pose.s = road.WrapS(s);
  next.pose.d = trajectory.empty() ? ego.pose.d : trajectory.LateralAt(s);
  next.pose.heading_offset =
      trajectory.empty() ? 0.0 : std::atan(trajectory.SlopeAt(s));
  next.pose.speed = v1;
  next.accel = (v1 - v0) / dt;
  return next;
}

VehicleState StepBicycle(const VehicleState& ego, const Trajectory& trajectory,
                         double dt, const RoadNetwork& road,
                         const SimParams& params) {
  VehicleState state = OnTrajectoryAxis(ego, trajectory, road);
  const double v_start = ego.speed();
  const int substeps = std::max(1, params.bicycle_substeps);
  const double h = dt / substeps;
  const double rear_to_center = 0.5 * params.limits.wheelbase;
  for (int i = 0; i < substeps; ++i) {
    const ControlCommand command = TrackTrajectory(state, trajectory, h, params);
    auto& pose = state.pose;
    const double v = pose.speed;
    const double beta = std::atan(0.5 * std::tan(command.steer));
    pose.s += v * std::cos(pose.heading_offset + beta) * h;
    pose.d += v * std::sin(pose.heading_offset + beta) * h;
    pose.heading_offset += v / rear_to_center * std::sin(beta) * h;
    pose.speed = std::max(0.0, v + command.accel * h);
  }
  state.pose.s = road.WrapS(state.pose.s);
  state.accel = (state.pose.speed - v_start) / dt;
  return state;
}

struct LeaderInfo {
  double gap = kNoLeader;
  double speed = 0.0;
};

}  // namespace

WorldState StepWorld(const WorldState& world, const Trajectory& trajectory,
                     double dt, DynamicsMode mode, const RoadNetwork& road,
                     const SimParams& params) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  WorldState next = world;

  // Ambient decisions use the pre-step snapshot.
  const size_t n = world.others.size();
  std::vector<const VehicleState*> all;
  all.reserve(n + 1);
  all.push_back(&world.ego);
  for (const auto& other : world.others) all.push_back(&other.state);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (size_t i = 0; i < n; ++i) {
    const AmbientVehicle& self = world.others[i];
    const VehicleState& me = self.state;
    double lo = me.pose.d - 0.5 * me.width;
    double hi = me.pose.d + 0.5 * me.width;
    if (self.changing_lane()) {
      const double target_d = road.LaneCenter(self.target_lane);
      lo = std::min(lo, target_d - 0.5 * me.width);
      hi = std::max(hi, target_d + 0.5 * me.width);
    }
    LeaderInfo leader;
    for (const VehicleState* other : all) {
      if (other == &me) continue;
      const double o_lo = other->pose.d - 0.5 * other->width;
      const double o_hi = other->pose.d + 0.5 * other->width;
      if (!LateralOverlap(lo - 0.1, hi + 0.1, o_lo, o_hi)) continue;
      const double delta = road.RingDelta(me.pose.s, other->pose.s);
      if (delta <= 0.0) continue;
      const double gap = delta - 0.5 * (me.length + other->length);
      if (gap < leader.gap) leader = {gap, other->speed()};
    }
    const double accel =
        AmbientAccel(me, self.desired_speed, leader.gap, leader.speed,
                     params.idm, params.max_decel);

    // Draws happen for every vehicle every step so the random stream does
    // not depend on what the ego does.
    const double change_draw = unit(next.rng);
    const double side_draw = unit(next.rng);

    AmbientVehicle& out = next.others[i];
    if (!self.changing_lane() && change_draw < params.lane_change_probability) {
      const int target = self.lane + (side_draw < 0.5 ? -1 : 1);
      if (target >= 0 && target < road.num_lanes) {
        const double t_lo = road.LaneCenter(target) - 0.5 * road.lane_width;
        const double t_hi = road.LaneCenter(target) + 0.5 * road.lane_width;
        bool clear = true;
        for (const VehicleState* other : all) {
          if (other == &me) continue;
          if (!LateralOverlap(t_lo, t_hi, other->pose.d - 0.5 * other->width,
                              other->pose.d + 0.5 * other->width)) {
            continue;
          }
          const double delta = road.RingDelta(me.pose.s, other->pose.s);
          const double gap =
              std::abs(delta) - 0.5 * (me.length + other->length);
          if (gap < params.lane_change_min_gap) {
            clear = false;
            break;
          }
        }
        if (clear) {
          out.target_lane = target;
          out.lane_change_from = me.pose.d;
          out.lane_change_elapsed = 0.0;
        }
      }
    }

    const double v0 = me.speed();
    const double v1 = std::max(0.0, v0 + accel * dt);
    out.state.pose.s = road.WrapS(me.pose.s + 0.5 * (v0 + v1) * dt);
    out.state.pose.speed = v1;
    out.state.accel = (v1 - v0) / dt;
    if (out.changing_lane()) {
      out.lane_change_elapsed += dt;
      const double tau =
          std::min(1.0, out.lane_change_elapsed / params.lane_change_duration);
      const double delta = road.LaneCenter(out.target_lane) - out.lane_change_from;
      const double shape = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
      const double rate = delta * 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau) /
                          params.lane_change_duration;
      out.state.pose.d = out.lane_change_from + delta * shape;
      out.state.pose.heading_offset = std::atan2(rate, std::max(v1, 0.1));
      if (tau >= 1.0) {
        out.lane = out.target_lane;
        out.state.pose.d = road.LaneCenter(out.lane);
        out.state.pose.heading_offset = 0.0;
      }
    }
  }

  next.ego = mode == DynamicsMode::kPointFollow
                 ? StepPointFollow(world.ego, trajectory, dt, road, params)
                 : StepBicycle(world.ego, trajectory, dt, road, params);
  next.time = world.time + dt;
  next.step_count = world.step_count + 1;
  return next;
}

bool BoxesOverlap(const VehicleState& a, const VehicleState& b,
                  const RoadNetwork& road) {
  const double dx = road.RingDelta(a.pose.s, b.pose.s);
  const double dy = b.pose.d - a.pose.d;
  if (std::hypot(dx, dy) >
      0.5 * (std::hypot(a.length, a.width) + std::hypot(b.length, b.width))) {
    return false;
  }
  struct Box {
    double cx, cy, ux, uy, half_l, half_w;
  };
  auto make = [](const VehicleState& v, double cx, double cy) {
    return Box{cx,
               cy,
               std::cos(v.pose.heading_offset),
               std::sin(v.pose.heading_offset),
               0.5 * v.length,
               0.5 * v.width};
  };
  const Box boxes[2] = {make(a, 0.0, 0.0), make(b, dx, dy)};
  for (const Box& owner : boxes) {
    const std::array<std::array<double, 2>, 2> axes = {
        {{owner.ux, owner.uy}, {-owner.uy, owner.ux}}};
    for (const auto& axis : axes) {
      const double center =
          (boxes[1].cx - boxes[0].cx) * axis[0] + (boxes[1].cy - boxes[0].cy) * axis[1];
      double radius = 0.0;
      for (const Box& box : boxes) {
        radius += box.half_l * std::abs(box.ux * axis[0] + box.uy * axis[1]) +
                  box.half_w * std::abs(-box.uy * axis[0] + box.ux * axis[1]);
      }
      if (std::abs(center) >= radius) return false;
    }
  }
  return true;
}

bool DetectCollision(const WorldState& world, const RoadNetwork& road) {
  for (const auto& other : world.others) {
    if (BoxesOverlap(world.ego, other.state, road)) return true;
  }
  return false;
}

int CountAmbientCollisions(const WorldState& world, const RoadNetwork& road) {
  int count = 0;
  for (size_t i = 0; i < world.others.size(); ++i) {
    for (size_t j = i + 1; j < world.others.size(); ++j) {
      if (BoxesOverlap(world.others[i].state, world.others[j].state, road)) {
        ++count;
      }
    }
  }
  return count;
}

void AppendSnapshot(std::ostream& out, const WorldState& world) {
  auto vehicle = [](const VehicleState& v) {
    return nlohmann::json{{"id", v.id},
                          {"s", v.pose.s},
                          {"d", v.pose.d},
                          {"heading", v.pose.heading_offset},
                          {"speed", v.pose.speed},
                          {"accel", v.accel}};
  };
  nlohmann::json record;
  record["t"] = world.time;
  record["step"] = world.step_count;
  record["ego"] = vehicle(world.ego);
  record["others"] = nlohmann::json::array();
  for (const auto& other : world.others) {
    record["others"].push_back(vehicle(other.state));
  }
  out << record.dump() << '\n';
}

}  // namespace hrl_cruise
