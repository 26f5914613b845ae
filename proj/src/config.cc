#include "hrl_cruise/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hrl_cruise {

namespace {

using nlohmann::json;

// Reads keys from one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& object, std::string name) : name_(std::move(name)) {
    if (!object.is_object()) {
      throw ConfigError(name_ + ": expected an object");
    }
    object_ = &object;
  }

  template <typename T>
  void Read(const char* key, T& value) {
    seen_.insert(key);
    auto it = object_->find(key);
    if (it == object_->end()) return;
    try {
      value = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong type");
    }
  }

  bool Has(const char* key) const { return object_->contains(key); }

  const json& Child(const char* key) {
    seen_.insert(key);
    return object_->at(key);
  }

  void Finish() const {
    for (auto it = object_->begin(); it != object_->end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError(name_ + ": unknown key '" + it.key() + "'");
      }
    }
  }

 private:
  const json* object_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

void ReadRoad(const json& node, RoadNetwork& road) {
  Section s(node, "road");
  s.Read("lanes", road.num_lanes);
  s.Read("lane_width_m", road.lane_width);
  s.Read("corridors_per_lane", road.corridors_per_lane);
  s.Read("length_m", road.length);
  s.Read("speed_limit_mps", road.speed_limit);
  s.Finish();
}

void ReadScenario(const json& node, EnvParams& env) {
  Section s(node, "scenario");
  s.Read("min_vehicles", env.spawn.min_vehicles);
  s.Read("max_vehicles", env.spawn.max_vehicles);
  s.Read("min_initial_gap_m", env.spawn.min_initial_gap);
  std::string mode = ToString(env.mode);
  s.Read("mode", mode);
  try {
    env.mode = ParseDynamicsMode(mode);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scenario.mode: ") + e.what());
  }
  s.Read("dt", env.dt);
  s.Read("episode_length", env.episode_length);
  s.Read("max_gap_m", env.max_gap);
  s.Read("lane_change_probability", env.sim.lane_change_probability);
  if (s.Has("bp_target_speed_mps")) {
    double v = 0.0;
    s.Read("bp_target_speed_mps", v);
    env.bp_target_speed = v;
  }
  s.Finish();
}

void ReadReward(const json& node, RewardParams& reward) {
  Section s(node, "reward");
  s.Read("lane_thresholds", reward.lane_thresholds);
  s.Read("left_change_penalty", reward.left_change_penalty);
  s.Read("headway_s", reward.headway);
  s.Read("standstill_gap_m", reward.standstill_gap);
  s.Read("speed_tolerance", reward.speed_tolerance);
  s.Read("gap_tolerance_fraction", reward.gap_tolerance_fraction);
  s.Read("accel_penalty", reward.accel_penalty);
  s.Finish();
}

void ReadTrainFields(Section& s, TrainConfig& train) {
  s.Read("gamma", train.gamma);
  s.Read("batch_size", train.batch_size);
  s.Read("learning_rate", train.learning_rate);
  s.Read("target_sync_interval", train.target_sync_interval);
  s.Read("epsilon_start", train.epsilon_start);
  s.Read("epsilon_end", train.epsilon_end);
  s.Read("epsilon_fraction", train.epsilon_fraction);
  s.Read("steps", train.total_steps);
  s.Read("warmup_steps", train.warmup_steps);
  s.Read("replay_capacity", train.replay_capacity);
  std::string optimizer =
      train.optimizer == OptimizerKind::kAdam ? "adam" : "sgd";
  s.Read("optimizer", optimizer);
  try {
    train.optimizer = ParseOptimizer(optimizer);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train.optimizer: ") + e.what());
  }
  s.Read("momentum", train.momentum);
  s.Read("max_grad_norm", train.max_grad_norm);
  s.Read("huber_delta", train.huber_delta);
  s.Read("updates_per_step", train.updates_per_step);
  s.Read("hidden_sizes", train.hidden_sizes);
  s.Read("curve_window", train.curve_window);
  s.Read("bp_period", train.bp_period);
  s.Read("seed", train.seed);
}

void ReadTrain(const json& node, TrainConfig& mop, TrainConfig& bp) {
  Section s(node, "train");
  // Shared keys apply to both agents; the nested sections then override.
  ReadTrainFields(s, mop);
  ReadTrainFields(s, bp);
  if (s.Has("mop")) {
    Section m(s.Child("mop"), "train.mop");
    ReadTrainFields(m, mop);
    m.Finish();
  }
  if (s.Has("bp")) {
    Section b(s.Child("bp"), "train.bp");
    ReadTrainFields(b, bp);
    b.Finish();
  }
  s.Finish();
}

void ReadRuleBp(const json& node, RuleBpConfig& rule) {
  Section s(node, "rule_bp");
  s.Read("min_gain_mps", rule.min_gain);
  s.Read("min_safe_gap_front_m", rule.min_safe_gap_front);
  s.Read("min_safe_gap_back_m", rule.min_safe_gap_back);
  s.Read("cooldown_steps", rule.cooldown);
  s.Read("lookahead_m", rule.lookahead);
  s.Read("desired_speed_mps", rule.desired_speed);
  s.Finish();
}

}  // namespace

ExperimentConfig DefaultExperimentConfig() {
  ExperimentConfig config;
  config.mop_train.total_steps = 50'000;
  config.bp_train.total_steps = 20'000;
  return config;
}

ExperimentConfig ParseExperimentConfig(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig config = DefaultExperimentConfig();
  Section s(root, "config");
  if (s.Has("road")) ReadRoad(s.Child("road"), config.env.road);
  if (s.Has("scenario")) ReadScenario(s.Child("scenario"), config.env);
  if (s.Has("reward")) ReadReward(s.Child("reward"), config.env.reward);
  if (s.Has("train")) {
    ReadTrain(s.Child("train"), config.mop_train, config.bp_train);
  }
  if (s.Has("rule_bp")) ReadRuleBp(s.Child("rule_bp"), config.rule_bp);
  s.Finish();

  // The rule planner and the reward share the per-lane speed thresholds and
  // the desired speed follows the road.
  config.rule_bp.lane_thresholds = config.env.reward.lane_thresholds;
  if (!s.Has("rule_bp") || !root["rule_bp"].contains("desired_speed_mps")) {
    config.rule_bp.desired_speed = config.env.road.speed_limit;
  }
  try {
    config.env.road.Validate(config.env.sim.vehicle_width);
    config.mop_train.Validate();
    config.bp_train.Validate();
    config.rule_bp.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (config.env.spawn.min_vehicles < 0 ||
      config.env.spawn.max_vehicles < config.env.spawn.min_vehicles) {
    throw ConfigError("scenario: vehicle counts must satisfy 0 <= min <= max");
  }
  if (!(config.env.dt > 0.0) || config.env.episode_length <= 0) {
    throw ConfigError("scenario: dt and episode_length must be > 0");
  }
  if (config.env.reward.lane_thresholds.size() !=
      static_cast<size_t>(config.env.road.num_lanes)) {
    throw ConfigError("reward.lane_thresholds: one entry per lane expected");
  }
  return config;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseExperimentConfig(buffer.str());
}

}  // namespace hrl_cruise
