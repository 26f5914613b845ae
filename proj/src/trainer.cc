#include "hrl_cruise/trainer.h"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "hrl_cruise/planners_rule.h"

namespace hrl_cruise {

namespace {

// Accumulates curve windows and episode rows for one training run.
class CurveRecorder {
 public:
  explicit CurveRecorder(int window) : window_(window) {}

  void Record(int64_t step, double reward, bool collision, double loss,
              double epsilon) {
    reward_ += reward;
    collisions_ += collision ? 1 : 0;
    if (loss >= 0.0) {
      loss_sum_ += loss;
      ++loss_count_;
    }
    episode_reward_ += reward;
    ++episode_length_;
    if ((step + 1) % window_ == 0) {
      curves_.push_back({step + 1, reward_, collisions_,
                         loss_count_ > 0 ? loss_sum_ / loss_count_ : 0.0,
                         epsilon});
      reward_ = 0.0;
      collisions_ = 0;
      loss_sum_ = 0.0;
      loss_count_ = 0;
    }
  }

  void EndEpisode(int64_t step, bool collided) {
    episodes_.push_back({static_cast<int>(episodes_.size()), step + 1,
                         episode_length_, episode_reward_, collided});
    episode_reward_ = 0.0;
    episode_length_ = 0;
  }

  std::vector<CurveRow> TakeCurves() { return std::move(curves_); }
  std::vector<EpisodeRow> TakeEpisodes() { return std::move(episodes_); }

 private:
  int window_;
  double reward_ = 0.0;
  int collisions_ = 0;
  double loss_sum_ = 0.0;
  int64_t loss_count_ = 0;
  double episode_reward_ = 0.0;
  int64_t episode_length_ = 0;
  std::vector<CurveRow> curves_;
  std::vector<EpisodeRow> episodes_;
};

}  // namespace

TrainResult TrainMop(const EnvParams& env_params, const TrainConfig& config) {
  config.Validate();
  CruiseEnv env(env_params);
  const RoadNetwork& road = env_params.road;
  const int input_dim = 4 + 4 * road.corridors_per_lane;
  DqnAgent agent(input_dim, kNumMopActions, config);
  RandomBp random_bp({config.bp_period}, road.num_lanes, config.seed * 31 + 7);
  CurveRecorder recorder(config.curve_window);

  int64_t episode = 0;
  env.Reset(EpisodeSeed(config.seed, episode));
  random_bp.set_target_lane(env.ego_lane());
  for (int64_t step = 0; step < config.total_steps; ++step) {
    const BpAction bp = random_bp.Act(env.steps_in_episode(), env.ego_lane());
    const std::vector<double> obs =
        env.ObserveMop(bp).Features(road, env_params.max_gap);
    const double epsilon = config.EpsilonAt(step);
    const int action = agent.Act(obs, epsilon);
    const StepResult result = env.Step(bp, MopActionFromIndex(action));
    const bool crashed = result.info.collision || result.info.off_road;
    agent.Remember({obs, action, result.mop_reward,
                    result.mop_observation.Features(road, env_params.max_gap),
                    crashed});
    const double loss = step >= config.warmup_steps ? agent.Update() : -1.0;
    recorder.Record(step, result.mop_reward, crashed, loss, epsilon);
    if (result.terminated) {
      recorder.EndEpisode(step, crashed);
      env.Reset(EpisodeSeed(config.seed, ++episode));
      random_bp.set_target_lane(env.ego_lane());
    }
  }
  return {agent.online(), recorder.TakeCurves(), recorder.TakeEpisodes()};
}

TrainResult TrainBp(const EnvParams& env_params, const QNetwork& mop,
                    const TrainConfig& config) {
  config.Validate();
  CruiseEnv env(env_params);
  const RoadNetwork& road = env_params.road;
  if (mop.input_dim() != 4 + 4 * road.corridors_per_lane ||
      mop.output_dim() != kNumMopActions) {
    throw ShapeMismatchError("MoP network does not match the environment");
  }
  DqnAgent agent(BpObservation::kSize, kNumBpActions, config);
  CurveRecorder recorder(config.curve_window);

  int64_t episode = 0;
  BpObservation bp_obs = env.Reset(EpisodeSeed(config.seed, episode));
  for (int64_t step = 0; step < config.total_steps; ++step) {
    const std::vector<double> obs = bp_obs.Features(road, env_params.max_gap);
    const double epsilon = config.EpsilonAt(step);
    const int action = agent.Act(obs, epsilon);
    const BpAction bp = BpActionFromIndex(action);
    const std::vector<double> mop_obs =
        env.ObserveMop(bp).Features(road, env_params.max_gap);
    const MopAction mop_action = MopActionFromIndex(GreedyAction(mop.Forward(mop_obs)));
    const StepResult result = env.Step(bp, mop_action);
    const bool crashed = result.info.collision || result.info.off_road;
    agent.Remember({obs, action, result.bp_reward,
                    result.bp_observation.Features(road, env_params.max_gap),
                    crashed});
    const double loss = step >= config.warmup_steps ? agent.Update() : -1.0;
    recorder.Record(step, result.bp_reward, crashed, loss, epsilon);
    if (result.terminated) {
      recorder.EndEpisode(step, crashed);
      bp_obs = env.Reset(EpisodeSeed(config.seed, ++episode));
    } else {
      bp_obs = result.bp_observation;
    }
  }
  return {agent.online(), recorder.TakeCurves(), recorder.TakeEpisodes()};
}

void WriteCurvesCsv(std::ostream& out, const std::vector<CurveRow>& curves) {
  out << "step,reward,collisions,loss,epsilon\n";
  char line[160];
  for (const auto& row : curves) {
    std::snprintf(line, sizeof(line), "%" PRId64 ",%.6f,%d,%.6f,%.6f\n",
                  row.step, row.reward, row.collisions, row.loss, row.epsilon);
    out << line;
  }
}

void WriteEpisodesCsv(std::ostream& out,
                      const std::vector<EpisodeRow>& episodes) {
  out << "episode,end_step,length,reward,collided\n";
  char line[160];
  for (const auto& row : episodes) {
    std::snprintf(line, sizeof(line), "%d,%" PRId64 ",%" PRId64 ",%.6f,%d\n",
                  row.episode, row.end_step, row.length, row.reward,
                  row.collided ? 1 : 0);
    out << line;
  }
}

void WriteCurvesCsv(const std::string& path,
                    const std::vector<CurveRow>& curves) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  WriteCurvesCsv(out, curves);
}

void WriteEpisodesCsv(const std::string& path,
                      const std::vector<EpisodeRow>& episodes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  WriteEpisodesCsv(out, episodes);
}

DecileComparison CompareDeciles(const std::vector<double>& values) {
  DecileComparison result;
  if (values.empty()) return result;
  const size_t k = std::max<size_t>(1, values.size() / 10);
  result.first = std::accumulate(values.begin(), values.begin() + k, 0.0) / k;
  result.last = std::accumulate(values.end() - k, values.end(), 0.0) / k;
  return result;
}

std::vector<double> EpisodeRewards(const TrainResult& result) {
  std::vector<double> out;
  for (const auto& row : result.episodes) out.push_back(row.reward);
  return out;
}

std::vector<double> WindowCollisions(const TrainResult& result) {
  std::vector<double> out;
  for (const auto& row : result.curves) out.push_back(row.collisions);
  return out;
}

}  // namespace hrl_cruise
