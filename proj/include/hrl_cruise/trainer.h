#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hrl_cruise/cruise_env.h"
#include "hrl_cruise/dqn.h"

namespace hrl_cruise {

// One row per `curve_window` environment steps.
struct CurveRow {
  int64_t step = 0;  // steps completed at the end of the window
  double reward = 0.0;
  int collisions = 0;
  double loss = 0.0;  // mean over the window's updates, 0 before warmup
  double epsilon = 0.0;
};

struct EpisodeRow {
  int episode = 0;
  int64_t end_step = 0;
  int64_t length = 0;
  double reward = 0.0;
  bool collided = false;
};

struct TrainResult {
  QNetwork network;
  std::vector<CurveRow> curves;
  std::vector<EpisodeRow> episodes;
};

// MoP pretraining: a random BP re-draws its target lane every
// config.bp_period steps while the MoP learns from the env's MoP reward.
TrainResult TrainMop(const EnvParams& env_params, const TrainConfig& config);

// BP training on top of a frozen, greedy MoP. The BP acts every step.
TrainResult TrainBp(const EnvParams& env_params, const QNetwork& mop,
                    const TrainConfig& config);

void WriteCurvesCsv(std::ostream& out, const std::vector<CurveRow>& curves);
void WriteEpisodesCsv(std::ostream& out, const std::vector<EpisodeRow>& episodes);
void WriteCurvesCsv(const std::string& path, const std::vector<CurveRow>& curves);
void WriteEpisodesCsv(const std::string& path,
                      const std::vector<EpisodeRow>& episodes);

struct DecileComparison {
  double first = 0.0;
  double last = 0.0;
};

// Mean of the first and last tenth (at least one element each).
DecileComparison CompareDeciles(const std::vector<double>& values);

std::vector<double> EpisodeRewards(const TrainResult& result);
// Collisions per curve window.
std::vector<double> WindowCollisions(const TrainResult& result);

}  // namespace hrl_cruise
