// Command-line front end: train, eval, transfer and replay.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hrl_cruise/config.h"
#include "hrl_cruise/harness.h"
#include "hrl_cruise/trainer.h"

namespace fs = std::filesystem;
using namespace hrl_cruise;

namespace {

constexpr int kUsageError = 2;
constexpr int kCheckFailed = 3;

struct CommonOptions {
  std::string config;
  std::string mode;
  uint64_t seed = 1;
  int64_t steps = 0;  // 0 keeps the config / command default
  std::string out_dir = ".";
};

void AddCommon(CLI::App* app, CommonOptions& opts) {
  app->add_option("--config", opts.config, "JSON config file")
      ->check(CLI::ExistingFile);
  app->add_option("--mode", opts.mode, "dynamics backend")
      ->check(CLI::IsMember({"point", "bicycle"}));
  app->add_option("--seed", opts.seed, "run seed");
  app->add_option("--steps", opts.steps, "environment steps")
      ->check(CLI::PositiveNumber);
  app->add_option("--out-dir", opts.out_dir, "directory for artifacts");
}

ExperimentConfig LoadConfig(const CommonOptions& opts) {
  ExperimentConfig config = opts.config.empty()
                                ? DefaultExperimentConfig()
                                : LoadExperimentConfig(opts.config);
  if (!opts.mode.empty()) config.env.mode = ParseDynamicsMode(opts.mode);
  return config;
}

fs::path OutPath(const CommonOptions& opts, const std::string& name) {
  fs::create_directories(opts.out_dir);
  return fs::path(opts.out_dir) / name;
}

std::ofstream OpenOut(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

int RunTrain(const std::string& agent, const CommonOptions& opts,
             const std::string& mop_model) {
  ExperimentConfig config = LoadConfig(opts);
  TrainConfig train = agent == "mop" ? config.mop_train : config.bp_train;
  train.seed = opts.seed;
  if (opts.steps > 0) train.total_steps = opts.steps;

  TrainResult result;
  if (agent == "mop") {
    result = TrainMop(config.env, train);
  } else {
    result = TrainBp(config.env, LoadModel(mop_model), train);
  }
  const fs::path model = OutPath(opts, agent + ".bin");
  SaveModel(result.network, model.string());
  WriteCurvesCsv(OutPath(opts, agent + "_curves.csv").string(), result.curves);
  WriteEpisodesCsv(OutPath(opts, agent + "_episodes.csv").string(),
                   result.episodes);

  const auto reward = CompareDeciles(EpisodeRewards(result));
  const auto collisions = CompareDeciles(WindowCollisions(result));
  std::cout << agent << ": " << result.episodes.size() << " episodes, "
            << "episode reward " << reward.first << " -> " << reward.last
            << ", collisions/1000 steps " << collisions.first << " -> "
            << collisions.last << "\nmodel written to " << model.string()
            << "\n";
  return 0;
}

RunConfig MakeRun(const ExperimentConfig& config, const CommonOptions& opts,
                  const std::string& mop_model, const std::string& bp_model) {
  RunConfig run;
  run.mode = config.env.mode;
  run.seed = opts.seed;
  if (opts.steps > 0) run.steps = opts.steps;
  run.mop_model = mop_model;
  run.bp_model = bp_model;
  return run;
}

int RunEval(const CommonOptions& opts, const std::vector<std::string>& stacks,
            int episodes, const std::string& trace_path,
            const std::string& mop_model, const std::string& bp_model) {
  const ExperimentConfig config = LoadConfig(opts);
  if (!trace_path.empty() && stacks.size() != 1) {
    std::cerr << "--trace needs exactly one --stack\n";
    return kUsageError;
  }
  std::vector<EvalReport> reports;
  for (const auto& name : stacks) {
    RunConfig run = MakeRun(config, opts, mop_model, bp_model);
    run.stack = ParsePlannerStack(name);
    if (episodes > 0) run.max_episodes = episodes;
    std::ofstream trace;
    if (!trace_path.empty()) trace = OpenOut(trace_path);
    reports.push_back(
        EvaluateRun(config, run, trace_path.empty() ? nullptr : &trace));
    std::ofstream ep = OpenOut(OutPath(opts, "episodes_" + name + ".csv"));
    WriteEpisodesCsv(ep, reports.back());
  }
  WriteReportTable(std::cout, reports);
  std::ofstream csv = OpenOut(OutPath(opts, "report.csv"));
  WriteReportCsv(csv, reports);
  return 0;
}

int RunTransferCommand(const CommonOptions& opts, const std::string& mop_model,
                       const std::string& bp_model) {
  const ExperimentConfig config = LoadConfig(opts);
  RunConfig run = MakeRun(config, opts, mop_model, bp_model);
  const TransferReport report = RunTransfer(config, run);
  WriteTransferReport(std::cout, report);
  std::ofstream csv = OpenOut(OutPath(opts, "transfer.csv"));
  WriteReportCsv(csv, {report.point, report.bicycle});
  const bool ok =
      report.lane_change_ok && report.follow_ok && report.collisions_ok;
  return ok ? 0 : kCheckFailed;
}

int RunReplay(const std::string& trace_path, bool ascii, int num_lanes) {
  std::ifstream in(trace_path);
  if (!in) {
    std::cerr << "cannot open " << trace_path << "\n";
    return 1;
  }
  const std::vector<TraceRow> rows = ParseTrace(in);
  if (ascii) {
    WriteReplayAscii(std::cout, rows, num_lanes);
  } else {
    WriteReplayCsv(std::cout, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical RL highway cruising: train, evaluate, replay"};
  app.require_subcommand(1);

  CommonOptions train_opts;
  std::string train_agent;
  std::string train_mop;
  CLI::App* train = app.add_subcommand("train", "train the MoP or the BP agent");
  train->add_option("agent", train_agent, "mop or bp")
      ->required()
      ->check(CLI::IsMember({"mop", "bp"}));
  AddCommon(train, train_opts);
  train->add_option("--mop-model", train_mop, "trained MoP (required for bp)")
      ->check(CLI::ExistingFile);

  CommonOptions eval_opts;
  std::vector<std::string> eval_stacks = {"rl"};
  int eval_episodes = 0;
  std::string eval_trace, eval_mop, eval_bp;
  CLI::App* eval = app.add_subcommand("eval", "evaluate planner stacks");
  AddCommon(eval, eval_opts);
  eval->add_option("--stack", eval_stacks, "rl, rule or mixed (repeatable)")
      ->check(CLI::IsMember({"rl", "rule", "mixed"}));
  eval->add_option("--episodes", eval_episodes, "stop after this many episodes")
      ->check(CLI::PositiveNumber);
  eval->add_option("--trace", eval_trace, "JSON-lines trace output");
  eval->add_option("--mop-model", eval_mop, "trained MoP");
  eval->add_option("--bp-model", eval_bp, "trained BP");

  CommonOptions transfer_opts;
  std::string transfer_mop, transfer_bp;
  CLI::App* transfer =
      app.add_subcommand("transfer", "point vs bicycle with frozen models");
  AddCommon(transfer, transfer_opts);
  transfer->add_option("--mop-model", transfer_mop, "trained MoP")->required();
  transfer->add_option("--bp-model", transfer_bp, "trained BP")->required();

  std::string replay_trace;
  bool replay_ascii = false;
  int replay_lanes = 3;
  CLI::App* replay = app.add_subcommand("replay", "turn a trace into a table");
  replay->add_option("trace", replay_trace, "trace file")->required();
  replay->add_flag("--ascii", replay_ascii, "text timeline instead of CSV");
  replay->add_option("--lanes", replay_lanes, "lane count for --ascii")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (train->parsed()) {
      if (train_agent == "bp" && train_mop.empty()) {
        std::cerr << "train bp: --mop-model is required\n";
        return kUsageError;
      }
      return RunTrain(train_agent, train_opts, train_mop);
    }
    if (eval->parsed()) {
      return RunEval(eval_opts, eval_stacks, eval_episodes, eval_trace,
                     eval_mop, eval_bp);
    }
    if (transfer->parsed()) {
      return RunTransferCommand(transfer_opts, transfer_mop, transfer_bp);
    }
    if (replay->parsed()) {
      return RunReplay(replay_trace, replay_ascii, replay_lanes);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const TraceParseError& e) {
    std::cerr << "trace error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
