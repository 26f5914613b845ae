#include "hrl_cruise/dqn.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

namespace hrl_cruise {
namespace {

std::string TempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Eigen::MatrixXd RandomMatrix(int rows, int cols, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = u(rng);
  }
  return m;
}

TEST(QNetworkTest, ShapesAndZeroHead) {
  QNetwork net(24, 9, {64, 64}, 1);
  EXPECT_EQ(net.Dims(), (std::vector<int>{24, 64, 64, 9}));
  EXPECT_EQ(net.ParameterCount(), 24u * 64 + 64 + 64 * 64 + 64 + 64 * 9 + 9);
  net.ZeroOutputLayer();
  std::vector<double> x(24, 0.3);
  EXPECT_EQ(net.Forward(x), Eigen::VectorXd::Zero(9));
}

TEST(QNetworkTest, DeterministicForward) {
  const QNetwork a(14, 3, {64, 64}, 7);
  const QNetwork b(14, 3, {64, 64}, 7);
  EXPECT_TRUE(a == b);
  std::vector<double> x(14);
  for (int i = 0; i < 14; ++i) x[i] = 0.1 * i - 0.5;
  const Eigen::VectorXd qa = a.Forward(x);
  const Eigen::VectorXd qb = b.Forward(x);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(qa(i), qb(i));
  EXPECT_FALSE(a == QNetwork(14, 3, {64, 64}, 8));
}

TEST(QNetworkTest, DimensionMismatchThrows) {
  const QNetwork net(24, 9, {64, 64}, 1);
  std::vector<double> x(14, 0.0);
  EXPECT_THROW(net.Forward(x), std::invalid_argument);
}

// d/dw of sum(G .* Q(X)) against central differences, per layer.
TEST(QNetworkTest, GradientMatchesFiniteDifferences) {
  QNetwork net(6, 4, {64, 64}, 21);
  // Nonzero biases so every parameter is exercised.
  for (auto& layer : net.layers()) {
    layer.bias = RandomMatrix(layer.bias.size(), 1, 5).col(0) * 0.1;
  }
  const Eigen::MatrixXd x = RandomMatrix(6, 5, 2);
  const Eigen::MatrixXd g = RandomMatrix(4, 5, 3);
  const auto grads = net.Backward(x, g);
  auto objective = [&](const QNetwork& n) {
    return (n.ForwardBatch(x).array() * g.array()).sum();
  };
  const double h = 1e-6;
  double worst = 0.0;
  for (size_t l = 0; l < net.layers().size(); ++l) {
    auto check = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double up = objective(net);
      param = saved - h;
      const double down = objective(net);
      param = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double scale = std::max(1e-3, std::abs(analytic) + std::abs(numeric));
      worst = std::max(worst, std::abs(analytic - numeric) / scale);
    };
    auto& layer = net.layers()[l];
    for (Eigen::Index r = 0; r < layer.weight.rows(); r += 3) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); c += 3) {
        check(layer.weight(r, c), grads[l].weight(r, c));
      }
      check(layer.bias(r), grads[l].bias(r));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(TdTest, LossGradientMatchesFiniteDifferences) {
  QNetwork net(4, 3, {64, 64}, 4);
  const QNetwork target(4, 3, {64, 64}, 5);
  std::vector<Transition> data;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 8; ++i) {
    Transition t;
    for (int k = 0; k < 4; ++k) {
      t.obs.push_back(u(rng));
      t.next_obs.push_back(u(rng));
    }
    t.action = i % 3;
    t.reward = u(rng);
    t.terminal = i % 4 == 0;
    data.push_back(t);
  }
  std::vector<const Transition*> batch;
  for (const auto& t : data) batch.push_back(&t);
  std::vector<QNetwork::Layer> grads;
  TdLossAndGradient(net, target, batch, 0.9, &grads);
  const double h = 1e-6;
  double worst = 0.0;
  auto& w = net.layers()[1].weight;
  for (Eigen::Index r = 0; r < w.rows(); r += 7) {
    for (Eigen::Index c = 0; c < w.cols(); c += 7) {
      const double saved = w(r, c);
      w(r, c) = saved + h;
      const double up = TdLossAndGradient(net, target, batch, 0.9, nullptr);
      w(r, c) = saved - h;
      const double down = TdLossAndGradient(net, target, batch, 0.9, nullptr);
      w(r, c) = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads[1].weight(r, c);
      worst = std::max(worst, std::abs(analytic - numeric) /
                                  std::max(1e-3, std::abs(analytic) + std::abs(numeric)));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(TdTest, TerminalFixedPointHasZeroError) {
  QNetwork net(2, 2, {8}, 1);
  const QNetwork target(2, 2, {8}, 2);
  Transition t;
  t.obs = {0.5, -0.5};
  t.next_obs = {0.1, 0.2};
  t.action = 1;
  t.terminal = true;
  t.reward = net.Forward(t.obs)(1);
  std::vector<QNetwork::Layer> grads;
  EXPECT_NEAR(TdLossAndGradient(net, target, {&t}, 0.99, &grads), 0.0, 1e-24);
  for (const auto& g : grads) EXPECT_NEAR(g.weight.norm(), 0.0, 1e-12);
}

TEST(TdTest, ZeroGammaRegressesOnReward) {
  TrainConfig config;
  config.gamma = 1e-300;  // Validate() requires gamma > 0
  config.optimizer = OptimizerKind::kAdam;
  config.learning_rate = 1e-2;
  QNetwork net(1, 1, {16}, 3);
  const QNetwork target(1, 1, {16}, 4);
  Optimizer opt(net, config);
  Transition a{{1.0}, 0, 2.0, {5.0}, false};
  Transition b{{-1.0}, 0, -1.0, {5.0}, false};
  for (int i = 0; i < 3000; ++i) TdUpdate(net, target, {&a, &b}, config, opt);
  EXPECT_NEAR(net.Forward(a.obs)(0), 2.0, 1e-2);
  EXPECT_NEAR(net.Forward(b.obs)(0), -1.0, 1e-2);
}

// Chain 0 - 1 - 2, state 2 terminal with reward 1 on entry. Action 0 moves
// left (bounded), action 1 moves right.
TEST(TdTest, ChainMdpMatchesValueIteration) {
  const double gamma = 0.9;
  double q_vi[2][2] = {};
  for (int it = 0; it < 1000; ++it) {
    double next[2][2];
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) {
        const int s2 = a == 0 ? std::max(0, s - 1) : s + 1;
        if (s2 == 2) {
          next[s][a] = 1.0;
        } else {
          next[s][a] = gamma * std::max(q_vi[s2][0], q_vi[s2][1]);
        }
      }
    }
    std::copy(&next[0][0], &next[0][0] + 4, &q_vi[0][0]);
  }

  TrainConfig config;
  config.gamma = gamma;
  config.optimizer = OptimizerKind::kAdam;
  config.learning_rate = 3e-3;
  QNetwork net(3, 2, {32, 32}, 9);
  QNetwork target = net;
  Optimizer opt(net, config);
  auto onehot = [](int s) {
    std::vector<double> v(3, 0.0);
    v[s] = 1.0;
    return v;
  };
  std::vector<Transition> data;
  for (int s = 0; s < 2; ++s) {
    for (int a = 0; a < 2; ++a) {
      const int s2 = a == 0 ? std::max(0, s - 1) : s + 1;
      data.push_back({onehot(s), a, s2 == 2 ? 1.0 : 0.0, onehot(s2), s2 == 2});
    }
  }
  std::vector<const Transition*> batch;
  for (const auto& t : data) batch.push_back(&t);
  for (int i = 1; i <= 6000; ++i) {
    TdUpdate(net, target, batch, config, opt);
    if (i % 100 == 0) target = net;
  }
  for (int s = 0; s < 2; ++s) {
    const Eigen::VectorXd q = net.Forward(onehot(s));
    for (int a = 0; a < 2; ++a) EXPECT_NEAR(q(a), q_vi[s][a], 1e-2) << s << a;
  }
}

TEST(ReplayTest, CapacityAndEviction) {
  ReplayBuffer buffer(3);
  for (int i = 0; i < 5; ++i) buffer.Add({{double(i)}, 0, double(i), {0.0}, false});
  EXPECT_EQ(buffer.size(), 3u);
  EXPECT_EQ(buffer.at(0).reward, 2.0);
  EXPECT_EQ(buffer.at(2).reward, 4.0);
  EXPECT_THROW(buffer.at(3), std::out_of_range);
  EXPECT_THROW(ReplayBuffer(0), std::invalid_argument);
}

TEST(ReplayTest, SamplesWithoutReplacement) {
  ReplayBuffer buffer(100);
  for (int i = 0; i < 40; ++i) buffer.Add({{double(i)}, 0, double(i), {0.0}, false});
  std::mt19937_64 rng(1);
  std::vector<int> hits(40, 0);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto batch = buffer.Sample(32, rng);
    std::vector<bool> seen(40, false);
    for (const Transition* t : batch) {
      const int i = static_cast<int>(t->reward);
      ASSERT_FALSE(seen[i]);
      seen[i] = true;
      ++hits[i];
    }
  }
  // Each index is drawn with probability 32/40 per batch.
  for (int h : hits) EXPECT_NEAR(h / 2000.0, 0.8, 0.05);
  EXPECT_THROW(buffer.Sample(41, rng), std::invalid_argument);
}

TEST(ModelIoTest, RoundTripIsExact) {
  const QNetwork net(24, 9, {64, 64}, 11);
  const std::string path = TempPath("hrl_roundtrip.bin");
  SaveModel(net, path);
  const QNetwork loaded = LoadModel(path);
  EXPECT_TRUE(net == loaded);
  std::vector<double> x(24, 0.25);
  EXPECT_EQ(net.Forward(x), loaded.Forward(x));
  std::remove(path.c_str());
}

TEST(ModelIoTest, ShapeMismatchAndCorruptFiles) {
  const std::string path = TempPath("hrl_bp.bin");
  SaveModel(QNetwork(14, 3, {64, 64}, 1), path);
  QNetwork mop(24, 9, {64, 64}, 1);
  EXPECT_THROW(LoadModelInto(mop, path), ShapeMismatchError);

  std::ofstream(path, std::ios::binary | std::ios::trunc) << "garbage";
  EXPECT_THROW(LoadModel(path), ModelIoError);
  EXPECT_THROW(LoadModel(TempPath("hrl_does_not_exist.bin")), ModelIoError);

  // Truncated payload.
  SaveModel(QNetwork(4, 2, {8}, 1), path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  EXPECT_THROW(LoadModel(path), ModelIoError);
  std::remove(path.c_str());
}

TEST(TrainConfigTest, EpsilonScheduleAndValidation) {
  TrainConfig config;
  config.total_steps = 1000;
  EXPECT_DOUBLE_EQ(config.EpsilonAt(0), 1.0);
  EXPECT_NEAR(config.EpsilonAt(150), 0.525, 1e-12);
  EXPECT_DOUBLE_EQ(config.EpsilonAt(300), 0.05);
  EXPECT_DOUBLE_EQ(config.EpsilonAt(999), 0.05);
  config.gamma = 1.0;
  EXPECT_THROW(config.Validate(), std::invalid_argument);
  config.gamma = 0.99;
  config.epsilon_end = 0.01;
  EXPECT_THROW(config.Validate(), std::invalid_argument);
  EXPECT_EQ(ParseOptimizer("adam"), OptimizerKind::kAdam);
  EXPECT_THROW(ParseOptimizer("rmsprop"), std::invalid_argument);
}

TEST(AgentTest, TargetSyncsOnlyOnSchedule) {
  TrainConfig config;
  config.target_sync_interval = 5;
  config.batch_size = 4;
  DqnAgent agent(2, 2, config);
  for (int i = 0; i < 10; ++i) {
    agent.Remember({{0.1 * i, 1.0}, i % 2, 1.0, {0.0, 1.0}, false});
  }
  for (int u = 1; u <= 12; ++u) {
    agent.Update();
    if (u % 5 == 0) {
      EXPECT_TRUE(agent.online() == agent.target()) << u;
    } else {
      EXPECT_FALSE(agent.online() == agent.target()) << u;
    }
  }
  EXPECT_EQ(agent.updates(), 12);
}

TEST(AgentTest, GreedyActIsDeterministic) {
  TrainConfig config;
  DqnAgent a(3, 4, config);
  DqnAgent b(3, 4, config);
  std::vector<double> x = {0.2, -0.4, 0.9};
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.Act(x, 0.0), b.Act(x, 0.0));
  EXPECT_EQ(a.Act(x, 0.0), GreedyAction(a.online().Forward(x)));
}

TEST(AgentTest, DivergenceGuardAborts) {
  TrainConfig config;
  config.batch_size = 1;
  config.divergence_limit = 1e-6;
  DqnAgent agent(1, 1, config);
  agent.Remember({{1.0}, 0, 1e3, {1.0}, true});
  EXPECT_THROW(agent.Update(), TrainingDivergedError);
}

}  // namespace
}  // namespace hrl_cruise
