#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hrl_cruise {

// Fully connected Q-network: ReLU hidden layers and a linear head.
class QNetwork {
 public:
  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
  };

  QNetwork() = default;
  // He-uniform initialization from `seed`; biases start at zero.
  QNetwork(int input_dim, int output_dim, std::vector<int> hidden_sizes,
           uint64_t seed);

  int input_dim() const;
  int output_dim() const;
  // input, hidden..., output
  std::vector<int> Dims() const;
  size_t ParameterCount() const;

  // Throws std::invalid_argument on dimension mismatch.
  Eigen::VectorXd Forward(std::span<const double> input) const;
  // Columns are samples.
  Eigen::MatrixXd ForwardBatch(const Eigen::MatrixXd& inputs) const;

  // Gradient of sum_ij output_grad(i, j) * Q(inputs)(i, j) w.r.t. every
  // weight and bias, returned in the same layout as layers().
  std::vector<Layer> Backward(const Eigen::MatrixXd& inputs,
                              const Eigen::MatrixXd& output_grad) const;

  void ZeroOutputLayer();
  bool AllFinite() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  bool operator==(const QNetwork& other) const;

 private:
  std::vector<Layer> layers_;
};

class ShapeMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary layout: 8-byte magic "HRLQNET1", uint32 version, uint32 dim count,
// uint32 dims, then per layer the row-major weight matrix followed by the
// bias, all as little-endian float64.
void SaveModel(const QNetwork& net, const std::string& path);
QNetwork LoadModel(const std::string& path);
// Loads into an existing network and rejects files of a different shape.
void LoadModelInto(QNetwork& net, const std::string& path);

struct Transition {
  std::vector<double> obs;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool terminal = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);

  // Overwrites the oldest transition once full.
  void Add(Transition transition);
  // Uniform without replacement; requires count <= size().
  std::vector<const Transition*> Sample(size_t count,
                                        std::mt19937_64& rng) const;

  size_t size() const { return data_.size(); }
  size_t capacity() const { return capacity_; }
  // Transitions in insertion order, oldest first.
  const Transition& at(size_t age_index) const;

 private:
  size_t capacity_;
  size_t next_ = 0;
  std::vector<Transition> data_;
};

enum class OptimizerKind { kSgdMomentum, kAdam };

struct TrainConfig {
  double gamma = 0.99;
  int batch_size = 32;
  double learning_rate = 1e-3;
  int target_sync_interval = 1000;  // gradient updates
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_fraction = 0.3;
  int64_t total_steps = 1'000'000;
  int64_t warmup_steps = 1000;
  size_t replay_capacity = 50'000;
  OptimizerKind optimizer = OptimizerKind::kSgdMomentum;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double max_grad_norm = 10.0;  // <= 0 disables clipping
  double huber_delta = 0.0;     // <= 0 selects plain squared error
  int updates_per_step = 1;
  std::vector<int> hidden_sizes = {64, 64};
  uint64_t seed = 1;
  double divergence_limit = 1e6;
  int curve_window = 1000;
  int bp_period = 100;  // random BP schedule during MoP training

  void Validate() const;
  double EpsilonAt(int64_t step) const;
};

OptimizerKind ParseOptimizer(const std::string& text);

class Optimizer {
 public:
  Optimizer(const QNetwork& net, const TrainConfig& config);
  void Apply(QNetwork& net, const std::vector<QNetwork::Layer>& grads);

 private:
  TrainConfig config_;
  std::vector<QNetwork::Layer> first_;
  std::vector<QNetwork::Layer> second_;
  int64_t steps_ = 0;
};

// Mean squared TD error with y = r + gamma * max_a' Q_target(s', a') (y = r on
// terminal). Applies one optimizer step and returns the pre-step loss.
double TdUpdate(QNetwork& net, const QNetwork& target_net,
                const std::vector<const Transition*>& batch,
                const TrainConfig& config, Optimizer& optimizer);

// TD loss and its gradient without touching the network.
double TdLossAndGradient(const QNetwork& net, const QNetwork& target_net,
                         const std::vector<const Transition*>& batch,
                         double gamma, std::vector<QNetwork::Layer>* grads,
                         double huber_delta = 0.0);

int GreedyAction(const Eigen::VectorXd& q_values);

class TrainingDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Online network, frozen target copy, replay buffer and epsilon-greedy
// exploration.
class DqnAgent {
 public:
  DqnAgent(int input_dim, int output_dim, const TrainConfig& config);

  int Act(std::span<const double> obs, double epsilon);
  void Remember(Transition transition);
  // One TD update when the buffer holds a batch; returns the loss or a
  // negative value when nothing was done.
  double Update();

  const QNetwork& online() const { return online_; }
  const QNetwork& target() const { return target_; }
  int64_t updates() const { return updates_; }
  const ReplayBuffer& buffer() const { return buffer_; }

 private:
  TrainConfig config_;
  QNetwork online_;
  QNetwork target_;
  Optimizer optimizer_;
  ReplayBuffer buffer_;
  std::mt19937_64 rng_;
  int num_actions_;
  int64_t updates_ = 0;
};

}  // namespace hrl_cruise
