#include "hrl_cruise/dqn.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace hrl_cruise {

QNetwork::QNetwork(int input_dim, int output_dim,
                   std::vector<int> hidden_sizes, uint64_t seed) {
  if (input_dim <= 0 || output_dim <= 0) {
    throw std::invalid_argument("q-network dims must be positive");
  }
  std::mt19937_64 rng(seed);
  std::vector<int> dims = {input_dim};
  dims.insert(dims.end(), hidden_sizes.begin(), hidden_sizes.end());
  dims.push_back(output_dim);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    const double bound = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    }
    layers_.push_back(std::move(layer));
  }
}

int QNetwork::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int QNetwork::output_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

std::vector<int> QNetwork::Dims() const {
  std::vector<int> dims;
  if (layers_.empty()) return dims;
  dims.push_back(input_dim());
  for (const auto& layer : layers_) dims.push_back(static_cast<int>(layer.weight.rows()));
  return dims;
}

size_t QNetwork::ParameterCount() const {
  size_t count = 0;
  for (const auto& layer : layers_) {
    count += layer.weight.size() + layer.bias.size();
  }
  return count;
}

Eigen::VectorXd QNetwork::Forward(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != input_dim()) {
    throw std::invalid_argument("q-network expects " +
                                std::to_string(input_dim()) + " inputs, got " +
                                std::to_string(input.size()));
  }
  Eigen::MatrixXd x =
      Eigen::Map<const Eigen::VectorXd>(input.data(), input.size());
  return ForwardBatch(x).col(0);
}

Eigen::MatrixXd QNetwork::ForwardBatch(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_dim()) {
    throw std::invalid_argument("q-network batch has wrong input dimension");
  }
  Eigen::MatrixXd x = inputs;
  for (size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * x;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    x = std::move(z);
  }
  return x;
}

std::vector<QNetwork::Layer> QNetwork::Backward(
    const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& output_grad) const {
  std::vector<Eigen::MatrixXd> activations = {inputs};
  for (size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * activations.back();
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    activations.push_back(std::move(z));
  }
  std::vector<Layer> grads(layers_.size());
  Eigen::MatrixXd delta = output_grad;
  for (size_t l = layers_.size(); l-- > 0;) {
    if (l + 1 < layers_.size()) {
      // ReLU derivative taken from the post-activation value.
      delta = delta.cwiseProduct(
          (activations[l + 1].array() > 0.0).cast<double>().matrix());
    }
    grads[l].weight = delta * activations[l].transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l > 0) delta = layers_[l].weight.transpose() * delta;
  }
  return grads;
}

void QNetwork::ZeroOutputLayer() {
  if (layers_.empty()) return;
  layers_.back().weight.setZero();
  layers_.back().bias.setZero();
}

bool QNetwork::AllFinite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

bool QNetwork::operator==(const QNetwork& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = other.layers_[l];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
        a.weight != b.weight || a.bias != b.bias) {
      return false;
    }
  }
  return true;
}

namespace {

constexpr char kMagic[8] = {'H', 'R', 'L', 'Q', 'N', 'E', 'T', '1'};
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "model files are written in native little-endian order");

template <typename T>
void WritePod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T ReadPod(std::ifstream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ModelIoError("truncated model file: " + path);
  return value;
}

}  // namespace

void SaveModel(const QNetwork& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelIoError("cannot open model file for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  WritePod(out, kVersion);
  const std::vector<int> dims = net.Dims();
  WritePod(out, static_cast<uint32_t>(dims.size()));
  for (int d : dims) WritePod(out, static_cast<uint32_t>(d));
  for (const auto& layer : net.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        WritePod(out, layer.weight(r, c));
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) WritePod(out, layer.bias(r));
  }
  if (!out) throw ModelIoError("failed writing model file: " + path);
}

QNetwork LoadModel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelIoError("cannot open model file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ModelIoError("not a q-network model file: " + path);
  }
  const auto version = ReadPod<uint32_t>(in, path);
  if (version != kVersion) {
    throw ModelIoError("unsupported model version " + std::to_string(version) +
                       " in " + path);
  }
  const auto count = ReadPod<uint32_t>(in, path);
  if (count < 2 || count > 64) throw ModelIoError("corrupt layer count in " + path);
  std::vector<int> dims(count);
  for (auto& d : dims) {
    d = static_cast<int>(ReadPod<uint32_t>(in, path));
    if (d <= 0 || d > (1 << 20)) throw ModelIoError("corrupt layer size in " + path);
  }
  std::vector<int> hidden(dims.begin() + 1, dims.end() - 1);
  QNetwork net(dims.front(), dims.back(), hidden, 0);
  for (auto& layer : net.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = ReadPod<double>(in, path);
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      layer.bias(r) = ReadPod<double>(in, path);
    }
  }
  in.peek();
  if (!in.eof()) throw ModelIoError("trailing bytes in model file: " + path);
  return net;
}

void LoadModelInto(QNetwork& net, const std::string& path) {
  QNetwork loaded = LoadModel(path);
  if (loaded.Dims() != net.Dims()) {
    auto show = [](const std::vector<int>& dims) {
      std::string text;
      for (int d : dims) text += (text.empty() ? "" : "x") + std::to_string(d);
      return text;
    };
    throw ShapeMismatchError("model " + path + " has shape " +
                             show(loaded.Dims()) + ", expected " +
                             show(net.Dims()));
  }
  net = std::move(loaded);
}

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be > 0");
  data_.reserve(std::min<size_t>(capacity, 1 << 16));
}

void ReplayBuffer::Add(Transition transition) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(transition));
  } else {
    data_[next_] = std::move(transition);
  }
  next_ = (next_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(size_t age_index) const {
  if (age_index >= data_.size()) throw std::out_of_range("replay index");
  const size_t oldest = data_.size() < capacity_ ? 0 : next_;
  return data_[(oldest + age_index) % data_.size()];
}

std::vector<const Transition*> ReplayBuffer::Sample(size_t count,
                                                    std::mt19937_64& rng) const {
  if (count > data_.size()) {
    throw std::invalid_argument("replay sample larger than buffer");
  }
  // Floyd's algorithm: distinct indices in O(count^2) for small batches.
  std::vector<size_t> chosen;
  chosen.reserve(count);
  const size_t n = data_.size();
  for (size_t j = n - count; j < n; ++j) {
    const size_t t = std::uniform_int_distribution<size_t>(0, j)(rng);
    if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) {
      chosen.push_back(t);
    } else {
      chosen.push_back(j);
    }
  }
  std::vector<const Transition*> out;
  out.reserve(count);
  for (size_t index : chosen) out.push_back(&data_[index]);
  return out;
}

void TrainConfig::Validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("train: gamma must be in (0, 1)");
  }
  if (batch_size <= 0) throw std::invalid_argument("train: batch must be > 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: lr must be > 0");
  if (target_sync_interval <= 0) {
    throw std::invalid_argument("train: target sync interval must be > 0");
  }
  if (!(epsilon_end >= 0.05 - 1e-12 && epsilon_start <= 1.0 &&
        epsilon_end <= epsilon_start)) {
    throw std::invalid_argument("train: epsilon must stay within [0.05, 1]");
  }
  if (total_steps <= 0) throw std::invalid_argument("train: steps must be > 0");
  if (curve_window <= 0) throw std::invalid_argument("train: curve window > 0");
  if (updates_per_step <= 0) {
    throw std::invalid_argument("train: updates_per_step must be > 0");
  }
}

double TrainConfig::EpsilonAt(int64_t step) const {
  const double horizon = epsilon_fraction * static_cast<double>(total_steps);
  if (horizon <= 0.0) return epsilon_end;
  const double progress = static_cast<double>(step) / horizon;
  if (progress >= 1.0) return epsilon_end;
  return epsilon_start + progress * (epsilon_end - epsilon_start);
}

OptimizerKind ParseOptimizer(const std::string& text) {
  if (text == "sgd" || text == "momentum") return OptimizerKind::kSgdMomentum;
  if (text == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer '" + text + "'");
}

Optimizer::Optimizer(const QNetwork& net, const TrainConfig& config)
    : config_(config) {
  for (const auto& layer : net.layers()) {
    QNetwork::Layer zero{Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                         Eigen::VectorXd::Zero(layer.bias.size())};
    first_.push_back(zero);
    second_.push_back(zero);
  }
}

void Optimizer::Apply(QNetwork& net, const std::vector<QNetwork::Layer>& grads) {
  double scale = 1.0;
  if (config_.max_grad_norm > 0.0) {
    double squared = 0.0;
    for (const auto& g : grads) {
      squared += g.weight.squaredNorm() + g.bias.squaredNorm();
    }
    const double norm = std::sqrt(squared);
    if (norm > config_.max_grad_norm) scale = config_.max_grad_norm / norm;
  }
  ++steps_;
  auto& layers = net.layers();
  const double lr = config_.learning_rate;
  if (config_.optimizer == OptimizerKind::kSgdMomentum) {
    for (size_t l = 0; l < layers.size(); ++l) {
      first_[l].weight = config_.momentum * first_[l].weight + scale * grads[l].weight;
      first_[l].bias = config_.momentum * first_[l].bias + scale * grads[l].bias;
      layers[l].weight -= lr * first_[l].weight;
      layers[l].bias -= lr * first_[l].bias;
    }
    return;
  }
  const double b1 = config_.adam_beta1;
  const double b2 = config_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double eps = config_.adam_epsilon;
  auto step = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * scale * g;
    v = b2 * v + (1.0 - b2) * (scale * g).cwiseProduct(scale * g);
    param.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (size_t l = 0; l < layers.size(); ++l) {
    step(layers[l].weight, first_[l].weight, second_[l].weight, grads[l].weight);
    step(layers[l].bias, first_[l].bias, second_[l].bias, grads[l].bias);
  }
}

int GreedyAction(const Eigen::VectorXd& q_values) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < q_values.size(); ++i) {
    if (q_values(i) > q_values(best)) best = i;
  }
  return static_cast<int>(best);
}

double TdLossAndGradient(const QNetwork& net, const QNetwork& target_net,
                         const std::vector<const Transition*>& batch,
                         double gamma, std::vector<QNetwork::Layer>* grads,
                         double huber_delta) {
  if (batch.empty()) throw std::invalid_argument("empty TD batch");
  const int n = static_cast<int>(batch.size());
  const int in = net.input_dim();
  Eigen::MatrixXd obs(in, n);
  Eigen::MatrixXd next_obs(in, n);
  for (int j = 0; j < n; ++j) {
    const Transition& t = *batch[j];
    if (static_cast<int>(t.obs.size()) != in ||
        static_cast<int>(t.next_obs.size()) != in) {
      throw std::invalid_argument("transition dimension mismatch");
    }
    obs.col(j) = Eigen::Map<const Eigen::VectorXd>(t.obs.data(), in);
    next_obs.col(j) = Eigen::Map<const Eigen::VectorXd>(t.next_obs.data(), in);
  }
  const Eigen::MatrixXd q = net.ForwardBatch(obs);
  const Eigen::MatrixXd q_next = target_net.ForwardBatch(next_obs);
  Eigen::MatrixXd output_grad = Eigen::MatrixXd::Zero(q.rows(), n);
  double loss = 0.0;
  for (int j = 0; j < n; ++j) {
    const Transition& t = *batch[j];
    double target = t.reward;
    if (!t.terminal) target += gamma * q_next.col(j).maxCoeff();
    const double error = q(t.action, j) - target;
    if (huber_delta > 0.0 && std::abs(error) > huber_delta) {
      // Linear tail, scaled to match 2 * error inside the quadratic zone.
      loss += huber_delta * (2.0 * std::abs(error) - huber_delta);
      output_grad(t.action, j) = 2.0 * huber_delta * (error > 0 ? 1.0 : -1.0) / n;
    } else {
      loss += error * error;
      output_grad(t.action, j) = 2.0 * error / n;
    }
  }
  loss /= n;
  if (grads != nullptr) *grads = net.Backward(obs, output_grad);
  return loss;
}

double TdUpdate(QNetwork& net, const QNetwork& target_net,
                const std::vector<const Transition*>& batch,
                const TrainConfig& config, Optimizer& optimizer) {
  std::vector<QNetwork::Layer> grads;
  const double loss =
      TdLossAndGradient(net, target_net, batch, config.gamma, &grads,
                        config.huber_delta);
  optimizer.Apply(net, grads);
  return loss;
}

DqnAgent::DqnAgent(int input_dim, int output_dim, const TrainConfig& config)
    : config_(config),
      online_(input_dim, output_dim, config.hidden_sizes, config.seed),
      target_(online_),
      optimizer_(online_, config),
      buffer_(config.replay_capacity),
      rng_(config.seed ^ 0x5DEECE66DULL),
      num_actions_(output_dim) {
  config_.Validate();
}

int DqnAgent::Act(std::span<const double> obs, double epsilon) {
  // The draw is consumed even when epsilon is zero to keep streams aligned.
  const double draw = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  const int random_action =
      std::uniform_int_distribution<int>(0, num_actions_ - 1)(rng_);
  if (draw < epsilon) return random_action;
  return GreedyAction(online_.Forward(obs));
}

void DqnAgent::Remember(Transition transition) {
  buffer_.Add(std::move(transition));
}

double DqnAgent::Update() {
  if (buffer_.size() < static_cast<size_t>(config_.batch_size)) return -1.0;
  double total = 0.0;
  for (int i = 0; i < config_.updates_per_step; ++i) {
    const auto batch = buffer_.Sample(config_.batch_size, rng_);
    const double loss = TdUpdate(online_, target_, batch, config_, optimizer_);
    if (!std::isfinite(loss) || loss > config_.divergence_limit) {
      throw TrainingDivergedError("TD loss diverged: " + std::to_string(loss));
    }
    ++updates_;
    if (updates_ % config_.target_sync_interval == 0) target_ = online_;
    total += loss;
  }
  return total / config_.updates_per_step;
}

}  // namespace hrl_cruise
