#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dropkit/error.hpp"

namespace dropkit {

/// Output row 0 is P(dropout), row 1 is P(retention).
inline constexpr int kDropoutClass = 0;
inline constexpr int kRetentionClass = 1;

/// Column-wise softmax; subtracting the column max keeps exp() in range.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> softmax_columns(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      (logits.rowwise() - logits.colwise().maxCoeff()).array().exp().matrix();
  out.array().rowwise() /= out.colwise().sum().array();
  return out;
}

/// Fully connected classifier: tanh hidden layers, softmax over two output logits.
/// Inputs are column-major batches (one sample per column).
template <typename Scalar>
class Mlp {
public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix weight;  // out x in
    Vector bias;
  };

  Mlp() = default;

  /// All-zero parameters.
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2 || sizes_.back() != 2)
      throw ConfigError("MLP needs at least an input and a 2-unit output layer");
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
      if (sizes_[l - 1] < 1 || sizes_[l] < 1) throw ConfigError("MLP layer sizes must be positive");
      layers_.push_back({Matrix::Zero(sizes_[l], sizes_[l - 1]), Vector::Zero(sizes_[l])});
    }
  }

  /// Glorot-uniform weights, zero biases.
  static Mlp glorot(std::vector<int> sizes, std::uint64_t seed) {
    Mlp model(std::move(sizes));
    std::mt19937_64 rng(seed);
    for (auto& layer : model.layers_) {
      const double limit = std::sqrt(6.0 / double(layer.weight.rows() + layer.weight.cols()));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
        layer.weight.data()[i] = static_cast<Scalar>(dist(rng));
    }
    return model;
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_dim() const { return sizes_.empty() ? 0 : sizes_.front(); }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Matrix logits(const Eigen::Ref<const Matrix>& inputs) const {
    check_input(inputs);
    Matrix a = inputs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = (layers_[l].weight * a).colwise() + layers_[l].bias;
      a = (l + 1 < layers_.size()) ? Matrix(z.array().tanh().matrix()) : z;
    }
    return a;
  }

  Matrix probabilities(const Eigen::Ref<const Matrix>& inputs) const {
    return softmax_columns(logits(inputs));
  }

  /// Mean cross-entropy of `targets` (class indices) under the model.
  Scalar loss(const Eigen::Ref<const Matrix>& inputs, const Eigen::Ref<const Eigen::VectorXi>& targets) const {
    const Matrix p = probabilities(inputs);
    Scalar total = 0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) total -= std::log(std::max(p(targets(j), j), Scalar(1e-300)));
    return total / Scalar(p.cols());
  }

  /// Loss plus its gradient with respect to every layer, by backpropagation.
  Scalar loss_and_gradient(const Eigen::Ref<const Matrix>& inputs,
                           const Eigen::Ref<const Eigen::VectorXi>& targets,
                           std::vector<Layer>& gradient) const {
    check_input(inputs);
    const auto n = inputs.cols();
    std::vector<Matrix> activations{inputs};
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = (layers_[l].weight * activations.back()).colwise() + layers_[l].bias;
      activations.push_back(l + 1 < layers_.size() ? Matrix(z.array().tanh().matrix()) : z);
    }
    const Matrix p = softmax_columns(activations.back());
    Scalar total = 0;
    Matrix delta = p;
    for (Eigen::Index j = 0; j < n; ++j) {
      total -= std::log(std::max(p(targets(j), j), Scalar(1e-300)));
      delta(targets(j), j) -= Scalar(1);
    }
    delta /= Scalar(n);

    gradient.resize(layers_.size());
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const Matrix& a_prev = activations[l];
      gradient[l].weight = delta * a_prev.transpose();
      gradient[l].bias = delta.rowwise().sum();
      if (l > 0) {
        delta = ((layers_[l].weight.transpose() * delta).array() * (Scalar(1) - a_prev.array().square())).matrix();
      }
    }
    return total / Scalar(n);
  }

private:
  std::vector<int> sizes_;
  std::vector<Layer> layers_;

  void check_input(const Eigen::Ref<const Matrix>& inputs) const {
    if (inputs.rows() != input_dim())
      throw DimensionMismatch("MLP expects " + std::to_string(input_dim()) + " features, got " +
                              std::to_string(inputs.rows()));
  }
};

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 300;
  int batch_size = 32;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  std::vector<int> hidden{32, 16};
};

template <typename Scalar>
struct TrainResult {
  Mlp<Scalar> model;
  Scalar final_loss = 0;
};

/// Mini-batch gradient descent with momentum on mean cross-entropy. Deterministic for a
/// given seed (initialization and per-epoch shuffles both derive from it).
template <typename Scalar>
TrainResult<Scalar> train_mlp(const typename Mlp<Scalar>::Matrix& inputs, const Eigen::VectorXi& targets,
                              const TrainConfig& config) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  const auto n = inputs.cols();
  if (n == 0) throw ValidationError("cannot train on an empty set");
  if (targets.size() != n) throw DimensionMismatch("one target per training column required");
  if ((targets.array() == kDropoutClass).all() || (targets.array() == kRetentionClass).all())
    throw ValidationError("training set has a single class");
  if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0))
    throw ConfigError("epochs, batch size and learning rate must be positive");

  std::vector<int> sizes{static_cast<int>(inputs.rows())};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(2);
  auto model = Mlp<Scalar>::glorot(sizes, config.seed);

  std::vector<typename Mlp<Scalar>::Layer> velocity(model.layers().size()), gradient;
  for (std::size_t l = 0; l < velocity.size(); ++l) {
    velocity[l].weight = Matrix::Zero(model.layers()[l].weight.rows(), model.layers()[l].weight.cols());
    velocity[l].bias = Mlp<Scalar>::Vector::Zero(model.layers()[l].bias.size());
  }

  std::mt19937_64 rng(config.seed ^ 0x5bd1e995ULL);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto lr = static_cast<Scalar>(config.learning_rate);
  const auto mu = static_cast<Scalar>(config.momentum);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const auto m = std::min<Eigen::Index>(config.batch_size, n - start);
      Matrix batch(inputs.rows(), m);
      Eigen::VectorXi batch_targets(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        batch.col(j) = inputs.col(order[start + j]);
        batch_targets(j) = targets(order[start + j]);
      }
      model.loss_and_gradient(batch, batch_targets, gradient);
      for (std::size_t l = 0; l < gradient.size(); ++l) {
        velocity[l].weight = mu * velocity[l].weight - lr * gradient[l].weight;
        velocity[l].bias = mu * velocity[l].bias - lr * gradient[l].bias;
        model.layers()[l].weight += velocity[l].weight;
        model.layers()[l].bias += velocity[l].bias;
      }
    }
  }
  TrainResult<Scalar> result{std::move(model), 0};
  result.final_loss = result.model.loss(inputs, targets);
  return result;
}

}  // namespace dropkit
