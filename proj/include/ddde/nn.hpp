#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ddde/errors.hpp"
#include "ddde/rng.hpp"

namespace ddde {

/// Row-major real matrix; one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline double elu(double x, double alpha = 1.0) {
  if (!(alpha > 0.0)) throw ParameterError("elu: alpha must be positive");
  return x >= 0.0 ? x : alpha * std::expm1(x);
}

/// ELU(y) + 1 + epsilon with alpha = 1. For y < 0 this is exp(y) + epsilon,
/// evaluated directly so tiny outputs keep their relative precision.
inline double positive_head(double y, double epsilon) noexcept {
  return y >= 0.0 ? y + 1.0 + epsilon : std::exp(y) + epsilon;
}

inline double positive_head_derivative(double y) noexcept { return y >= 0.0 ? 1.0 : std::exp(y); }

/// Inverted-dropout mask: each entry is 0 with probability p, else 1/(1-p).
inline std::vector<double> dropout_mask(std::size_t width, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ParameterError("dropout probability must lie in [0, 1)");
  std::vector<double> mask(width, 1.0);
  if (p == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - p);
  for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  return mask;
}

struct DenseGradients {
  Matrix weights;
  Vector bias;
};

/// Affine map x -> W x + b applied row-wise to a batch.
class DenseLayer {
public:
  DenseLayer() = default;

  DenseLayer(std::size_t input_width, std::size_t output_width)
      : weights_(Matrix::Zero(static_cast<Eigen::Index>(output_width),
                              static_cast<Eigen::Index>(input_width))),
        bias_(Vector::Zero(static_cast<Eigen::Index>(output_width))) {}

  DenseLayer(Matrix weights, Vector bias) : weights_(std::move(weights)), bias_(std::move(bias)) {
    if (weights_.rows() != bias_.size()) throw ShapeError("dense layer: weight rows and bias length differ");
  }

  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero bias.
  static DenseLayer glorot(std::size_t input_width, std::size_t output_width, Rng& rng) {
    DenseLayer layer(input_width, output_width);
    const double limit = std::sqrt(6.0 / static_cast<double>(input_width + output_width));
    for (Eigen::Index i = 0; i < layer.weights_.size(); ++i)
      layer.weights_.data()[i] = rng.uniform(-limit, limit);
    return layer;
  }

  std::size_t input_width() const noexcept { return static_cast<std::size_t>(weights_.cols()); }
  std::size_t output_width() const noexcept { return static_cast<std::size_t>(weights_.rows()); }

  const Matrix& weights() const noexcept { return weights_; }
  Matrix& weights() noexcept { return weights_; }
  const Vector& bias() const noexcept { return bias_; }
  Vector& bias() noexcept { return bias_; }

  Matrix forward(const Matrix& input) const {
    check_input(input);
    Matrix out(input.rows(), weights_.rows());
    out.noalias() = input * weights_.transpose();
    out.rowwise() += bias_.transpose();
    return out;
  }

  /// Forward pass that remembers its input for a following backward().
  Matrix forward_train(const Matrix& input) {
    Matrix out = forward(input);
    cached_input_ = input;
    has_cache_ = true;
    return out;
  }

  /// Returns the parameter gradients; writes d(loss)/d(input) to grad_input when given.
  DenseGradients backward(const Matrix& grad_output, Matrix* grad_input = nullptr) const {
    if (!has_cache_) throw StateError("dense layer: backward called without a training forward pass");
    if (grad_output.rows() != cached_input_.rows() || grad_output.cols() != weights_.rows())
      throw ShapeError("dense layer: upstream gradient shape does not match the cached batch");
    DenseGradients grads;
    grads.weights.noalias() = grad_output.transpose() * cached_input_;
    grads.bias = grad_output.colwise().sum().transpose();
    if (grad_input != nullptr) grad_input->noalias() = grad_output * weights_;
    return grads;
  }

  void clear_cache() noexcept {
    cached_input_.resize(0, 0);
    has_cache_ = false;
  }

private:
  void check_input(const Matrix& input) const {
    if (input.cols() != weights_.cols())
      throw ShapeError("dense layer: expected " + std::to_string(weights_.cols()) + " input columns, got " +
                       std::to_string(input.cols()));
  }

  Matrix weights_;
  Vector bias_;
  Matrix cached_input_;
  bool has_cache_ = false;
};

/// Parameter gradients of an MlpNetwork, layer by layer.
struct Gradients {
  std::vector<DenseGradients> layers;

  std::vector<std::span<const double>> blocks() const {
    std::vector<std::span<const double>> out;
    out.reserve(layers.size() * 2);
    for (const auto& g : layers) {
      out.emplace_back(g.weights.data(), static_cast<std::size_t>(g.weights.size()));
      out.emplace_back(g.bias.data(), static_cast<std::size_t>(g.bias.size()));
    }
    return out;
  }
};

/// Feed-forward critic: ReLU hidden layers, a width-1 linear output and the
/// positive head ELU(y) + 1 + epsilon. Optional dropout acts on the last
/// hidden activation during training.
class MlpNetwork {
public:
  MlpNetwork() = default;

  MlpNetwork(std::size_t input_dim, const std::vector<std::size_t>& hidden_widths, double epsilon,
             double dropout_p, Rng& init_rng)
      : epsilon_(epsilon), dropout_p_(dropout_p) {
    if (input_dim == 0) throw ParameterError("network input dimension must be at least 1");
    std::size_t width = input_dim;
    for (std::size_t h : hidden_widths) {
      if (h == 0) throw ParameterError("hidden layer width must be at least 1");
      layers_.push_back(DenseLayer::glorot(width, h, init_rng));
      width = h;
    }
    layers_.push_back(DenseLayer::glorot(width, 1, init_rng));
    validate();
  }

  MlpNetwork(std::vector<DenseLayer> layers, double epsilon, double dropout_p = 0.0)
      : layers_(std::move(layers)), epsilon_(epsilon), dropout_p_(dropout_p) {
    validate();
  }

  std::size_t input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().input_width(); }
  double epsilon() const noexcept { return epsilon_; }
  double dropout_p() const noexcept { return dropout_p_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights().size() + l.bias().size());
    return n;
  }

  /// Critic values f(x) for every row. With `training` set the activations
  /// are cached for backward() and dropout (if any) draws from `rng`.
  std::vector<double> forward(const Matrix& batch, bool training, Rng* rng = nullptr) {
    if (!training) {
      has_cache_ = false;
      return evaluate(batch);
    }
    if (dropout_p_ > 0.0 && hidden_count() > 0 && rng == nullptr)
      throw ParameterError("forward: dropout in training mode needs a random stream");
    check_batch(batch);

    hidden_pre_.clear();
    Matrix act = batch;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
      Matrix pre = layers_[i].forward_train(act);
      act = pre.cwiseMax(0.0);
      hidden_pre_.push_back(std::move(pre));
    }
    mask_.clear();
    if (dropout_p_ > 0.0 && hidden_count() > 0) {
      mask_ = dropout_mask(static_cast<std::size_t>(act.size()), dropout_p_, *rng);
      act.array() *= Eigen::Map<const Matrix>(mask_.data(), act.rows(), act.cols()).array();
    }
    const Matrix y = layers_.back().forward_train(act);
    head_input_.assign(y.data(), y.data() + y.size());
    has_cache_ = true;

    std::vector<double> out(head_input_.size());
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = positive_head(head_input_[r], epsilon_);
    return out;
  }

  /// Inference pass; touches no mutable state and never applies dropout.
  std::vector<double> evaluate(const Matrix& batch) const {
    check_batch(batch);
    Matrix act = batch;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) act = layers_[i].forward(act).cwiseMax(0.0);
    const Matrix y = layers_.back().forward(act);
    std::vector<double> out(static_cast<std::size_t>(y.rows()));
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = positive_head(y(static_cast<Eigen::Index>(r), 0), epsilon_);
    return out;
  }

  double evaluate(std::span<const double> point) const {
    Matrix row(1, static_cast<Eigen::Index>(point.size()));
    for (std::size_t j = 0; j < point.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = point[j];
    return evaluate(row).front();
  }

  /// Gradients of sum_r upstream[r] * f(x_r) with respect to every parameter.
  Gradients backward(std::span<const double> upstream) const {
    if (!has_cache_) throw StateError("backward called without a preceding training forward pass");
    if (upstream.size() != head_input_.size())
      throw ShapeError("backward: upstream gradient has " + std::to_string(upstream.size()) +
                       " entries, batch has " + std::to_string(head_input_.size()));

    Matrix grad(static_cast<Eigen::Index>(upstream.size()), 1);
    for (std::size_t r = 0; r < upstream.size(); ++r)
      grad(static_cast<Eigen::Index>(r), 0) = upstream[r] * positive_head_derivative(head_input_[r]);

    Gradients grads;
    grads.layers.resize(layers_.size());
    for (std::size_t i = layers_.size(); i-- > 0;) {
      Matrix grad_input;
      grads.layers[i] = layers_[i].backward(grad, i > 0 ? &grad_input : nullptr);
      if (i == 0) break;
      if (i == layers_.size() - 1 && !mask_.empty())
        grad_input.array() *=
            Eigen::Map<const Matrix>(mask_.data(), grad_input.rows(), grad_input.cols()).array();
      grad_input.array() *= (hidden_pre_[i - 1].array() > 0.0).cast<double>();
      grad = std::move(grad_input);
    }
    return grads;
  }

  /// Drops cached activations; backward() needs a new training forward pass.
  void clear_cache() noexcept {
    for (auto& l : layers_) l.clear_cache();
    hidden_pre_.clear();
    mask_.clear();
    head_input_.clear();
    has_cache_ = false;
  }

  std::vector<std::span<double>> parameter_blocks() {
    std::vector<std::span<double>> out;
    out.reserve(layers_.size() * 2);
    for (auto& l : layers_) {
      out.emplace_back(l.weights().data(), static_cast<std::size_t>(l.weights().size()));
      out.emplace_back(l.bias().data(), static_cast<std::size_t>(l.bias().size()));
    }
    return out;
  }

private:
  std::size_t hidden_count() const noexcept { return layers_.empty() ? 0 : layers_.size() - 1; }

  void validate() const {
    if (layers_.empty()) throw ParameterError("network needs at least one layer");
    if (!(epsilon_ > 0.0)) throw ParameterError("head offset epsilon must be positive");
    if (!(dropout_p_ >= 0.0 && dropout_p_ < 1.0)) throw ParameterError("dropout probability must lie in [0, 1)");
    for (std::size_t i = 1; i < layers_.size(); ++i)
      if (layers_[i].input_width() != layers_[i - 1].output_width())
        throw ShapeError("network: layer " + std::to_string(i) + " input width does not match previous output");
    if (layers_.back().output_width() != 1) throw ShapeError("network: final layer must have width 1");
  }

  void check_batch(const Matrix& batch) const {
    if (static_cast<std::size_t>(batch.cols()) != input_dim())
      throw ShapeError("network expects " + std::to_string(input_dim()) + " input columns, got " +
                       std::to_string(batch.cols()));
  }

  std::vector<DenseLayer> layers_;
  double epsilon_ = 1e-20;
  double dropout_p_ = 0.0;

  std::vector<Matrix> hidden_pre_;
  std::vector<double> mask_;
  std::vector<double> head_input_;
  bool has_cache_ = false;
};

/// Adam optimizer state; moments are kept per parameter block.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double stabilizer = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam descent step over a set of parameter blocks.
inline void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                      AdamState& state, double lr) {
  if (!(lr > 0.0)) throw ParameterError("adam: learning rate must be positive");
  if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient block counts differ");
  if (state.first_moment.empty()) {
    state.first_moment.resize(params.size());
    state.second_moment.resize(params.size());
    for (std::size_t b = 0; b < params.size(); ++b) {
      state.first_moment[b].assign(params[b].size(), 0.0);
      state.second_moment[b].assign(params[b].size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("adam: state does not match parameter blocks");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    if (g.size() != p.size() || m.size() != p.size()) throw ShapeError("adam: block sizes differ");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.stabilizer);
    }
  }
}

inline void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state, double lr) {
  const std::span<double> p[] = {param};
  const std::span<const double> g[] = {grad};
  adam_step(std::span<const std::span<double>>(p), std::span<const std::span<const double>>(g), state, lr);
}

inline void adam_step(MlpNetwork& net, const Gradients& grads, AdamState& state, double lr) {
  const auto p = net.parameter_blocks();
  const auto g = grads.blocks();
  adam_step(std::span<const std::span<double>>(p), std::span<const std::span<const double>>(g), state, lr);
}

} // namespace ddde
