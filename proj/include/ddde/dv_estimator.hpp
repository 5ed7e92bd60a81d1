#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ddde/data.hpp"
#include "ddde/errors.hpp"
#include "ddde/nn.hpp"
#include "ddde/rng.hpp"

namespace ddde {

/// How the log-partition term log E_U[f] is linearised around the EMA `a`.
///  - log_ema:       log E_U[f] <= E_U[f] / a + log a - 1
///  - paper_literal: the same bound with `a` in place of `log a`
/// Both share the same gradient with respect to the network parameters.
enum class ObjectiveVariant : std::uint32_t { log_ema = 0, paper_literal = 1 };

inline std::string_view to_string(ObjectiveVariant v) noexcept {
  return v == ObjectiveVariant::log_ema ? "log-ema" : "paper-literal";
}

inline ObjectiveVariant parse_objective_variant(std::string_view s) {
  if (s == "log-ema") return ObjectiveVariant::log_ema;
  if (s == "paper-literal") return ObjectiveVariant::paper_literal;
  throw ParameterError("unknown objective variant '" + std::string(s) + "' (expected log-ema or paper-literal)");
}

/// Constant the variant subtracts for the EMA: log(ema) or ema itself.
inline double ema_offset(double ema, ObjectiveVariant v) noexcept {
  return v == ObjectiveVariant::log_ema ? std::log(ema) : ema;
}

struct DvLossValue {
  double total = 0.0;
  double data_term = 0.0;    // mean log f over the data batch
  double uniform_term = 0.0; // mean f over the uniform batch
  double ema_snapshot = 0.0;
};

namespace detail {

inline void check_positive(std::span<const double> values, const char* what) {
  if (values.empty()) throw ParameterError(std::string(what) + " batch is empty");
  for (double v : values)
    if (!(v > 0.0)) throw DomainError(std::string(what) + " batch holds a non-positive critic value");
}

inline double mean(std::span<const double> values) noexcept {
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

} // namespace detail

/// Finite-sample DV objective (to be maximised). `log_floor` clamps f before
/// the logarithm; the head already keeps f >= epsilon.
inline DvLossValue dv_loss(std::span<const double> f_data, std::span<const double> f_unif, double ema,
                           ObjectiveVariant variant = ObjectiveVariant::log_ema, double log_floor = 0.0) {
  detail::check_positive(f_data, "data");
  detail::check_positive(f_unif, "uniform");
  if (!(ema > 0.0)) throw DomainError("dv_loss: ema must be positive");
  DvLossValue out;
  double log_sum = 0.0;
  for (double f : f_data) log_sum += std::log(std::max(f, log_floor));
  out.data_term = log_sum / static_cast<double>(f_data.size());
  out.uniform_term = detail::mean(f_unif);
  out.ema_snapshot = ema;
  out.total = out.data_term - out.uniform_term / ema - ema_offset(ema, variant) + 1.0;
  return out;
}

struct DvGradientSeed {
  std::vector<double> data;
  std::vector<double> uniform;
};

/// d(objective)/d(f) for every critic value, with the EMA held constant.
inline DvGradientSeed dv_loss_gradient_seed(std::span<const double> f_data, std::span<const double> f_unif,
                                            double ema) {
  detail::check_positive(f_data, "data");
  detail::check_positive(f_unif, "uniform");
  if (!(ema > 0.0)) throw DomainError("dv_loss_gradient_seed: ema must be positive");
  DvGradientSeed seed;
  const auto nd = static_cast<double>(f_data.size());
  seed.data.reserve(f_data.size());
  for (double f : f_data) seed.data.push_back(1.0 / (nd * f));
  seed.uniform.assign(f_unif.size(), -1.0 / (static_cast<double>(f_unif.size()) * ema));
  return seed;
}

inline double update_ema(double ema, double batch_mean, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ParameterError("update_ema: beta must lie in [0, 1]");
  return beta * ema + (1.0 - beta) * batch_mean;
}

inline const double kDefaultLrDecay = std::pow(10.0, -0.5);

/// Step decay: base_lr * factor^floor(epoch / every).
inline double lr_schedule(std::size_t epoch, double base_lr, double factor = kDefaultLrDecay,
                          std::size_t every = 50) {
  if (every == 0) return base_lr;
  return base_lr * std::pow(factor, static_cast<double>(epoch / every));
}

struct TrainConfig {
  std::size_t epochs = 200;
  double lr = 1e-3;
  double lr_decay_factor = kDefaultLrDecay;
  std::size_t lr_decay_every = 50;
  std::size_t n_data = 32;
  std::size_t n_unif = 64;
  double beta = 0.9999;
  double epsilon = 1e-20;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden{512, 512, 512};
  double dropout_p = 0.0;
  ObjectiveVariant variant = ObjectiveVariant::log_ema;

  void validate() const {
    if (n_data == 0 || n_unif == 0) throw ParameterError("train config: minibatch sizes must be at least 1");
    if (!(lr > 0.0)) throw ParameterError("train config: lr must be positive");
    if (!(lr_decay_factor > 0.0)) throw ParameterError("train config: lr decay factor must be positive");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ParameterError("train config: beta must lie in [0, 1]");
    if (!(epsilon > 0.0)) throw ParameterError("train config: epsilon must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ParameterError("train config: dropout_p must lie in [0, 1)");
    for (auto h : hidden)
      if (h == 0) throw ParameterError("train config: hidden widths must be at least 1");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double objective = 0.0; // mean DV objective over the epoch's iterations
  double ema = 0.0;       // EMA after the epoch's last iteration
  double lr = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

using TrainHistory = std::vector<EpochRecord>;

/// Trained density estimator: critic, EMA of E_U[f] and the uniform support.
struct DddeModel {
  MlpNetwork net;
  double ema = 1.0;
  double beta = 0.9999;
  double epsilon = 1e-20;
  Domain domain;
  ObjectiveVariant variant = ObjectiveVariant::log_ema;

  std::size_t dim() const noexcept { return domain.dim(); }

  /// log p(x) ~= log f(x) + log u(x) - offset(ema), for every row.
  std::vector<double> log_density(const Matrix& batch) const {
    for (Eigen::Index r = 0; r < batch.rows(); ++r)
      if (!domain.contains_row(batch, r))
        throw DomainError("log_density: row " + std::to_string(r) + " lies outside the model domain");
    auto f = net.evaluate(batch);
    const double shift = domain.log_u() - ema_offset(ema, variant);
    for (auto& v : f) v = std::log(std::max(v, epsilon)) + shift;
    return f;
  }

  double log_density(std::span<const double> x) const {
    if (!domain.contains(x)) throw DomainError("log_density: point lies outside the model domain");
    return std::log(std::max(net.evaluate(x), epsilon)) + domain.log_u() - ema_offset(ema, variant);
  }
};

inline double log_density(const DddeModel& model, std::span<const double> x) { return model.log_density(x); }

/// Larger for less likely points: -log p(x).
inline double anomaly_score(const DddeModel& model, std::span<const double> x) { return -model.log_density(x); }

inline std::vector<double> anomaly_scores(const DddeModel& model, const Matrix& batch) {
  auto s = model.log_density(batch);
  for (auto& v : s) v = -v;
  return s;
}

/// Importance weights proportional to the estimated density, summing to one.
inline std::vector<double> sample_weights(const DddeModel& model, const Dataset& data) {
  if (data.size() == 0) throw ParameterError("sample_weights: dataset is empty");
  auto w = model.log_density(data.points);
  const double peak = *std::max_element(w.begin(), w.end());
  double total = 0.0;
  for (auto& v : w) total += (v = std::exp(v - peak));
  for (auto& v : w) v /= total;
  return w;
}

/// DV estimate mean log f(data) - log mean f(uniform) of KL(data || uniform),
/// using the full sets rather than minibatches.
inline double dv_bound(const DddeModel& model, const Matrix& data, const Matrix& uniform) {
  const auto fd = model.net.evaluate(data);
  const auto fu = model.net.evaluate(uniform);
  double log_sum = 0.0;
  for (double f : fd) log_sum += std::log(std::max(f, model.epsilon));
  return log_sum / static_cast<double>(fd.size()) - std::log(detail::mean(fu));
}

struct TrainResult {
  DddeModel model;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Stochastic maximisation of the DV objective, starting from `net`.
/// Each iteration draws a data minibatch (contiguous slice of a per-epoch
/// shuffle) and a uniform batch, refreshes the EMA from the uniform batch
/// (the first batch initialises it) and takes one Adam step.
inline TrainResult train(const Dataset& dataset, const Domain& domain, const TrainConfig& config, MlpNetwork net,
                         const EpochCallback& on_epoch = {}) {
  config.validate();
  if (dataset.size() == 0) throw ParameterError("train: dataset is empty");
  if (dataset.dim() != domain.dim())
    throw ShapeError("train: dataset has " + std::to_string(dataset.dim()) + " columns, domain has " +
                     std::to_string(domain.dim()) + " dimensions");
  if (net.input_dim() != domain.dim()) throw ShapeError("train: network input width differs from domain");
  if (auto bad = dataset.first_outside(domain))
    throw DomainError("train: dataset row " + std::to_string(*bad) + " lies outside the domain");

  Rng shuffle_rng = Rng::stream(config.seed, "shuffle");
  Rng uniform_rng = Rng::stream(config.seed, "uniform");
  Rng dropout_rng = Rng::stream(config.seed, "dropout");

  const std::size_t n = dataset.size();
  const std::size_t d = domain.dim();
  const auto fill_uniform = [&](Matrix& batch, Eigen::Index first_row) {
    for (Eigen::Index r = first_row; r < batch.rows(); ++r)
      for (std::size_t j = 0; j < d; ++j)
        batch(r, static_cast<Eigen::Index>(j)) = uniform_rng.uniform(domain.low()[j], domain.high()[j]);
  };

  TrainResult result;
  result.history.reserve(config.epochs);
  double ema = 0.0;
  bool ema_ready = false;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdamState adam;
  const std::size_t iters_per_epoch = (n + config.n_data - 1) / config.n_data;
  std::vector<double> upstream;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config.lr, config.lr_decay_factor, config.lr_decay_every);
    shuffle_rng.shuffle(order.begin(), order.end());
    double objective_sum = 0.0;

    for (std::size_t it = 0; it < iters_per_epoch; ++it) {
      const std::size_t begin = it * config.n_data;
      const std::size_t nd = std::min(config.n_data, n - begin);
      Matrix batch(static_cast<Eigen::Index>(nd + config.n_unif), static_cast<Eigen::Index>(d));
      for (std::size_t r = 0; r < nd; ++r)
        batch.row(static_cast<Eigen::Index>(r)) = dataset.points.row(static_cast<Eigen::Index>(order[begin + r]));
      fill_uniform(batch, static_cast<Eigen::Index>(nd));

      const auto f = net.forward(batch, true, &dropout_rng);
      for (double v : f)
        if (!std::isfinite(v)) throw DivergenceError(epoch, it);
      const std::span<const double> f_data(f.data(), nd);
      const std::span<const double> f_unif(f.data() + nd, config.n_unif);

      const double batch_mean = detail::mean(f_unif);
      ema = ema_ready ? update_ema(ema, batch_mean, config.beta) : batch_mean;
      ema_ready = true;
      if (!(ema > 0.0) || !std::isfinite(ema)) throw DivergenceError(epoch, it);

      const auto loss = dv_loss(f_data, f_unif, ema, config.variant, config.epsilon);
      if (!std::isfinite(loss.total)) throw DivergenceError(epoch, it);
      objective_sum += loss.total;

      // Ascent on the objective is descent on its negation.
      const auto seed = dv_loss_gradient_seed(f_data, f_unif, ema);
      upstream.clear();
      for (double g : seed.data) upstream.push_back(-g);
      for (double g : seed.uniform) upstream.push_back(-g);
      const auto grads = net.backward(upstream);
      adam_step(net, grads, adam, lr);
    }

    EpochRecord rec{epoch, objective_sum / static_cast<double>(iters_per_epoch), ema, lr};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  if (!ema_ready) {
    // No iterations ran: take the EMA from one uniform batch of the initial critic.
    Matrix batch(static_cast<Eigen::Index>(config.n_unif), static_cast<Eigen::Index>(d));
    fill_uniform(batch, 0);
    const auto f = net.evaluate(batch);
    ema = detail::mean(f);
  }

  net.clear_cache();
  result.model = DddeModel{std::move(net), ema, config.beta, config.epsilon, domain, config.variant};
  return result;
}

/// Builds the critic from `config` (Glorot init from the "init" stream) and trains it.
inline TrainResult train(const Dataset& dataset, const Domain& domain, const TrainConfig& config,
                         const EpochCallback& on_epoch = {}) {
  config.validate();
  Rng init_rng = Rng::stream(config.seed, "init");
  MlpNetwork net(domain.dim(), config.hidden, config.epsilon, config.dropout_p, init_rng);
  return train(dataset, domain, config, std::move(net), on_epoch);
}

} // namespace ddde
