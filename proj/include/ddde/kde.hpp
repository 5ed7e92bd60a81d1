#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ddde/data.hpp"
#include "ddde/errors.hpp"
#include "ddde/nn.hpp"
#include "ddde/rng.hpp"

namespace ddde {

/// Gaussian-kernel density estimate over stored samples.
class KdeModel {
public:
  KdeModel(Matrix samples, double bandwidth) : samples_(std::move(samples)), bandwidth_(bandwidth) {
    if (samples_.rows() == 0 || samples_.cols() == 0) throw ParameterError("kde: need at least one sample");
    if (!(bandwidth_ > 0.0)) throw ParameterError("kde: bandwidth must be positive");
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(samples_.cols()); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(samples_.rows()); }
  double bandwidth() const noexcept { return bandwidth_; }
  const Matrix& samples() const noexcept { return samples_; }

  /// log[(1/N) sum_i N(x; x_i, b^2 I)], accumulated with log-sum-exp.
  double log_density(std::span<const double> x) const {
    if (x.size() != dim())
      throw ShapeError("kde: query has " + std::to_string(x.size()) + " dimensions, model has " +
                       std::to_string(dim()));
    const Eigen::Map<const Eigen::RowVectorXd> q(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXd sq = (samples_.rowwise() - q).rowwise().squaredNorm();
    return log_mean_kernel(sq);
  }

  std::vector<double> log_density(const Matrix& batch) const {
    std::vector<double> out(static_cast<std::size_t>(batch.rows()));
    for (Eigen::Index r = 0; r < batch.rows(); ++r)
      out[static_cast<std::size_t>(r)] =
          log_density(std::span<const double>(batch.row(r).data(), static_cast<std::size_t>(batch.cols())));
    return out;
  }

  /// Same density from precomputed squared distances to every sample.
  double log_mean_kernel(const Eigen::VectorXd& squared_distances) const {
    return log_mean_kernel(squared_distances, bandwidth_, dim());
  }

  static double log_mean_kernel(const Eigen::VectorXd& squared_distances, double bandwidth, std::size_t dim) {
    const double inv = -0.5 / (bandwidth * bandwidth);
    const double peak = squared_distances.minCoeff() * inv;
    const double sum = ((squared_distances.array() * inv) - peak).exp().sum();
    const double log_norm =
        -0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi * bandwidth * bandwidth);
    return log_norm + peak + std::log(sum) - std::log(static_cast<double>(squared_distances.size()));
  }

private:
  Matrix samples_;
  double bandwidth_;
};

inline double kde_log_density(const KdeModel& model, std::span<const double> x) { return model.log_density(x); }

/// Mean of -log p over the test rows.
inline double kde_nll(const KdeModel& model, const Dataset& testset) {
  if (testset.size() == 0) throw ParameterError("kde_nll: empty testset");
  if (testset.dim() != model.dim()) throw ShapeError("kde_nll: testset and model dimensions differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < testset.size(); ++i) sum -= model.log_density(testset.row(i));
  return sum / static_cast<double>(testset.size());
}

/// {2^-5, ..., 2^5}.
inline std::vector<double> default_bandwidth_grid() {
  std::vector<double> grid;
  for (int e = -5; e <= 5; ++e) grid.push_back(std::ldexp(1.0, e));
  return grid;
}

struct BandwidthSelection {
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> mean_nll; // cross-validated held-out NLL per grid entry
};

/// k-fold cross-validated bandwidth: rows are shuffled once, split into k
/// nearly equal contiguous folds, and each bandwidth is scored by the held-out
/// NLL averaged over folds. Ties go to the smaller bandwidth.
inline BandwidthSelection select_bandwidth_cv(const Dataset& data, const std::vector<double>& grid, std::size_t k,
                                              Rng& rng) {
  if (grid.empty()) throw ParameterError("select_bandwidth_cv: empty bandwidth grid");
  for (double b : grid)
    if (!(b > 0.0)) throw ParameterError("select_bandwidth_cv: bandwidths must be positive");
  if (k < 2) throw ParameterError("select_bandwidth_cv: need at least 2 folds");
  const std::size_t n = data.size();
  if (n < k) throw ParameterError("select_bandwidth_cv: fewer rows than folds leaves a fold empty");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order.begin(), order.end());

  BandwidthSelection out;
  out.grid = grid;
  out.mean_nll.assign(grid.size(), 0.0);
  for (std::size_t fold = 0; fold < k; ++fold) {
    const std::size_t begin = fold * n / k;
    const std::size_t end = (fold + 1) * n / k;
    std::vector<std::size_t> train_idx;
    train_idx.reserve(n - (end - begin));
    for (std::size_t i = 0; i < n; ++i)
      if (i < begin || i >= end) train_idx.push_back(order[i]);
    if (train_idx.empty()) throw ParameterError("select_bandwidth_cv: fold has an empty training split");
    const Dataset train = select_rows(data, train_idx);

    std::vector<double> fold_nll(grid.size(), 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      const auto q = data.points.row(static_cast<Eigen::Index>(order[i]));
      const Eigen::VectorXd sq = (train.points.rowwise() - q).rowwise().squaredNorm();
      for (std::size_t g = 0; g < grid.size(); ++g)
        fold_nll[g] -= KdeModel::log_mean_kernel(sq, grid[g], data.dim());
    }
    for (std::size_t g = 0; g < grid.size(); ++g)
      out.mean_nll[g] += fold_nll[g] / static_cast<double>(end - begin) / static_cast<double>(k);
  }

  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const double a = out.mean_nll[g];
    const double b = out.mean_nll[best];
    if (a < b || (a == b && grid[g] < grid[best])) best = g;
  }
  out.bandwidth = grid[best];
  return out;
}

} // namespace ddde
