#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddde/data.hpp"
#include "ddde/errors.hpp"
#include "ddde/io.hpp"
#include "ddde/nn.hpp"

namespace ddde {

/// Anything that maps a batch of points (rows) to one log-density per row.
template <typename F>
concept BatchLogDensity = requires(const F& f, const Matrix& m) {
  { f(m) } -> std::convertible_to<std::vector<double>>;
};

/// Lifts a per-point log-density `double(std::span<const double>)` to batches.
template <typename F>
auto pointwise(F fn) {
  return [fn = std::move(fn)](const Matrix& batch) {
    std::vector<double> out(static_cast<std::size_t>(batch.rows()));
    for (Eigen::Index r = 0; r < batch.rows(); ++r)
      out[static_cast<std::size_t>(r)] =
          fn(std::span<const double>(batch.row(r).data(), static_cast<std::size_t>(batch.cols())));
    return out;
  };
}

/// Mean negative log-likelihood of `testset`. When `domain` is given every
/// row must lie inside it.
template <BatchLogDensity F>
double nll(const F& log_density, const Dataset& testset, const std::optional<Domain>& domain = std::nullopt) {
  if (testset.size() == 0) throw ParameterError("nll: empty testset");
  if (domain) {
    if (testset.dim() != domain->dim())
      throw ShapeError("nll: testset has " + std::to_string(testset.dim()) + " columns, domain has " +
                       std::to_string(domain->dim()));
    if (auto bad = testset.first_outside(*domain))
      throw DomainError("nll: test row " + std::to_string(*bad) + " lies outside the domain");
  }
  const std::vector<double> values = log_density(testset.points);
  if (values.size() != testset.size()) throw ShapeError("nll: density returned the wrong number of values");
  double sum = 0.0;
  for (double v : values) sum -= v;
  return sum / static_cast<double>(values.size());
}

/// Log-density sampled at the cell centres of a regular grid; dimension 0
/// varies fastest.
struct DensityGrid {
  Domain domain;
  std::vector<std::size_t> resolution;
  std::vector<double> values;

  std::size_t cell_count() const noexcept {
    return std::accumulate(resolution.begin(), resolution.end(), std::size_t{1}, std::multiplies<>());
  }

  double volume() const noexcept {
    double v = 1.0;
    for (std::size_t j = 0; j < domain.dim(); ++j) v *= domain.high()[j] - domain.low()[j];
    return v;
  }

  double cell_volume() const noexcept { return volume() / static_cast<double>(cell_count()); }

  Matrix centers() const {
    const std::size_t d = resolution.size();
    Matrix out(static_cast<Eigen::Index>(cell_count()), static_cast<Eigen::Index>(d));
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t c = 0; c < cell_count(); ++c) {
      for (std::size_t j = 0; j < d; ++j) {
        const double width = (domain.high()[j] - domain.low()[j]) / static_cast<double>(resolution[j]);
        out(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) =
            domain.low()[j] + (static_cast<double>(idx[j]) + 0.5) * width;
      }
      for (std::size_t j = 0; j < d; ++j) {
        if (++idx[j] < resolution[j]) break;
        idx[j] = 0;
      }
    }
    return out;
  }
};

template <BatchLogDensity F>
DensityGrid grid_eval(const F& log_density, const Domain& domain, std::vector<std::size_t> resolution,
                      std::size_t chunk_rows = 4096) {
  if (resolution.size() != domain.dim()) throw ShapeError("grid_eval: one resolution per domain dimension");
  for (auto r : resolution)
    if (r < 2) throw ParameterError("grid_eval: resolution must be at least 2 per axis");
  DensityGrid grid{domain, std::move(resolution), {}};
  const Matrix centers = grid.centers();
  grid.values.reserve(static_cast<std::size_t>(centers.rows()));
  for (Eigen::Index start = 0; start < centers.rows(); start += static_cast<Eigen::Index>(chunk_rows)) {
    const Eigen::Index rows = std::min<Eigen::Index>(static_cast<Eigen::Index>(chunk_rows), centers.rows() - start);
    const Matrix chunk = centers.middleRows(start, rows);
    const std::vector<double> v = log_density(chunk);
    for (double x : v)
      if (!std::isfinite(x)) throw DataError("grid_eval: non-finite log-density at a grid cell");
    grid.values.insert(grid.values.end(), v.begin(), v.end());
  }
  return grid;
}

/// Midpoint-rule integral of exp(log-density) over the grid.
inline double normalization_integral(const DensityGrid& grid) {
  double sum = 0.0;
  for (double v : grid.values) sum += std::exp(v);
  // Mean times volume keeps a constant density exact.
  return sum / static_cast<double>(grid.values.size()) * grid.volume();
}

/// `x,y,log_density` header then one row per cell (x fastest).
inline std::string format_grid_csv(const DensityGrid& grid) {
  if (grid.resolution.size() != 2)
    throw ShapeError("grid CSV export supports 2-d grids only, got " + std::to_string(grid.resolution.size()) +
                     " dimensions");
  const Matrix c = grid.centers();
  std::string out = "x,y,log_density\n";
  out.reserve(out.size() + grid.values.size() * 64);
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    out += format_real(c(static_cast<Eigen::Index>(i), 0));
    out += ',';
    out += format_real(c(static_cast<Eigen::Index>(i), 1));
    out += ',';
    out += format_real(grid.values[i]);
    out += '\n';
  }
  return out;
}

/// Area under the ROC curve in Mann-Whitney form: probability that a random
/// positive (label 1) scores above a random negative (label 0), ties count 1/2.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auroc: scores and labels differ in length");
  std::size_t positives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ParameterError("auroc: labels must be 0 or 1");
    positives += static_cast<std::size_t>(l);
  }
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw ParameterError("auroc: need both positive and negative labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of (1-based, tie-averaged) ranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]] == 1) rank_sum += avg_rank;
    i = j + 1;
  }
  const auto p = static_cast<double>(positives);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

} // namespace ddde
