#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddde/errors.hpp"
#include "ddde/nn.hpp"
#include "ddde/rng.hpp"

namespace ddde {

/// Axis-aligned box; support of the uniform reference distribution.
class Domain {
public:
  Domain() = default;

  Domain(std::vector<double> low, std::vector<double> high) : low_(std::move(low)), high_(std::move(high)) {
    if (low_.empty() || low_.size() != high_.size())
      throw ParameterError("domain: bounds must be non-empty and of equal length");
    log_u_ = 0.0;
    for (std::size_t i = 0; i < low_.size(); ++i) {
      if (!(std::isfinite(low_[i]) && std::isfinite(high_[i]) && high_[i] > low_[i]))
        throw ParameterError("domain: need finite bounds with high > low in dimension " + std::to_string(i));
      log_u_ -= std::log(high_[i] - low_[i]);
    }
    if (!std::isfinite(log_u_)) throw ParameterError("domain: volume is not representable");
  }

  static Domain unit_box(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }

  std::size_t dim() const noexcept { return low_.size(); }
  const std::vector<double>& low() const noexcept { return low_; }
  const std::vector<double>& high() const noexcept { return high_; }

  /// log u(x) = -log(volume), the same at every point of the box.
  double log_u() const noexcept { return log_u_; }

  bool contains(std::span<const double> x) const noexcept {
    if (x.size() != low_.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!(x[i] >= low_[i] && x[i] <= high_[i])) return false;
    return true;
  }

  bool contains_row(const Matrix& m, Eigen::Index r) const noexcept {
    return contains(std::span<const double>(m.row(r).data(), static_cast<std::size_t>(m.cols())));
  }

  friend bool operator==(const Domain&, const Domain&) = default;

private:
  std::vector<double> low_;
  std::vector<double> high_;
  double log_u_ = 0.0;
};

/// Sample matrix (one point per row) with optional integer labels.
struct Dataset {
  Matrix points;
  std::optional<std::vector<int>> labels;
  std::string provenance;

  std::size_t size() const noexcept { return static_cast<std::size_t>(points.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(points.cols()); }

  std::span<const double> row(std::size_t i) const noexcept {
    return {points.row(static_cast<Eigen::Index>(i)).data(), dim()};
  }

  /// Index of the first row outside `domain`, if any.
  std::optional<std::size_t> first_outside(const Domain& domain) const {
    for (std::size_t i = 0; i < size(); ++i)
      if (!domain.contains(row(i))) return i;
    return std::nullopt;
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.points.rows() == b.points.rows() && a.points.cols() == b.points.cols() && a.points == b.points &&
           a.labels == b.labels;
  }
};

/// Rows `indices` of `data`, keeping labels aligned.
inline Dataset select_rows(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.points.resize(static_cast<Eigen::Index>(indices.size()), data.points.cols());
  for (std::size_t i = 0; i < indices.size(); ++i)
    out.points.row(static_cast<Eigen::Index>(i)) = data.points.row(static_cast<Eigen::Index>(indices[i]));
  if (data.labels) {
    out.labels.emplace();
    out.labels->reserve(indices.size());
    for (auto idx : indices) out.labels->push_back((*data.labels)[idx]);
  }
  out.provenance = data.provenance;
  return out;
}

/// Per-dimension affine map raw -> unit = raw * scale + offset.
struct AffineRecord {
  std::vector<double> scale;
  std::vector<double> offset;

  std::size_t dim() const noexcept { return scale.size(); }

  Matrix apply(const Matrix& raw) const {
    check(raw);
    Matrix out = raw;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      out.col(j) = out.col(j).array() * scale[static_cast<std::size_t>(j)] + offset[static_cast<std::size_t>(j)];
    return out;
  }

  Matrix invert(const Matrix& unit) const {
    check(unit);
    Matrix out = unit;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      out.col(j) =
          (out.col(j).array() - offset[static_cast<std::size_t>(j)]) / scale[static_cast<std::size_t>(j)];
    return out;
  }

  /// Additive term turning a unit-box log-density into a raw-space one.
  double log_density_correction() const noexcept {
    double s = 0.0;
    for (double c : scale) s += std::log(c);
    return s;
  }

private:
  void check(const Matrix& m) const {
    if (static_cast<std::size_t>(m.cols()) != scale.size())
      throw ShapeError("affine record has " + std::to_string(scale.size()) + " dimensions, data has " +
                       std::to_string(m.cols()));
  }
};

/// Min-max map of each dimension onto [margin, 1 - margin].
inline std::pair<Dataset, AffineRecord> normalize_to_unit(const Dataset& raw, double margin = 0.05) {
  if (!(margin >= 0.0 && margin < 0.5)) throw ParameterError("normalize: margin must lie in [0, 0.5)");
  if (raw.size() == 0) throw DataError("normalize: empty dataset");
  AffineRecord rec;
  const double span = 1.0 - 2.0 * margin;
  for (Eigen::Index j = 0; j < raw.points.cols(); ++j) {
    const double lo = raw.points.col(j).minCoeff();
    const double hi = raw.points.col(j).maxCoeff();
    if (!(hi > lo)) throw DataError("normalize: dimension " + std::to_string(j) + " has zero range");
    const double scale = span / (hi - lo);
    rec.scale.push_back(scale);
    rec.offset.push_back(margin - lo * scale);
  }
  Dataset out{rec.apply(raw.points), raw.labels, raw.provenance};
  // Pin the extremes so rounding cannot push a point across the margin.
  out.points = out.points.cwiseMax(margin).cwiseMin(1.0 - margin);
  return {std::move(out), std::move(rec)};
}

inline Dataset sample_uniform(const Domain& domain, std::size_t n, Rng& rng) {
  if (n == 0) throw ParameterError("sample_uniform: n must be at least 1");
  Dataset out;
  out.points.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(domain.dim()));
  for (Eigen::Index i = 0; i < out.points.rows(); ++i)
    for (std::size_t j = 0; j < domain.dim(); ++j)
      out.points(i, static_cast<Eigen::Index>(j)) = rng.uniform(domain.low()[j], domain.high()[j]);
  out.provenance = "uniform";
  return out;
}

namespace detail {

/// Draws points from `draw` until `n` land inside `domain`. Fails when more
/// than half of the draws are rejected.
template <typename Draw>
Matrix rejection_sample(std::size_t n, const Domain& domain, Draw&& draw, const char* what) {
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(domain.dim()));
  std::vector<double> x(domain.dim());
  std::size_t accepted = 0;
  std::size_t attempts = 0;
  const std::size_t max_attempts = 2 * n + 1000;
  while (accepted < n) {
    if (attempts >= max_attempts)
      throw DataError(std::string(what) + ": more than half of the draws fall outside the domain");
    ++attempts;
    draw(std::span<double>(x));
    if (!domain.contains(x)) continue;
    for (std::size_t j = 0; j < x.size(); ++j)
      out(static_cast<Eigen::Index>(accepted), static_cast<Eigen::Index>(j)) = x[j];
    ++accepted;
  }
  if (2 * (attempts - accepted) > attempts)
    throw DataError(std::string(what) + ": more than half of the draws fall outside the domain");
  return out;
}

} // namespace detail

/// Isotropic Gaussian, rejection-sampled into `domain`.
inline Dataset gen_gaussian(std::size_t n, std::span<const double> mean, double sigma, Rng& rng,
                            const Domain& domain) {
  if (n == 0) throw ParameterError("gen_gaussian: n must be at least 1");
  if (!(sigma > 0.0)) throw ParameterError("gen_gaussian: sigma must be positive");
  if (mean.size() != domain.dim()) throw ShapeError("gen_gaussian: mean and domain dimensions differ");
  Dataset out;
  out.points = detail::rejection_sample(
      n, domain,
      [&](std::span<double> x) {
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = rng.normal(mean[j], sigma);
      },
      "gen_gaussian");
  out.provenance = "gaussian";
  return out;
}

inline Dataset gen_gaussian(std::size_t n, std::span<const double> mean, double sigma, Rng& rng) {
  return gen_gaussian(n, mean, sigma, rng, Domain::unit_box(mean.size()));
}

inline constexpr double kCorrelatedMean = 0.5;
inline constexpr double kCorrelatedSigma = 0.15;

/// 2-d Gaussian centred at (0.5, 0.5), per-axis sigma 0.15, correlation rho,
/// rejection-sampled into the unit square.
inline Dataset gen_correlated_gaussian(std::size_t n, double rho, Rng& rng) {
  if (n == 0) throw ParameterError("gen_correlated_gaussian: n must be at least 1");
  if (!(std::abs(rho) < 1.0)) throw ParameterError("gen_correlated_gaussian: |rho| must be below 1");
  const double tail = std::sqrt(1.0 - rho * rho);
  Dataset out;
  out.points = detail::rejection_sample(
      n, Domain::unit_box(2),
      [&](std::span<double> x) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        x[0] = kCorrelatedMean + kCorrelatedSigma * z1;
        x[1] = kCorrelatedMean + kCorrelatedSigma * (rho * z1 + tail * z2);
      },
      "gen_correlated_gaussian");
  out.provenance = "correlated_gaussian";
  return out;
}

inline constexpr double kMixtureSigma = 0.05;
inline constexpr std::array<double, 3> kMixtureGrid{0.2, 0.5, 0.8};

/// Centre of mixture component k (0..8); x varies fastest.
inline std::array<double, 2> mixture_center(std::size_t k) noexcept {
  return {kMixtureGrid[k % 3], kMixtureGrid[k / 3]};
}

/// Equal-weight mixture of nine isotropic Gaussians (sigma 0.05) on the
/// {0.2, 0.5, 0.8}^2 grid, rejection-sampled into the unit square.
inline Dataset gen_gaussian_mixture(std::size_t n, Rng& rng) {
  if (n == 0) throw ParameterError("gen_gaussian_mixture: n must be at least 1");
  Dataset out;
  out.points = detail::rejection_sample(
      n, Domain::unit_box(2),
      [&](std::span<double> x) {
        const auto c = mixture_center(static_cast<std::size_t>(rng.below(9)));
        x[0] = rng.normal(c[0], kMixtureSigma);
        x[1] = rng.normal(c[1], kMixtureSigma);
      },
      "gen_gaussian_mixture");
  out.provenance = "mixture9";
  return out;
}

/// Two interleaved half circles (label 0: upper, label 1: lower shifted) plus
/// Gaussian noise, in raw coordinates.
inline Dataset raw_two_moons(std::size_t n, double noise, Rng& rng) {
  if (n == 0) throw ParameterError("two_moons: n must be at least 1");
  if (!(noise >= 0.0)) throw ParameterError("two_moons: noise must be non-negative");
  const std::size_t n_out = n / 2;
  const std::size_t n_in = n - n_out;
  const auto step = [](std::size_t i, std::size_t count) {
    return count > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
  };
  Dataset out;
  out.points.resize(static_cast<Eigen::Index>(n), 2);
  out.labels.emplace(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(order[i]);
    if (i < n_out) {
      const double t = step(i, n_out);
      out.points(r, 0) = std::cos(t);
      out.points(r, 1) = std::sin(t);
      (*out.labels)[order[i]] = 0;
    } else {
      const double t = step(i - n_out, n_in);
      out.points(r, 0) = 1.0 - std::cos(t);
      out.points(r, 1) = 0.5 - std::sin(t);
      (*out.labels)[order[i]] = 1;
    }
  }
  if (noise > 0.0)
    for (Eigen::Index i = 0; i < out.points.size(); ++i) out.points.data()[i] += noise * rng.normal();
  out.provenance = "moons";
  return out;
}

/// Two concentric circles (label 0: radius 1, label 1: radius `factor`) plus
/// Gaussian noise, in raw coordinates.
inline Dataset raw_circles(std::size_t n, double noise, double factor, Rng& rng) {
  if (n == 0) throw ParameterError("circles: n must be at least 1");
  if (!(noise >= 0.0)) throw ParameterError("circles: noise must be non-negative");
  if (!(factor > 0.0 && factor < 1.0)) throw ParameterError("circles: factor must lie in (0, 1)");
  const std::size_t n_out = n / 2;
  const std::size_t n_in = n - n_out;
  Dataset out;
  out.points.resize(static_cast<Eigen::Index>(n), 2);
  out.labels.emplace(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  for (std::size_t i = 0; i < n; ++i) {
    const bool outer = i < n_out;
    const std::size_t k = outer ? i : i - n_out;
    const std::size_t count = outer ? n_out : n_in;
    const double t = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
    const double radius = outer ? 1.0 : factor;
    const auto r = static_cast<Eigen::Index>(order[i]);
    out.points(r, 0) = radius * std::cos(t);
    out.points(r, 1) = radius * std::sin(t);
    (*out.labels)[order[i]] = outer ? 0 : 1;
  }
  if (noise > 0.0)
    for (Eigen::Index i = 0; i < out.points.size(); ++i) out.points.data()[i] += noise * rng.normal();
  out.provenance = "circles";
  return out;
}

inline Dataset gen_two_moons(std::size_t n, double noise, Rng& rng, double margin = 0.05) {
  return normalize_to_unit(raw_two_moons(n, noise, rng), margin).first;
}

inline Dataset gen_circles(std::size_t n, double noise, double factor, Rng& rng, double margin = 0.05) {
  return normalize_to_unit(raw_circles(n, noise, factor, rng), margin).first;
}

inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;

/// Rotates a 28x28 image (row-major) about its centre by `angle_degrees`
/// counter-clockwise with bilinear interpolation; pixels sampled from outside
/// the frame are 0.
inline std::vector<double> rotate_image(std::span<const double> image, double angle_degrees) {
  if (image.size() != kImagePixels) throw ShapeError("rotate_image: expected 784 pixels");
  double reduced = std::fmod(angle_degrees, 360.0);
  if (reduced < 0.0) reduced += 360.0;
  double c = 0.0;
  double s = 0.0;
  // Quarter turns get exact trigonometric values so they map pixels onto pixels.
  if (reduced == 0.0) {
    c = 1.0;
  } else if (reduced == 90.0) {
    s = 1.0;
  } else if (reduced == 180.0) {
    c = -1.0;
  } else if (reduced == 270.0) {
    s = -1.0;
  } else {
    const double rad = reduced * std::numbers::pi / 180.0;
    c = std::cos(rad);
    s = std::sin(rad);
  }

  const auto side = static_cast<long>(kImageSide);
  const double centre = (static_cast<double>(kImageSide) - 1.0) / 2.0;
  const auto pixel = [&](long r, long col) -> double {
    if (r < 0 || r >= side || col < 0 || col >= side) return 0.0;
    return image[static_cast<std::size_t>(r * side + col)];
  };

  std::vector<double> out(kImagePixels, 0.0);
  for (long r = 0; r < side; ++r) {
    for (long col = 0; col < side; ++col) {
      // Image rows grow downward, so a counter-clockwise turn on screen
      // uses (x, -y) coordinates.
      const double x = static_cast<double>(col) - centre;
      const double y = centre - static_cast<double>(r);
      const double src_x = c * x + s * y;
      const double src_y = -s * x + c * y;
      const double src_col = src_x + centre;
      const double src_row = centre - src_y;
      const double r0 = std::floor(src_row);
      const double c0 = std::floor(src_col);
      const double fr = src_row - r0;
      const double fc = src_col - c0;
      const auto ir = static_cast<long>(r0);
      const auto ic = static_cast<long>(c0);
      double v = 0.0;
      if (fr == 0.0 && fc == 0.0) {
        v = pixel(ir, ic);
      } else {
        v = (1.0 - fr) * ((1.0 - fc) * pixel(ir, ic) + fc * pixel(ir, ic + 1)) +
            fr * ((1.0 - fc) * pixel(ir + 1, ic) + fc * pixel(ir + 1, ic + 1));
      }
      out[static_cast<std::size_t>(r * side + col)] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

} // namespace ddde
