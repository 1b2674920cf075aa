#pragma once

// Zero-pressure extrapolation of fitted Gaussian widths.
//
// The fitted peak optical depth is proportional to the absorber density and
// serves as the pressure axis; a straight line in (amplitude, width) is
// extrapolated to zero amplitude.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dbt/error.hpp"
#include "dbt/fitter.hpp"

namespace dbt {

struct WidthPoint {
  double amplitude = 0.0;       // fitted peak depth
  double width = 0.0;           // MHz
  double width_sigma = 0.0;     // MHz
  double baseline_slope = 0.0;  // per MHz
  double baseline_slope_sigma = 0.0;
  std::string source_id;

  void validate() const {
    detail::require(std::isfinite(amplitude), "WidthPoint: amplitude must be finite");
    detail::require(std::isfinite(width) && width > 0.0, "WidthPoint: width must be > 0");
    detail::require(std::isfinite(width_sigma) && width_sigma > 0.0, "WidthPoint: width_sigma must be > 0");
  }
};

/// Width point from a fit. A zero fitted variance (exact data) is floored at
/// one ulp-scale of the width so the weights stay finite.
inline WidthPoint width_point(const FitResult& fit, std::string source_id) {
  const double floor = 4.0 * std::numeric_limits<double>::epsilon() * fit.params.delta;
  return {fit.params.peak_depth,
          fit.params.delta,
          std::max(fit.sigma(kDelta), floor),
          fit.params.baseline_slope,
          fit.sigma(kSlope),
          std::move(source_id)};
}

struct SlopePartition {
  std::vector<WidthPoint> kept;
  std::vector<WidthPoint> rejected;
};

/// Keeps points with |baseline_slope| <= threshold.
inline SlopePartition filter_by_slope(const std::vector<WidthPoint>& points, double threshold) {
  detail::require(threshold > 0.0, "filter_by_slope: threshold must be > 0");
  SlopePartition out;
  for (const auto& p : points) (std::abs(p.baseline_slope) <= threshold ? out.kept : out.rejected).push_back(p);
  if (out.kept.empty()) throw DataError("no usable spectra: every spectrum exceeds the slope threshold");
  return out;
}

/// Default slope threshold: 3x the median fitted slope uncertainty.
inline double default_slope_threshold(const std::vector<WidthPoint>& points) {
  if (points.empty()) throw DataError("default_slope_threshold: no points");
  std::vector<double> s;
  s.reserve(points.size());
  for (const auto& p : points) s.push_back(p.baseline_slope_sigma);
  const auto mid = s.begin() + static_cast<std::ptrdiff_t>(s.size() / 2);
  std::nth_element(s.begin(), mid, s.end());
  double median = *mid;
  if (s.size() % 2 == 0) median = 0.5 * (median + *std::max_element(s.begin(), mid));
  const double t = 3.0 * median;
  if (!(t > 0.0)) throw DataError("default_slope_threshold: slope uncertainties are all zero");
  return t;
}

struct LineFit {
  double intercept = 0.0;
  double intercept_sigma = 0.0;
  double slope = 0.0;
  double slope_sigma = 0.0;
  double chi2_reduced = 0.0;
};

namespace detail {

// Straight line through (x, y) with weights w; standard errors from the
// inverse normal matrix scaled by `variance_scale`.
inline LineFit weighted_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w,
                             bool unit_weights) {
  const std::size_t n = x.size();
  // Centre the abscissa for a well-conditioned 2x2 system.
  double sw = 0.0, swx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    swx += w[i] * x[i];
  }
  const double xbar = swx / sw;
  double sxx = 0.0, sy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - xbar;
    sxx += w[i] * dx * dx;
    sy += w[i] * y[i];
    sxy += w[i] * dx * y[i];
  }
  LineFit f;
  f.slope = sxy / sxx;
  const double ybar = sy / sw;
  f.intercept = ybar - f.slope * xbar;

  double chi2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    chi2 += w[i] * r * r;
  }
  f.chi2_reduced = n > 2 ? chi2 / static_cast<double>(n - 2) : 0.0;
  // With unit weights the scatter itself sets the variance.
  const double var = unit_weights ? f.chi2_reduced : 1.0;
  f.slope_sigma = std::sqrt(var / sxx);
  f.intercept_sigma = std::sqrt(var * (1.0 / sw + xbar * xbar / sxx));
  return f;
}

}  // namespace detail

struct ExtrapolationResult {
  double delta_d = 0.0;        // MHz, zero-amplitude intercept
  double delta_d_sigma = 0.0;  // MHz, after any chi2 inflation
  double slope = 0.0;          // MHz per unit amplitude
  double slope_sigma = 0.0;
  double chi2_reduced = 0.0;
  std::size_t n_used = 0;
  std::size_t n_rejected = 0;
  bool sigma_inflated = false;  // uncertainties scaled by sqrt(chi2_reduced)
  // Unweighted cross-check; `report_unweighted` when it differs from the
  // weighted intercept by more than 0.1 sigma.
  double unweighted_delta_d = 0.0;
  double unweighted_delta_d_sigma = 0.0;
  bool report_unweighted = false;
};

/// Minimum ratio between the largest and smallest amplitude.
inline constexpr double kMinAmplitudeRange = 2.0;

/// Weighted straight-line fit width = delta_d + slope * amplitude, weights
/// 1/width_sigma^2, extrapolated to zero amplitude.
inline ExtrapolationResult zero_pressure_width(const std::vector<WidthPoint>& points, std::size_t n_rejected = 0) {
  if (points.size() < 3) throw DataError("extrapolation needs at least 3 points");
  std::vector<double> x, y, w, ones;
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  for (const auto& p : points) {
    p.validate();
    x.push_back(p.amplitude);
    y.push_back(p.width);
    w.push_back(1.0 / (p.width_sigma * p.width_sigma));
    ones.push_back(1.0);
    amin = std::min(amin, p.amplitude);
    amax = std::max(amax, p.amplitude);
  }
  if (!(amin > 0.0) || !(amax >= kMinAmplitudeRange * amin))
    throw DataError("extrapolation ill-conditioned: amplitudes must be > 0 and span a factor of 2");

  const auto weighted = detail::weighted_line(x, y, w, false);
  const auto plain = detail::weighted_line(x, y, ones, true);

  ExtrapolationResult out;
  out.delta_d = weighted.intercept;
  out.slope = weighted.slope;
  out.chi2_reduced = weighted.chi2_reduced;
  out.delta_d_sigma = weighted.intercept_sigma;
  out.slope_sigma = weighted.slope_sigma;
  if (out.chi2_reduced > 1.0) {
    const double k = std::sqrt(out.chi2_reduced);
    out.delta_d_sigma *= k;
    out.slope_sigma *= k;
    out.sigma_inflated = true;
  }
  out.n_used = points.size();
  out.n_rejected = n_rejected;
  out.unweighted_delta_d = plain.intercept;
  out.unweighted_delta_d_sigma = plain.intercept_sigma;
  out.report_unweighted = std::abs(plain.intercept - weighted.intercept) > 0.1 * out.delta_d_sigma;
  if (!(out.delta_d > 0.0)) throw DataError("extrapolation gave a non-positive zero-pressure width");
  return out;
}

}  // namespace dbt
