#pragma once

// Least-squares line-shape fit of a single transmission spectrum.
//
// Model: baseline_level * exp(-peak_depth * P(nu - nu0)) + baseline_slope * (nu - nu0)
// with P the unit-peak Gaussian (the default) or Voigt profile.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dbt/error.hpp"
#include "dbt/faddeeva.hpp"
#include "dbt/lineshape.hpp"
#include "dbt/spectrum.hpp"

namespace dbt {

enum class FitModel { ExpGaussianPlusSlope, ExpVoigtPlusSlope };

inline std::string_view to_string(FitModel m) {
  return m == FitModel::ExpGaussianPlusSlope ? "exp-gaussian" : "exp-voigt";
}

inline FitModel fit_model_from_string(std::string_view s) {
  if (s == "exp-gaussian") return FitModel::ExpGaussianPlusSlope;
  if (s == "exp-voigt") return FitModel::ExpVoigtPlusSlope;
  throw DomainError("unknown fit model '" + std::string(s) + "' (expected exp-gaussian or exp-voigt)");
}

inline constexpr std::size_t parameter_count(FitModel m) { return m == FitModel::ExpGaussianPlusSlope ? 5 : 6; }

/// Parameter order in vectors and covariance matrices.
enum Param : std::size_t { kNu0 = 0, kDelta, kDepth, kLevel, kSlope, kGamma };

inline constexpr std::array<std::string_view, 6> kParamNames = {"nu0", "delta", "peak_depth", "baseline_level",
                                                                "baseline_slope", "gamma"};

struct LineParams {
  double nu0 = 0.0;             // MHz, detuning of the fitted centre
  double delta = 1.0;           // MHz, Gaussian 1/e half-width
  double peak_depth = 0.0;
  double baseline_level = 1.0;
  double baseline_slope = 0.0;  // per MHz, anchored at nu0
  double gamma = 0.0;           // MHz, Lorentzian HWHM (Voigt model only)

  Eigen::VectorXd to_vector(FitModel m) const {
    Eigen::VectorXd v(parameter_count(m));
    v(kNu0) = nu0;
    v(kDelta) = delta;
    v(kDepth) = peak_depth;
    v(kLevel) = baseline_level;
    v(kSlope) = baseline_slope;
    if (m == FitModel::ExpVoigtPlusSlope) v(kGamma) = gamma;
    return v;
  }

  static LineParams from_vector(const Eigen::VectorXd& v) {
    LineParams p{v(kNu0), v(kDelta), v(kDepth), v(kLevel), v(kSlope), 0.0};
    if (v.size() > static_cast<Eigen::Index>(kGamma)) p.gamma = v(kGamma);
    return p;
  }
};

namespace detail {

struct ProfileWithDerivs {
  double value;
  double d_offset;  // dP/du
  double d_delta;
  double d_gamma;
};

inline ProfileWithDerivs profile(FitModel m, double u, double delta, double gamma) {
  if (m == FitModel::ExpGaussianPlusSlope) {
    const double q = u / delta;
    const double g = std::exp(-q * q);
    return {g, -2.0 * q / delta * g, 2.0 * q * q / delta * g, 0.0};
  }
  const std::complex<double> z(u / delta, gamma / delta);
  const auto wz = faddeeva::w(z);
  const auto dw = faddeeva::w_derivative(z, wz);
  const double value = voigt(u, GaussianWidth(delta), LorentzWidth(gamma));
  return {value, dw.real() / delta, (dw * (-z / delta)).real(), -dw.imag() / delta};
}

}  // namespace detail

/// Model transmission at detuning `nu`.
inline double model_value(FitModel m, const LineParams& p, double nu) {
  const double u = nu - p.nu0;
  const double prof = m == FitModel::ExpGaussianPlusSlope
                          ? std::exp(-(u / p.delta) * (u / p.delta))
                          : voigt(u, GaussianWidth(p.delta), LorentzWidth(std::max(p.gamma, 0.0)));
  return p.baseline_level * std::exp(-p.peak_depth * prof) + p.baseline_slope * u;
}

/// Analytic partial derivatives of the model, one row per grid point, columns
/// in Param order.
inline Eigen::MatrixXd jacobian(FitModel m, const LineParams& p, std::span<const double> nu) {
  detail::require(p.delta > 0.0, "jacobian: delta must be > 0");
  const std::size_t np = parameter_count(m);
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(nu.size()), static_cast<Eigen::Index>(np));
  for (std::size_t i = 0; i < nu.size(); ++i) {
    const double u = nu[i] - p.nu0;
    const auto pr = detail::profile(m, u, p.delta, std::max(p.gamma, 0.0));
    const double e = std::exp(-p.peak_depth * pr.value);
    const double bde = p.baseline_level * p.peak_depth * e;
    const auto r = static_cast<Eigen::Index>(i);
    jac(r, kNu0) = bde * pr.d_offset - p.baseline_slope;
    jac(r, kDelta) = -bde * pr.d_delta;
    jac(r, kDepth) = -p.baseline_level * pr.value * e;
    jac(r, kLevel) = e;
    jac(r, kSlope) = u;
    if (m == FitModel::ExpVoigtPlusSlope) jac(r, kGamma) = -bde * pr.d_gamma;
  }
  return jac;
}

/// Starting point read directly off the data.
inline LineParams initial_guess(const Spectrum& s) {
  const std::size_t n = s.size();
  if (n < 16) throw DataError("initial_guess: spectrum has fewer than 16 points");
  const auto& nu = s.offset_mhz;
  const auto& y = s.transmission;

  const auto imin = static_cast<std::size_t>(std::min_element(y.begin(), y.end()) - y.begin());
  if (imin == 0 || imin == n - 1) throw DataError("line not in scan window");

  const std::size_t k = std::max<std::size_t>(1, n / 10);
  double yl = 0.0, yr = 0.0, nl = 0.0, nr = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    yl += y[i];
    nl += nu[i];
    yr += y[n - 1 - i];
    nr += nu[n - 1 - i];
  }
  yl /= k;
  yr /= k;
  nl /= k;
  nr /= k;

  LineParams p;
  p.nu0 = nu[imin];
  p.baseline_slope = (yr - yl) / (nr - nl);
  p.baseline_level = yl + p.baseline_slope * (p.nu0 - nl);
  const double ymin = y[imin];
  if (!(ymin > 0.0) || !(p.baseline_level > ymin)) throw DataError("line not in scan window");
  p.peak_depth = std::log(p.baseline_level / ymin);

  // 1/e-of-depth crossings on the slope-corrected signal.
  const double level = p.baseline_level * std::exp(-p.peak_depth / std::numbers::e);
  auto corrected = [&](std::size_t i) { return y[i] - p.baseline_slope * (nu[i] - p.nu0); };
  std::size_t lo = imin, hi = imin;
  while (lo > 0 && corrected(lo - 1) < level) --lo;
  while (hi + 1 < n && corrected(hi + 1) < level) ++hi;
  auto cross = [&](std::size_t inside, std::size_t outside) {
    const double a = corrected(inside), b = corrected(outside);
    const double t = (b == a) ? 0.5 : (level - a) / (b - a);
    return nu[inside] + t * (nu[outside] - nu[inside]);
  };
  const double left = lo > 0 ? cross(lo, lo - 1) : nu[0];
  const double right = hi + 1 < n ? cross(hi, hi + 1) : nu[n - 1];
  p.delta = 0.5 * (right - left);
  if (!(p.delta > 0.0)) p.delta = nu[1] - nu[0];
  return p;
}

struct FitOptions {
  int max_iterations = 200;
  double relative_cost_tolerance = 1e-12;
  double gradient_tolerance = 1e-10;  // max-norm of the scaled gradient
  double initial_damping = 1e-3;
  double damping_up = 10.0;
  double damping_down = 0.1;
};

struct FitResult {
  FitModel model = FitModel::ExpGaussianPlusSlope;
  LineParams params;
  Eigen::MatrixXd covariance;  // unscaled units, Param order
  double rss = 0.0;
  double chi2_reduced = 0.0;   // rss/(n - p), divided by the noise variance when known
  double gradient_norm = 0.0;
  std::size_t n_points = 0;
  int n_iter = 0;
  bool converged = false;

  double sigma(Param k) const { return std::sqrt(std::max(covariance(k, k), 0.0)); }
};

namespace detail {

// Internal parameter scales: frequencies by the scan span, slopes by its inverse.
inline Eigen::VectorXd parameter_scales(FitModel m, std::span<const double> nu) {
  const double span = std::max(nu.back() - nu.front(), 1e-12);
  Eigen::VectorXd s = Eigen::VectorXd::Ones(parameter_count(m));
  s(kNu0) = span;
  s(kDelta) = span;
  s(kSlope) = 1.0 / span;
  if (m == FitModel::ExpVoigtPlusSlope) s(kGamma) = span;
  return s;
}

inline bool admissible(FitModel m, const Eigen::VectorXd& v) {
  if (!(v(kDelta) > 0.0) || !v.allFinite()) return false;
  (void)m;
  return true;
}

inline void project(FitModel m, Eigen::VectorXd& v) {
  if (m == FitModel::ExpVoigtPlusSlope && v(kGamma) < 0.0) v(kGamma) = 0.0;
}

inline double residuals(FitModel m, const Eigen::VectorXd& v, std::span<const double> nu, std::span<const double> y,
                        Eigen::VectorXd& r) {
  const auto p = LineParams::from_vector(v);
  r.resize(static_cast<Eigen::Index>(nu.size()));
  for (std::size_t i = 0; i < nu.size(); ++i) r(static_cast<Eigen::Index>(i)) = model_value(m, p, nu[i]) - y[i];
  return r.squaredNorm();
}

inline void check_conditioning(const Eigen::MatrixXd& normal) {
  const Eigen::VectorXd d = normal.diagonal();
  if ((d.array() <= 0.0).any()) throw DegenerateFitError("degenerate fit: a parameter has no effect on the model");
  const Eigen::VectorXd inv = d.array().sqrt().inverse();
  const Eigen::MatrixXd corr = inv.asDiagonal() * normal * inv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < 1e-13 * es.eigenvalues().maxCoeff())
    throw DegenerateFitError("degenerate fit: singular normal matrix");
}

}  // namespace detail

/// Damped Gauss-Newton (Levenberg-Marquardt) minimisation of the unweighted
/// sum of squared residuals.
inline FitResult fit_spectrum(const Spectrum& s, FitModel m = FitModel::ExpGaussianPlusSlope,
                              std::optional<LineParams> init = std::nullopt, const FitOptions& opt = {}) {
  s.validate();
  LineParams start = init ? *init : initial_guess(s);
  if (m == FitModel::ExpVoigtPlusSlope && !init) start.gamma = 1e-3 * start.delta;

  const std::span<const double> nu(s.offset_mhz);
  const std::span<const double> y(s.transmission);
  const std::size_t np = parameter_count(m);
  if (nu.size() <= np) throw DataError("fit_spectrum: fewer points than parameters");

  const Eigen::VectorXd scale = detail::parameter_scales(m, nu);
  Eigen::VectorXd v = start.to_vector(m);
  detail::project(m, v);
  if (!detail::admissible(m, v)) throw DomainError("fit_spectrum: invalid initial parameters");

  Eigen::VectorXd r;
  double cost = detail::residuals(m, v, nu, y, r);
  double lambda = opt.initial_damping;

  FitResult out;
  out.model = m;
  out.n_points = nu.size();

  Eigen::MatrixXd js;
  Eigen::MatrixXd normal;
  Eigen::VectorXd grad;
  auto linearise = [&] {
    js = jacobian(m, LineParams::from_vector(v), nu) * scale.asDiagonal();
    normal = js.transpose() * js;
    grad = js.transpose() * r;
  };
  linearise();
  detail::check_conditioning(normal);
  auto free_gradient = [&] {
    Eigen::VectorXd g = grad;
    if (m == FitModel::ExpVoigtPlusSlope && v(kGamma) <= 0.0 && g(kGamma) > 0.0) g(kGamma) = 0.0;
    return g;
  };

  Eigen::VectorXd r_trial;
  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    out.n_iter = iter;
    if (free_gradient().lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    bool small_change = false;
    // gamma held at its bound while the gradient pushes it below zero.
    const bool gamma_pinned = m == FitModel::ExpVoigtPlusSlope && v(kGamma) <= 0.0 && grad(kGamma) > 0.0;
    while (lambda < 1e16) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal() += lambda * normal.diagonal();
      Eigen::VectorXd rhs = -grad;
      if (gamma_pinned) {
        damped.row(kGamma).setZero();
        damped.col(kGamma).setZero();
        damped(kGamma, kGamma) = 1.0;
        rhs(kGamma) = 0.0;
      }
      const Eigen::VectorXd step = damped.ldlt().solve(rhs);
      Eigen::VectorXd trial = v + scale.cwiseProduct(step);
      detail::project(m, trial);
      if (detail::admissible(m, trial)) {
        const double trial_cost = detail::residuals(m, trial, nu, y, r_trial);
        if (std::isfinite(trial_cost) && trial_cost <= cost) {
          small_change = (cost - trial_cost) <= opt.relative_cost_tolerance * cost;
          v = trial;
          r.swap(r_trial);
          cost = trial_cost;
          lambda = std::max(lambda * opt.damping_down, 1e-12);
          accepted = true;
          break;
        }
      }
      lambda *= opt.damping_up;
    }
    linearise();
    if (!accepted) {
      // No descent direction left at working precision.
      out.converged = free_gradient().lpNorm<Eigen::Infinity>() < 1e-6 * std::max(1.0, std::sqrt(cost));
      break;
    }
    if (small_change) {
      out.converged = true;
      break;
    }
  }

  detail::check_conditioning(normal);
  out.params = LineParams::from_vector(v);
  out.rss = cost;
  out.gradient_norm = free_gradient().lpNorm<Eigen::Infinity>();
  const double dof = static_cast<double>(nu.size() - np);
  const double residual_variance = cost / dof;
  const Eigen::MatrixXd inv_scaled = normal.ldlt().solve(Eigen::MatrixXd::Identity(np, np));
  out.covariance = residual_variance * (scale.asDiagonal() * inv_scaled * scale.asDiagonal());
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  const double noise_sigma = std::isfinite(s.header.scan.snr) && s.header.scan.snr > 0.0
                                 ? out.params.baseline_level / s.header.scan.snr
                                 : 0.0;
  out.chi2_reduced = noise_sigma > 0.0 ? residual_variance / (noise_sigma * noise_sigma) : residual_variance;
  return out;
}

}  // namespace dbt
