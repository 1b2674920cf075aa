#pragma once

// Elementary line profiles and the Doppler-width relation.
//
// Conventions: Gaussian widths are 1/e half-widths, Lorentzian widths are
// half-widths at half maximum. Frequencies are in MHz unless a name says
// otherwise.

#include <cmath>
#include <complex>
#include <string>
#include <utility>

#include "dbt/constants.hpp"
#include "dbt/error.hpp"
#include "dbt/faddeeva.hpp"

namespace dbt {

/// Gaussian 1/e half-width, MHz.
class GaussianWidth {
 public:
  explicit GaussianWidth(double delta) : delta_(delta) {
    detail::require(std::isfinite(delta) && delta > 0.0, "GaussianWidth: delta must be finite and > 0");
  }
  double value() const noexcept { return delta_; }

  /// Half-width at half maximum of the same profile.
  double hwhm() const noexcept { return delta_ * std::sqrt(std::log(2.0)); }
  static GaussianWidth from_hwhm(double hwhm) { return GaussianWidth(hwhm / std::sqrt(std::log(2.0))); }

  friend bool operator==(const GaussianWidth&, const GaussianWidth&) = default;

 private:
  double delta_;
};

/// Lorentzian half-width at half maximum, MHz.
class LorentzWidth {
 public:
  explicit LorentzWidth(double gamma = 0.0) : gamma_(gamma) {
    detail::require(std::isfinite(gamma) && gamma >= 0.0, "LorentzWidth: gamma must be finite and >= 0");
  }
  double value() const noexcept { return gamma_; }

  friend bool operator==(const LorentzWidth&, const LorentzWidth&) = default;

 private:
  double gamma_;
};

/// A molecular transition: line centre and the mass of the absorber.
struct Transition {
  double nu0_mhz;
  double mass_kg;
  double mass_u;
  std::string label;

  static Transition from_mass_u(double nu0_mhz, double mass_u, std::string label) {
    Transition t{nu0_mhz, mass_u * constants::kAtomicMassUnit, mass_u, std::move(label)};
    t.validate();
    return t;
  }

  void validate() const {
    detail::require(std::isfinite(nu0_mhz) && nu0_mhz > 0.0, "Transition: nu0 must be > 0");
    detail::require(std::isfinite(mass_kg) && mass_kg > 0.0, "Transition: mass must be > 0");
    const double from_u = mass_u * constants::kAtomicMassUnit;
    detail::require(std::abs(from_u - mass_kg) <= 1e-9 * mass_kg,
                    "Transition: mass in kg and in u disagree beyond 1e-9");
  }
};

inline Transition nh3_asq63() {
  return Transition::from_mass_u(constants::kNH3LineFrequencyMHz, constants::kMassNH3_u,
                                 std::string(constants::kNH3LineLabel));
}

/// exp(-x^2/delta^2): unit peak, falls to 1/e at |x| = delta.
inline double gaussian(double x, GaussianWidth delta) {
  detail::require(std::isfinite(x), "gaussian: non-finite frequency offset");
  const double u = x / delta.value();
  return std::exp(-u * u);
}

/// gamma^2/(x^2 + gamma^2): unit peak, 1/2 at |x| = gamma.
inline double lorentzian(double x, LorentzWidth gamma) {
  detail::require(std::isfinite(x), "lorentzian: non-finite frequency offset");
  detail::require(gamma.value() > 0.0, "lorentzian: gamma must be > 0");
  const double g2 = gamma.value() * gamma.value();
  return g2 / (x * x + g2);
}

namespace detail {

// Re w(x + iy) for 0 < y < 1e-6: second-order expansion about the real axis.
// w(x) = exp(-x^2) + (2i/sqrt(pi)) F(x), F the Dawson integral.
inline double voigt_real_near_axis(double x, double y) {
  constexpr double two_over_sqrt_pi = 1.12837916709551257388;
  const double g = std::exp(-x * x);
  const double dawson_term = faddeeva::w({x, 0.0}).imag();  // (2/sqrt(pi)) F(x)
  const double im_wprime = two_over_sqrt_pi - 2.0 * x * dawson_term;
  return g - y * im_wprime - 0.5 * y * y * g * (4.0 * x * x - 2.0);
}

}  // namespace detail

/// Convolution of the unit-peak Gaussian with the area-normalised Lorentzian.
///
/// Equals Re w((x + i gamma)/delta), so gamma -> 0 gives gaussian(x, delta)
/// and the area is sqrt(pi) delta for every gamma.
inline double voigt(double x, GaussianWidth delta, LorentzWidth gamma) {
  detail::require(std::isfinite(x), "voigt: non-finite frequency offset");
  if (gamma.value() == 0.0) return gaussian(x, delta);
  const double u = x / delta.value();
  const double y = gamma.value() / delta.value();
  if (y < 1e-6) return detail::voigt_real_near_axis(std::abs(u), y);
  return faddeeva::w({u, y}).real();
}

/// Doppler 1/e half-width of a line at temperature T: nu0 sqrt(2 kB T/(m c^2)).
inline GaussianWidth doppler_width(const Transition& t, double temperature_k, double kb_ref) {
  detail::require(std::isfinite(temperature_k) && temperature_k > 0.0, "doppler_width: temperature must be > 0");
  detail::require(std::isfinite(kb_ref) && kb_ref > 0.0, "doppler_width: kb_ref must be > 0");
  constexpr double c = constants::kSpeedOfLight;
  return GaussianWidth(t.nu0_mhz * std::sqrt(2.0 * kb_ref * temperature_k / (t.mass_kg * c * c)));
}

}  // namespace dbt
