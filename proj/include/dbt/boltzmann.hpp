#pragma once

// Boltzmann constant from a Doppler width, with a first-order uncertainty
// budget.

#include <cmath>
#include <string>
#include <vector>

#include "dbt/constants.hpp"
#include "dbt/error.hpp"
#include "dbt/lineshape.hpp"

namespace dbt {

struct TemperatureReading {
  double value;  // K
  double sigma;  // K

  void validate() const {
    detail::require(std::isfinite(value) && value > 0.0, "TemperatureReading: value must be > 0");
    detail::require(std::isfinite(sigma) && sigma >= 0.0, "TemperatureReading: sigma must be >= 0");
  }
};

/// A value with its standard uncertainty, in the value's units.
struct Measured {
  double value;
  double sigma = 0.0;
};

/// kB = (m c^2 / 2T) (delta_d / nu)^2.
inline double kb_from_width(GaussianWidth delta_d, const Transition& t, double temperature_k) {
  t.validate();
  detail::require(std::isfinite(temperature_k) && temperature_k > 0.0, "kb_from_width: temperature must be > 0");
  constexpr double c = constants::kSpeedOfLight;
  const double ratio = delta_d.value() / t.nu0_mhz;
  return t.mass_kg * c * c / (2.0 * temperature_k) * ratio * ratio;
}

struct BudgetItem {
  std::string source;
  double relative;  // contribution to sigma_kb / kb
};

struct BoltzmannResult {
  double kb = 0.0;
  double sigma_kb = 0.0;
  std::vector<BudgetItem> budget;

  double relative_sigma() const { return sigma_kb / kb; }
};

/// Relative contributions: width 2 s_D/D, temperature s_T/T, mass s_m/m,
/// frequency 2 s_nu/nu, combined in quadrature.
inline BoltzmannResult uncertainty_budget(Measured delta_d_mhz, Measured mass_kg, Measured nu_mhz,
                                          const TemperatureReading& temperature) {
  temperature.validate();
  detail::require(delta_d_mhz.value > 0.0 && mass_kg.value > 0.0 && nu_mhz.value > 0.0,
                  "uncertainty_budget: width, mass and frequency must be > 0");
  detail::require(delta_d_mhz.sigma >= 0.0 && mass_kg.sigma >= 0.0 && nu_mhz.sigma >= 0.0,
                  "uncertainty_budget: sigmas must be >= 0");

  Transition t{nu_mhz.value, mass_kg.value, mass_kg.value / constants::kAtomicMassUnit, "budget"};
  BoltzmannResult r;
  r.kb = kb_from_width(GaussianWidth(delta_d_mhz.value), t, temperature.value);
  r.budget = {
      {"width", 2.0 * delta_d_mhz.sigma / delta_d_mhz.value},
      {"temperature", temperature.sigma / temperature.value},
      {"mass", mass_kg.sigma / mass_kg.value},
      {"frequency", 2.0 * nu_mhz.sigma / nu_mhz.value},
  };
  double sum2 = 0.0;
  for (const auto& b : r.budget) sum2 += b.relative * b.relative;
  r.sigma_kb = r.kb * std::sqrt(sum2);
  return r;
}

}  // namespace dbt
