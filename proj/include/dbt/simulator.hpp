#pragma once

// Synthetic spectrometer: noisy transmission spectra with known ground truth.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dbt/constants.hpp"
#include "dbt/error.hpp"
#include "dbt/lineshape.hpp"
#include "dbt/spectrum.hpp"

namespace dbt {

/// State of the gas in the cell for one recording.
struct GasConditions {
  double pressure_pa = 1.0;
  double temperature_k = constants::kIceBathTemperature;
  double temperature_sigma_k = constants::kIceBathSigma;
  double pressure_broadening_mhz_per_pa = 0.02;  // Lorentzian HWHM per Pa
  double absorption_per_pa = 0.161;              // peak optical depth per Pa

  void validate() const {
    detail::require(pressure_pa >= 0.01 && pressure_pa <= 20.0, "GasConditions: pressure must lie in [0.01, 20] Pa");
    detail::require(std::isfinite(temperature_k) && temperature_k > 0.0, "GasConditions: temperature must be > 0");
    detail::require(temperature_sigma_k >= 0.0, "GasConditions: temperature sigma must be >= 0");
    detail::require(pressure_broadening_mhz_per_pa >= 0.0, "GasConditions: broadening coefficient must be >= 0");
    detail::require(absorption_per_pa >= 0.0, "GasConditions: absorption coefficient must be >= 0");
  }
};

/// Optional features of the synthetic line beyond a single Voigt component.
struct LineExtras {
  std::optional<HyperfineStructure> hyperfine;
  std::optional<ModulationComb> comb;
  double baseline_level = 1.0;
  double cell_length_m = constants::kCellLength;
};

struct GroundTruth {
  double kb_true = 0.0;
  double delta_d_true = 0.0;  // MHz
  double gamma = 0.0;         // MHz
  double peak_depth = 0.0;
  double pressure_pa = 0.0;
  double baseline_slope = 0.0;
};

using SimulatedSpectrum = std::pair<Spectrum, GroundTruth>;

/// Minimum usable transmission at the line centre.
inline constexpr double kOpticallyBlackLimit = 1e-3;

/// Independent generator for stream `stream` of a master seed. Streams do not
/// depend on evaluation order, so serial and parallel runs agree.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x6b42u};
  return std::mt19937_64(seq);
}

namespace detail {

inline SimulatedSpectrum synth_with_stream(const Transition& transition, const GasConditions& gas, const ScanConfig& scan,
                                           double kb_true, const LineExtras& extras, std::uint64_t seed,
                                           std::mt19937_64& rng) {
  transition.validate();
  gas.validate();
  scan.validate();
  require(std::isfinite(kb_true) && kb_true > 0.0, "synth_spectrum: kb_true must be > 0");

  const GaussianWidth delta = doppler_width(transition, gas.temperature_k, kb_true);
  AbsorptionModel model{transition, delta, LorentzWidth(gas.pressure_broadening_mhz_per_pa * gas.pressure_pa),
                        gas.absorption_per_pa * gas.pressure_pa, extras.hyperfine, extras.comb, extras.baseline_level, 0.0};

  Spectrum s;
  s.offset_mhz = scan.grid();
  s.transmission = transmission(s.offset_mhz, model);

  double tmin = std::numeric_limits<double>::infinity();
  for (double t : s.transmission) tmin = std::min(tmin, t);
  if (tmin < kOpticallyBlackLimit * extras.baseline_level)
    throw DataError("synth_spectrum: line is optically black at " + std::to_string(gas.pressure_pa) +
                    " Pa (peak transmission below 1e-3)");

  if (std::isfinite(scan.snr)) {
    std::normal_distribution<double> noise(0.0, extras.baseline_level / scan.snr);
    for (double& t : s.transmission) t += noise(rng);
  }

  auto& h = s.header;
  h.label = transition.label;
  h.nu0_mhz = transition.nu0_mhz;
  h.mass_u = transition.mass_u;
  h.temperature_k = gas.temperature_k;
  h.temperature_sigma_k = gas.temperature_sigma_k;
  h.pressure_pa = gas.pressure_pa;
  h.cell_length_m = extras.cell_length_m;
  h.scan = scan;
  h.seed = seed;

  GroundTruth truth{kb_true, delta.value(), model.gamma.value(), model.peak_depth, gas.pressure_pa, 0.0};
  return {std::move(s), truth};
}

}  // namespace detail

/// One synthetic spectrum. Deterministic for a fixed seed.
inline SimulatedSpectrum synth_spectrum(const Transition& transition, const GasConditions& gas, const ScanConfig& scan,
                                        double kb_true, std::uint64_t seed, const LineExtras& extras = {}) {
  auto rng = make_stream(seed, 0);
  auto out = detail::synth_with_stream(transition, gas, scan, kb_true, extras, seed, rng);
  out.first.header.id = "s0000";
  return out;
}

/// One spectrum per pressure; spectrum i draws its noise from stream i.
inline std::vector<SimulatedSpectrum> synth_series(const Transition& transition, const GasConditions& gas,
                                                   const std::vector<double>& pressures, const ScanConfig& scan,
                                                   double kb_true, std::uint64_t seed, const LineExtras& extras = {},
                                                   std::uint64_t first_stream = 0) {
  if (pressures.empty()) throw DomainError("synth_series: empty pressure list");
  std::vector<SimulatedSpectrum> out;
  out.reserve(pressures.size());
  for (std::size_t i = 0; i < pressures.size(); ++i) {
    GasConditions g = gas;
    g.pressure_pa = pressures[i];
    const std::uint64_t stream = first_stream + i;
    auto rng = make_stream(seed, stream);
    auto sim = detail::synth_with_stream(transition, g, scan, kb_true, extras, seed, rng);
    char id[32];
    std::snprintf(id, sizeof id, "s%04llu", static_cast<unsigned long long>(stream));
    sim.first.header.id = id;
    out.push_back(std::move(sim));
  }
  return out;
}

/// Adds slope * (nu - nu0) to every sample, the net effect of parasitic light
/// on the detector.
inline Spectrum inject_baseline_slope(Spectrum spectrum, double slope_per_mhz) {
  detail::require(std::isfinite(slope_per_mhz), "inject_baseline_slope: slope must be finite");
  for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum.transmission[i] += slope_per_mhz * spectrum.offset_mhz[i];
  return spectrum;
}

}  // namespace dbt
