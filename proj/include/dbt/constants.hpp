#pragma once

// Physical constants and reference molecular data.
//
// Every value the toolkit treats as a reference lives here so a run manifest
// can pin it by version.

#include <string_view>

namespace dbt::constants {

inline constexpr std::string_view kVersion = "dbt-constants/1 (CODATA 2018, AME 2003 masses)";

/// Speed of light in vacuum, m/s (exact).
inline constexpr double kSpeedOfLight = 299'792'458.0;

/// Unified atomic mass constant, kg (CODATA 2018).
inline constexpr double kAtomicMassUnit = 1.660'539'066'60e-27;

/// Boltzmann constant as recommended in CODATA 2002, J/K.
///
/// This is the reference value the optical measurement is compared against and
/// the default ground truth of the simulator.
inline constexpr double kBoltzmannCodata2002 = 1.380'650'5e-23;
inline constexpr double kBoltzmannCodata2002RelSigma = 1.8e-6;

/// Atomic masses (neutral atoms, electrons included), u.
inline constexpr double kMassN14 = 14.003'074'004'8;
inline constexpr double kMassH1 = 1.007'825'032'07;

/// 14NH3 molecular mass, u. Sum of the neutral atomic masses; the molecular
/// binding energy (~1e-9 relative) is below every tolerance used here.
inline constexpr double kMassNH3_u = kMassN14 + 3.0 * kMassH1;

/// nu2 asQ(6,3) rovibrational line of 14NH3, MHz.
inline constexpr double kNH3LineFrequencyMHz = 28'953'694.0;
inline constexpr std::string_view kNH3LineLabel = "14NH3 nu2 asQ(6,3)";

/// Ice-bath cell temperature and its stated uncertainty, K.
inline constexpr double kIceBathTemperature = 273.15;
inline constexpr double kIceBathSigma = 0.020;

/// Absorption cell length, m.
inline constexpr double kCellLength = 0.30;

/// Default relative uncertainties of the molecular mass and line frequency.
inline constexpr double kMassRelSigma = 1e-9;
inline constexpr double kFrequencyRelSigma = 1e-8;

/// Published reference result of the optical measurement: zero-pressure
/// Doppler 1/e half-width and the derived Boltzmann constant.
inline constexpr double kPublishedDopplerWidthMHz = 49.8831;
inline constexpr double kPublishedDopplerWidthSigmaMHz = 0.0047;
inline constexpr double kPublishedBoltzmann = 1.38065e-23;
inline constexpr double kPublishedBoltzmannSigma = 0.00026e-23;

}  // namespace dbt::constants
