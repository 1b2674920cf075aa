#pragma once

// Absorption model of a single molecular line seen through a gas cell:
// hyperfine and frequency-modulation combs, Beer-Lambert transmission and an
// additive baseline. Also the closed-form width corrections for homogeneous,
// hyperfine and modulation broadening.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dbt/error.hpp"
#include "dbt/lineshape.hpp"

namespace dbt {

/// Acquisition geometry of one frequency scan.
struct ScanConfig {
  double span_mhz = 250.0;
  double step_mhz = 0.5;
  double center_mhz = 0.0;  // scan centre, as an offset from the line frequency
  double time_constant_ms = 20.0;
  double snr = 1000.0;  // peak-to-noise ratio on the baseline; infinity disables noise

  std::size_t point_count() const {
    return static_cast<std::size_t>(std::floor(span_mhz / step_mhz + 1e-9)) + 1;
  }

  void validate() const {
    detail::require(std::isfinite(span_mhz) && span_mhz > 0.0, "ScanConfig: span must be > 0");
    detail::require(std::isfinite(step_mhz) && step_mhz > 0.0, "ScanConfig: step must be > 0");
    detail::require(std::isfinite(center_mhz), "ScanConfig: center must be finite");
    detail::require(time_constant_ms >= 0.0, "ScanConfig: time constant must be >= 0");
    detail::require(snr > 0.0, "ScanConfig: snr must be > 0");
    detail::require(point_count() >= 16, "ScanConfig: span/step must give at least 16 points");
  }

  /// Frequency offsets of the scan points, strictly increasing.
  std::vector<double> grid() const {
    validate();
    const std::size_t n = point_count();
    std::vector<double> nu(n);
    const double start = center_mhz - 0.5 * span_mhz;
    for (std::size_t i = 0; i < n; ++i) nu[i] = start + static_cast<double>(i) * step_mhz;
    return nu;
  }
};

/// Metadata carried by every recorded or synthesised spectrum.
struct SpectrumHeader {
  std::string id;
  std::string label;
  double nu0_mhz = 0.0;
  double mass_u = 0.0;
  double temperature_k = 0.0;
  double temperature_sigma_k = 0.0;
  double pressure_pa = 0.0;  // nominal; never used by the analysis
  double cell_length_m = 0.0;
  ScanConfig scan;
  std::uint64_t seed = 0;
  int schema_version = 1;

  Transition transition() const { return Transition::from_mass_u(nu0_mhz, mass_u, label); }
};

/// Normalised transmission sampled on a frequency-offset grid.
struct Spectrum {
  SpectrumHeader header;
  std::vector<double> offset_mhz;
  std::vector<double> transmission;

  std::size_t size() const noexcept { return offset_mhz.size(); }

  void validate() const {
    if (offset_mhz.size() != transmission.size())
      throw DataError("spectrum: frequency and transmission columns differ in length");
    for (std::size_t i = 0; i < size(); ++i) {
      if (!std::isfinite(offset_mhz[i]) || !std::isfinite(transmission[i]))
        throw DataError("spectrum: non-finite sample at row " + std::to_string(i + 1));
      if (i > 0 && !(offset_mhz[i] > offset_mhz[i - 1]))
        throw DataError("spectrum: frequency grid not strictly increasing at row " + std::to_string(i + 1));
    }
  }
};

/// A weighted set of lines at fixed frequency offsets.
struct CombLine {
  double offset_mhz;
  double weight;
};

/// Unresolved hyperfine components of a line, offsets relative to the
/// intensity-weighted centroid.
class HyperfineStructure {
 public:
  explicit HyperfineStructure(std::vector<CombLine> components) : components_(std::move(components)) {
    detail::require(!components_.empty(), "HyperfineStructure: no components");
    double wsum = 0.0, moment = 0.0;
    for (const auto& c : components_) {
      detail::require(std::isfinite(c.offset_mhz) && std::isfinite(c.weight) && c.weight > 0.0,
                      "HyperfineStructure: weights must be finite and > 0");
      wsum += c.weight;
      moment += c.weight * c.offset_mhz;
    }
    detail::require(std::abs(wsum - 1.0) <= 1e-12, "HyperfineStructure: weights must sum to 1");
    detail::require(std::abs(moment) <= 1e-9, "HyperfineStructure: weighted mean offset must be 0");
  }

  /// Rescales weights to unit sum and shifts offsets to a zero centroid.
  static HyperfineStructure normalized(std::vector<CombLine> raw) {
    detail::require(!raw.empty(), "HyperfineStructure: no components");
    double wsum = 0.0;
    for (const auto& c : raw) {
      detail::require(c.weight > 0.0, "HyperfineStructure: weights must be > 0");
      wsum += c.weight;
    }
    double centroid = 0.0;
    for (auto& c : raw) {
      c.weight /= wsum;
      centroid += c.weight * c.offset_mhz;
    }
    for (auto& c : raw) c.offset_mhz -= centroid;
    return HyperfineStructure(std::move(raw));
  }

  /// Equal-weight doublet with the given total separation.
  static HyperfineStructure doublet(double separation_mhz) {
    return HyperfineStructure({{-0.5 * separation_mhz, 0.5}, {0.5 * separation_mhz, 0.5}});
  }

  /// Illustrative 12-component structure spanning 150 kHz. Not measured data.
  static HyperfineStructure placeholder_nh3() {
    std::vector<CombLine> raw;
    constexpr int n = 12;
    constexpr double span = 0.150;
    for (int i = 0; i < n; ++i) raw.push_back({-0.5 * span + span * i / (n - 1), 1.0});
    return normalized(std::move(raw));
  }

  const std::vector<CombLine>& components() const noexcept { return components_; }

  /// Distance between the outermost components.
  double total_width() const {
    auto [lo, hi] = std::minmax_element(components_.begin(), components_.end(),
                                        [](const CombLine& a, const CombLine& b) { return a.offset_mhz < b.offset_mhz; });
    return hi->offset_mhz - lo->offset_mhz;
  }

 private:
  std::vector<CombLine> components_;
};

/// Optical spectrum of a sinusoidally frequency-modulated laser: lines at
/// k * mod_freq with weights J_k(beta)^2, beta = depth / mod_freq.
class ModulationComb {
 public:
  ModulationComb(double mod_freq_khz, double depth_khz) : mod_freq_khz_(mod_freq_khz), depth_khz_(depth_khz) {
    detail::require(std::isfinite(mod_freq_khz) && mod_freq_khz > 0.0, "ModulationComb: mod_freq must be > 0");
    detail::require(std::isfinite(depth_khz) && depth_khz >= 0.0, "ModulationComb: depth must be >= 0");
    const double beta = depth_khz_ / mod_freq_khz_;
    constexpr double kTail = 1e-10;
    double cumulative = bessel_weight(0, beta);
    lines_.push_back({0.0, cumulative});
    int k = 0;
    while (cumulative < 1.0 - kTail) {
      ++k;
      const double wk = bessel_weight(k, beta);
      const double off = k * mod_freq_khz_ * 1e-3;
      lines_.push_back({-off, wk});
      lines_.push_back({off, wk});
      cumulative += 2.0 * wk;
      detail::require(k < 10000, "ModulationComb: Bessel series did not converge");
    }
    order_cutoff_ = k;
    std::sort(lines_.begin(), lines_.end(), [](const CombLine& a, const CombLine& b) { return a.offset_mhz < b.offset_mhz; });
  }

  double mod_freq_khz() const noexcept { return mod_freq_khz_; }
  double depth_khz() const noexcept { return depth_khz_; }
  double modulation_index() const noexcept { return depth_khz_ / mod_freq_khz_; }
  int order_cutoff() const noexcept { return order_cutoff_; }
  const std::vector<CombLine>& lines() const noexcept { return lines_; }

 private:
  static double bessel_weight(int k, double beta) {
    const double j = std::cyl_bessel_j(static_cast<double>(k), beta);
    return j * j;
  }

  double mod_freq_khz_;
  double depth_khz_;
  int order_cutoff_ = 0;
  std::vector<CombLine> lines_;
};

/// Absorption line as seen by the detector.
///
/// `peak_depth` is the optical depth at line centre of a single unbroadened
/// component (the product of line strength, absorber density and cell
/// length). The baseline is additive: level * exp(-tau) + slope * (nu - nu0).
struct AbsorptionModel {
  Transition transition;
  GaussianWidth delta;
  LorentzWidth gamma{0.0};
  double peak_depth = 0.0;
  std::optional<HyperfineStructure> hyperfine{};
  std::optional<ModulationComb> comb{};
  double baseline_level = 1.0;
  double baseline_slope = 0.0;  // per MHz

  void validate() const {
    detail::require(std::isfinite(peak_depth) && peak_depth >= 0.0, "AbsorptionModel: peak_depth must be >= 0");
    detail::require(std::isfinite(baseline_level) && baseline_level > 0.0, "AbsorptionModel: baseline_level must be > 0");
    detail::require(std::isfinite(baseline_slope), "AbsorptionModel: baseline_slope must be finite");
  }

  /// Outer product of hyperfine components and comb lines.
  std::vector<CombLine> composite_lines() const {
    std::vector<CombLine> hyp = hyperfine ? hyperfine->components() : std::vector<CombLine>{{0.0, 1.0}};
    std::vector<CombLine> fm = comb ? comb->lines() : std::vector<CombLine>{{0.0, 1.0}};
    std::vector<CombLine> out;
    out.reserve(hyp.size() * fm.size());
    for (const auto& h : hyp)
      for (const auto& c : fm) out.push_back({h.offset_mhz + c.offset_mhz, h.weight * c.weight});
    return out;
  }
};

/// Optical depth at detuning `nu` (MHz from the transition frequency).
inline double optical_depth(double nu, const AbsorptionModel& model) {
  if (!model.hyperfine && !model.comb) return model.peak_depth * voigt(nu, model.delta, model.gamma);
  double sum = 0.0;
  for (const auto& line : model.composite_lines())
    sum += line.weight * voigt(nu - line.offset_mhz, model.delta, model.gamma);
  return model.peak_depth * sum;
}

/// Optical depth on a whole grid; composes the line list once.
inline std::vector<double> optical_depth(const std::vector<double>& nu, const AbsorptionModel& model) {
  model.validate();
  const auto lines = model.composite_lines();
  std::vector<double> tau(nu.size(), 0.0);
  for (std::size_t i = 0; i < nu.size(); ++i) {
    double sum = 0.0;
    for (const auto& line : lines) sum += line.weight * voigt(nu[i] - line.offset_mhz, model.delta, model.gamma);
    tau[i] = model.peak_depth * sum;
  }
  return tau;
}

inline double transmission(double nu, const AbsorptionModel& model) {
  model.validate();
  return model.baseline_level * std::exp(-optical_depth(nu, model)) + model.baseline_slope * nu;
}

inline std::vector<double> transmission(const std::vector<double>& nu, const AbsorptionModel& model) {
  auto t = optical_depth(nu, model);
  for (std::size_t i = 0; i < nu.size(); ++i)
    t[i] = model.baseline_level * std::exp(-t[i]) + model.baseline_slope * nu[i];
  return t;
}

/// Result of a closed-form broadening correction. `out_of_domain` is set when
/// the perturbation ratio exceeds the range where the formula was derived.
struct BroadenedWidth {
  GaussianWidth width;
  double relative_broadening;
  bool out_of_domain;
};

inline constexpr double kHomogeneousBroadeningCoeff = 0.484;
inline constexpr double kHyperfineBroadeningCoeff = 0.254;
inline constexpr double kModulationBroadeningCoeff = 1.0;
inline constexpr double kBroadeningValidityRatio = 0.1;

/// Apparent Gaussian width of a Voigt line: delta_d (1 + 0.484 gamma/delta_d).
inline BroadenedWidth broadening_homogeneous(GaussianWidth delta_d, LorentzWidth gamma) {
  const double r = gamma.value() / delta_d.value();
  const double rel = kHomogeneousBroadeningCoeff * r;
  return {GaussianWidth(delta_d.value() * (1.0 + rel)), rel, r > kBroadeningValidityRatio};
}

/// Apparent width of an unresolved structure of total width delta_hyp:
/// delta_d (1 + 0.254 (delta_hyp/delta_d)^2). The coefficient is that of an
/// equal-amplitude doublet, the least favourable case.
inline BroadenedWidth broadening_hyperfine(GaussianWidth delta_d, double delta_hyp_mhz) {
  detail::require(std::isfinite(delta_hyp_mhz) && delta_hyp_mhz >= 0.0, "broadening_hyperfine: width must be >= 0");
  const double r = delta_hyp_mhz / delta_d.value();
  const double rel = kHyperfineBroadeningCoeff * r * r;
  return {GaussianWidth(delta_d.value() * (1.0 + rel)), rel, r > kBroadeningValidityRatio};
}

/// Apparent width under laser frequency modulation: delta_d (1 + (depth/delta_d)^2).
inline BroadenedWidth broadening_modulation(GaussianWidth delta_d, double depth_mhz) {
  detail::require(std::isfinite(depth_mhz) && depth_mhz >= 0.0, "broadening_modulation: depth must be >= 0");
  const double r = depth_mhz / delta_d.value();
  const double rel = kModulationBroadeningCoeff * r * r;
  return {GaussianWidth(delta_d.value() * (1.0 + rel)), rel, r > kBroadeningValidityRatio};
}

/// Parses a hyperfine table: one "offset_MHz weight" pair per line, '#'
/// starts a comment. Weights are normalised and offsets re-centred.
inline HyperfineStructure parse_hyperfine(std::istream& in, const std::string& name = {}) {
  std::vector<CombLine> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double off = 0.0, w = 0.0;
    if (!(ls >> off)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ParseError(name, lineno, "expected 'offset_MHz weight'");
    }
    if (!(ls >> w)) throw ParseError(name, lineno, "missing weight");
    std::string extra;
    if (ls >> extra) throw ParseError(name, lineno, "unexpected trailing field '" + extra + "'");
    if (!std::isfinite(off) || !std::isfinite(w) || w <= 0.0)
      throw ParseError(name, lineno, "offset must be finite and weight > 0");
    raw.push_back({off, w});
  }
  if (raw.empty()) throw ParseError(name, 0, "no hyperfine components");
  return HyperfineStructure::normalized(std::move(raw));
}

inline HyperfineStructure read_hyperfine(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open hyperfine file " + path);
  return parse_hyperfine(in, path);
}

}  // namespace dbt
