#pragma once

// Campaign configuration (JSON) and run manifests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbt/constants.hpp"
#include "dbt/error.hpp"
#include "dbt/fitter.hpp"
#include "dbt/io.hpp"
#include "dbt/simulator.hpp"
#include "dbt/spectrum.hpp"

namespace dbt {

using json = nlohmann::json;

inline constexpr std::string_view kToolVersion = "0.3.0";

struct OutputPaths {
  std::string spectra_dir = "spectra";
  std::string fits = "fits.tsv";
  std::string summary = "summary.json";
  std::string table = "widths.tsv";
  std::string kb = "kb.json";
  std::string budget = "budget.json";
};

struct CampaignConfig {
  std::uint64_t seed = 42;
  std::vector<double> pressures_pa{0.2, 0.35, 0.61, 1.07, 1.87, 3.27, 5.72, 10.0};
  int replicas = 1;
  double snr = 1000.0;  // infinity disables noise
  double kb_true = constants::kBoltzmannCodata2002;

  std::string label{constants::kNH3LineLabel};
  double nu0_mhz = constants::kNH3LineFrequencyMHz;
  double mass_u = constants::kMassNH3_u;

  double temperature_k = constants::kIceBathTemperature;
  double temperature_sigma_k = constants::kIceBathSigma;

  double pressure_broadening_mhz_per_pa = 0.02;
  double absorption_per_pa = 0.161;
  ScanConfig scan;
  double cell_length_m = constants::kCellLength;
  double baseline_level = 1.0;

  std::optional<std::string> hyperfine_file;
  std::optional<double> modulation_freq_khz;
  std::optional<double> modulation_depth_khz;

  double slope_injection_fraction = 0.0;
  double slope_injection_per_mhz = 0.0;

  FitModel model = FitModel::ExpGaussianPlusSlope;
  std::optional<double> threshold_slope;  // unset: 3x median slope uncertainty

  double mass_rel_sigma = constants::kMassRelSigma;
  double frequency_rel_sigma = constants::kFrequencyRelSigma;

  OutputPaths output;

  Transition transition() const { return Transition::from_mass_u(nu0_mhz, mass_u, label); }

  GasConditions gas() const {
    GasConditions g;
    g.temperature_k = temperature_k;
    g.temperature_sigma_k = temperature_sigma_k;
    g.pressure_broadening_mhz_per_pa = pressure_broadening_mhz_per_pa;
    g.absorption_per_pa = absorption_per_pa;
    return g;
  }

  ScanConfig scan_config() const {
    ScanConfig s = scan;
    s.snr = snr;
    return s;
  }

  LineExtras extras(const std::filesystem::path& base_dir = {}) const {
    LineExtras e;
    e.baseline_level = baseline_level;
    e.cell_length_m = cell_length_m;
    if (hyperfine_file) {
      std::filesystem::path p(*hyperfine_file);
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      e.hyperfine = read_hyperfine(p.string());
    }
    if (modulation_freq_khz || modulation_depth_khz) {
      if (!modulation_freq_khz || !modulation_depth_khz)
        throw DataError("config: modulation needs both mod_freq_khz and depth_khz");
      e.comb = ModulationComb(*modulation_freq_khz, *modulation_depth_khz);
    }
    return e;
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw DataError("config: " + what); };
    if (pressures_pa.empty()) fail("pressures_pa must not be empty");
    for (double p : pressures_pa)
      if (!(p >= 0.01 && p <= 20.0)) fail("every pressure must lie in [0.01, 20] Pa");
    if (replicas < 1) fail("replicas must be >= 1");
    if (!(snr > 0.0)) fail("snr must be > 0");
    if (!(kb_true > 0.0)) fail("kb_true must be > 0");
    if (!(temperature_k > 0.0) || !(temperature_sigma_k >= 0.0)) fail("temperature must be > 0 with sigma >= 0");
    if (!(pressure_broadening_mhz_per_pa >= 0.0) || !(absorption_per_pa >= 0.0))
      fail("gas coefficients must be >= 0");
    if (!(baseline_level > 0.0)) fail("baseline_level must be > 0");
    if (!(slope_injection_fraction >= 0.0 && slope_injection_fraction <= 1.0))
      fail("slope_injection.fraction must lie in [0, 1]");
    if (!std::isfinite(slope_injection_per_mhz)) fail("slope_injection.slope_per_mhz must be finite");
    if (threshold_slope && !(*threshold_slope > 0.0)) fail("threshold_slope must be > 0");
    if (!(mass_rel_sigma >= 0.0) || !(frequency_rel_sigma >= 0.0)) fail("relative uncertainties must be >= 0");
    try {
      transition();
      scan_config().validate();
    } catch (const DomainError& e) {
      fail(e.what());
    }
  }
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw DataError("config: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == it.key();
    if (!ok) throw DataError("config: unknown key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
  }
}

template <class T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError("config: key '" + (where.empty() ? "" : where + ".") + key + "' has the wrong type");
  }
}

// Numbers, plus the strings "inf"/"infinity" for unbounded values.
inline void read_number(const json& j, const char* key, double& out, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  const auto& v = j.at(key);
  if (v.is_string() && (v == "inf" || v == "infinity")) {
    out = std::numeric_limits<double>::infinity();
    return;
  }
  if (!v.is_number()) throw DataError("config: key '" + (where.empty() ? "" : where + ".") + key + "' must be a number");
  out = v.get<double>();
}

}  // namespace detail

inline CampaignConfig parse_config(const json& j) {
  using detail::read_number;
  using detail::read_opt;
  detail::reject_unknown(j,
                         {"seed", "pressures_pa", "replicas", "snr", "kb_true", "transition", "temperature", "gas",
                          "scan", "cell_length_m", "baseline_level", "hyperfine_file", "modulation", "slope_injection",
                          "model", "threshold_slope", "uncertainty", "output"},
                         "");
  CampaignConfig c;
  read_opt(j, "seed", c.seed, "");
  read_opt(j, "pressures_pa", c.pressures_pa, "");
  read_opt(j, "replicas", c.replicas, "");
  read_number(j, "snr", c.snr, "");
  read_number(j, "kb_true", c.kb_true, "");
  read_number(j, "cell_length_m", c.cell_length_m, "");
  read_number(j, "baseline_level", c.baseline_level, "");
  if (j.contains("transition")) {
    const auto& t = j.at("transition");
    detail::reject_unknown(t, {"label", "nu0_mhz", "mass_u"}, "transition");
    read_opt(t, "label", c.label, "transition");
    read_number(t, "nu0_mhz", c.nu0_mhz, "transition");
    read_number(t, "mass_u", c.mass_u, "transition");
  }
  if (j.contains("temperature")) {
    const auto& t = j.at("temperature");
    detail::reject_unknown(t, {"value_k", "sigma_k"}, "temperature");
    read_number(t, "value_k", c.temperature_k, "temperature");
    read_number(t, "sigma_k", c.temperature_sigma_k, "temperature");
  }
  if (j.contains("gas")) {
    const auto& g = j.at("gas");
    detail::reject_unknown(g, {"pressure_broadening_mhz_per_pa", "absorption_per_pa"}, "gas");
    read_number(g, "pressure_broadening_mhz_per_pa", c.pressure_broadening_mhz_per_pa, "gas");
    read_number(g, "absorption_per_pa", c.absorption_per_pa, "gas");
  }
  if (j.contains("scan")) {
    const auto& s = j.at("scan");
    detail::reject_unknown(s, {"span_mhz", "step_mhz", "center_mhz", "time_constant_ms"}, "scan");
    read_number(s, "span_mhz", c.scan.span_mhz, "scan");
    read_number(s, "step_mhz", c.scan.step_mhz, "scan");
    read_number(s, "center_mhz", c.scan.center_mhz, "scan");
    read_number(s, "time_constant_ms", c.scan.time_constant_ms, "scan");
  }
  if (j.contains("hyperfine_file") && !j.at("hyperfine_file").is_null()) {
    std::string f;
    read_opt(j, "hyperfine_file", f, "");
    c.hyperfine_file = f;
  }
  if (j.contains("modulation") && !j.at("modulation").is_null()) {
    const auto& m = j.at("modulation");
    detail::reject_unknown(m, {"mod_freq_khz", "depth_khz"}, "modulation");
    double f = 0.0, d = 0.0;
    if (!m.contains("mod_freq_khz") || !m.contains("depth_khz"))
      throw DataError("config: modulation needs both mod_freq_khz and depth_khz");
    read_number(m, "mod_freq_khz", f, "modulation");
    read_number(m, "depth_khz", d, "modulation");
    c.modulation_freq_khz = f;
    c.modulation_depth_khz = d;
  }
  if (j.contains("slope_injection")) {
    const auto& s = j.at("slope_injection");
    detail::reject_unknown(s, {"fraction", "slope_per_mhz"}, "slope_injection");
    read_number(s, "fraction", c.slope_injection_fraction, "slope_injection");
    read_number(s, "slope_per_mhz", c.slope_injection_per_mhz, "slope_injection");
  }
  if (j.contains("model")) {
    std::string m;
    read_opt(j, "model", m, "");
    try {
      c.model = fit_model_from_string(m);
    } catch (const DomainError& e) {
      throw DataError(std::string("config: ") + e.what());
    }
  }
  if (j.contains("threshold_slope") && !j.at("threshold_slope").is_null()) {
    double t = 0.0;
    read_number(j, "threshold_slope", t, "");
    c.threshold_slope = t;
  }
  if (j.contains("uncertainty")) {
    const auto& u = j.at("uncertainty");
    detail::reject_unknown(u, {"mass_rel", "frequency_rel"}, "uncertainty");
    read_number(u, "mass_rel", c.mass_rel_sigma, "uncertainty");
    read_number(u, "frequency_rel", c.frequency_rel_sigma, "uncertainty");
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::reject_unknown(o, {"spectra_dir", "fits", "summary", "table", "kb", "budget"}, "output");
    read_opt(o, "spectra_dir", c.output.spectra_dir, "output");
    read_opt(o, "fits", c.output.fits, "output");
    read_opt(o, "summary", c.output.summary, "output");
    read_opt(o, "table", c.output.table, "output");
    read_opt(o, "kb", c.output.kb, "output");
    read_opt(o, "budget", c.output.budget, "output");
  }
  c.validate();
  return c;
}

inline CampaignConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

inline json number_or_inf(double v) { return std::isfinite(v) ? json(v) : json("inf"); }

/// Fully resolved configuration; parse_config(to_json(c)) reproduces c.
inline json to_json(const CampaignConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["pressures_pa"] = c.pressures_pa;
  j["replicas"] = c.replicas;
  j["snr"] = number_or_inf(c.snr);
  j["kb_true"] = c.kb_true;
  j["transition"] = {{"label", c.label}, {"nu0_mhz", c.nu0_mhz}, {"mass_u", c.mass_u}};
  j["temperature"] = {{"value_k", c.temperature_k}, {"sigma_k", c.temperature_sigma_k}};
  j["gas"] = {{"pressure_broadening_mhz_per_pa", c.pressure_broadening_mhz_per_pa},
              {"absorption_per_pa", c.absorption_per_pa}};
  j["scan"] = {{"span_mhz", c.scan.span_mhz},
               {"step_mhz", c.scan.step_mhz},
               {"center_mhz", c.scan.center_mhz},
               {"time_constant_ms", c.scan.time_constant_ms}};
  j["cell_length_m"] = c.cell_length_m;
  j["baseline_level"] = c.baseline_level;
  j["hyperfine_file"] = c.hyperfine_file ? json(*c.hyperfine_file) : json(nullptr);
  j["modulation"] = c.modulation_freq_khz
                        ? json{{"mod_freq_khz", *c.modulation_freq_khz}, {"depth_khz", *c.modulation_depth_khz}}
                        : json(nullptr);
  j["slope_injection"] = {{"fraction", c.slope_injection_fraction}, {"slope_per_mhz", c.slope_injection_per_mhz}};
  j["model"] = std::string(to_string(c.model));
  j["threshold_slope"] = c.threshold_slope ? json(*c.threshold_slope) : json(nullptr);
  j["uncertainty"] = {{"mass_rel", c.mass_rel_sigma}, {"frequency_rel", c.frequency_rel_sigma}};
  j["output"] = {{"spectra_dir", c.output.spectra_dir}, {"fits", c.output.fits},   {"summary", c.output.summary},
                 {"table", c.output.table},             {"kb", c.output.kb},       {"budget", c.output.budget}};
  return j;
}

/// 64-bit FNV-1a, used to fingerprint configurations in manifests.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Everything needed to repeat a CLI run.
inline json make_manifest(std::string_view subcommand, const std::vector<std::string>& argv,
                          const std::optional<CampaignConfig>& config, const std::vector<std::string>& inputs,
                          const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "dbt";
  m["tool_version"] = std::string(kToolVersion);
  m["constants_version"] = std::string(constants::kVersion);
  m["schema_version"] = io::kSchemaVersion;
  m["subcommand"] = std::string(subcommand);
  m["argv"] = argv;
#if defined(__clang__)
  m["compiler"] = "clang " __clang_version__;
#elif defined(__GNUC__)
  m["compiler"] = "gcc " __VERSION__;
#endif
  if (config) {
    const json cj = to_json(*config);
    m["config"] = cj;
    m["config_hash"] = hex64(fnv1a64(cj.dump()));
    m["seed"] = config->seed;
  }
  json in = json::array();
  for (const auto& f : inputs) {
    std::string hash;
    try {
      hash = hex64(fnv1a64(io::read_file(f)));
    } catch (const DataError&) {
      hash = "unreadable";
    }
    in.push_back({{"path", f}, {"fnv1a64", hash}});
  }
  m["inputs"] = in;
  m["outputs"] = outputs;
  return m;
}

}  // namespace dbt
