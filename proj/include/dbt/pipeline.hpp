#pragma once

// Campaign-level orchestration: simulate a pressure series, fit every
// spectrum, extrapolate to zero pressure and convert to kB. Each stage takes
// and returns plain values so the CLI can chain them through files.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dbt/boltzmann.hpp"
#include "dbt/config.hpp"
#include "dbt/extrapolation.hpp"
#include "dbt/fitter.hpp"
#include "dbt/io.hpp"
#include "dbt/simulator.hpp"

namespace dbt {

// ------------------------------------------------------------- simulation --

/// Stream offset reserved for the slope-injection draws, far from the noise
/// streams of the spectra themselves.
inline constexpr std::uint64_t kSlopeStreamBase = 1ull << 40;

/// Pressures x replicas spectra. Spectrum k = replica * n_pressures + i uses
/// noise stream k; a fraction of them receive a baseline slope of random sign.
inline std::vector<SimulatedSpectrum> simulate_campaign(const CampaignConfig& c,
                                                        const std::filesystem::path& base_dir = {}) {
  c.validate();
  const auto transition = c.transition();
  const auto extras = c.extras(base_dir);
  std::vector<SimulatedSpectrum> out;
  out.reserve(c.pressures_pa.size() * static_cast<std::size_t>(c.replicas));
  for (int r = 0; r < c.replicas; ++r) {
    auto batch = synth_series(transition, c.gas(), c.pressures_pa, c.scan_config(), c.kb_true, c.seed, extras,
                              static_cast<std::uint64_t>(r) * c.pressures_pa.size());
    for (auto& b : batch) out.push_back(std::move(b));
  }
  if (c.slope_injection_fraction > 0.0 && c.slope_injection_per_mhz != 0.0) {
    for (std::size_t k = 0; k < out.size(); ++k) {
      auto rng = make_stream(c.seed, kSlopeStreamBase + k);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      if (u(rng) >= c.slope_injection_fraction) continue;
      const double slope = (u(rng) < 0.5 ? -1.0 : 1.0) * c.slope_injection_per_mhz;
      out[k].first = inject_baseline_slope(std::move(out[k].first), slope);
      out[k].second.baseline_slope = slope;
    }
  }
  return out;
}

// ---------------------------------------------------------------- fitting --

/// Fits every spectrum. Work is spread over `threads` workers; results are
/// stored by index so the output does not depend on scheduling.
inline std::vector<io::FitRecord> fit_batch(const std::vector<Spectrum>& spectra,
                                        FitModel model = FitModel::ExpGaussianPlusSlope, const FitOptions& opt = {},
                                        unsigned threads = std::thread::hardware_concurrency()) {
  std::vector<io::FitRecord> out(spectra.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < spectra.size(); i = next++) {
      try {
        const auto fit = fit_spectrum(spectra[i], model, std::nullopt, opt);
        out[i] = io::FitRecord::from_fit(spectra[i].header, fit);
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          const std::string msg = "spectrum '" + spectra[i].header.id + "': " + e.what();
          if (dynamic_cast<const DataError*>(&e))
            failure = std::make_exception_ptr(DataError(msg));
          else if (dynamic_cast<const DomainError*>(&e))
            failure = std::make_exception_ptr(DomainError(msg));
          else
            failure = std::current_exception();
        }
      }
    }
  };
  threads = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(std::max<std::size_t>(spectra.size(), 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline std::vector<WidthPoint> width_points(const std::vector<io::FitRecord>& records) {
  std::vector<WidthPoint> pts;
  pts.reserve(records.size());
  for (const auto& r : records) {
    const double floor = 4.0 * std::numeric_limits<double>::epsilon() * r.params.delta;
    pts.push_back({r.params.peak_depth, r.params.delta, std::max(r.sigmas.delta, floor), r.params.baseline_slope,
                   r.sigmas.baseline_slope, r.source_id});
  }
  return pts;
}

// ------------------------------------------------------------ extrapolation --

struct SeriesSummary {
  ExtrapolationResult extrapolation;
  double threshold_slope = 0.0;
  std::string threshold_rule;  // "fixed" or "3x median slope sigma"
  std::size_t n_unconverged = 0;
  std::string label;
  double nu0_mhz = 0.0;
  double mass_u = 0.0;
  TemperatureReading temperature{0.0, 0.0};
  std::string model;
  std::vector<WidthPoint> kept;
  std::vector<WidthPoint> rejected;
};

/// Drops unconverged fits, applies the slope filter and extrapolates.
inline SeriesSummary analyze_series(const std::vector<io::FitRecord>& records, std::optional<double> threshold) {
  if (records.empty()) throw DataError("no fit records");
  const auto& first = records.front();
  std::vector<io::FitRecord> usable;
  SeriesSummary s;
  for (const auto& r : records) {
    if (r.label != first.label || r.nu0_abs_mhz != first.nu0_abs_mhz || r.mass_u != first.mass_u)
      throw DataError("fit records mix different transitions ('" + first.source_id + "' vs '" + r.source_id + "')");
    if (r.temperature_k != first.temperature_k || r.temperature_sigma_k != first.temperature_sigma_k)
      throw DataError("fit records mix different cell temperatures");
    if (r.model != first.model) throw DataError("fit records mix different fit models");
    if (r.converged)
      usable.push_back(r);
    else
      ++s.n_unconverged;
  }
  if (usable.empty()) throw DataError("no usable spectra: no fit converged");
  const auto points = width_points(usable);
  if (threshold) {
    s.threshold_slope = *threshold;
    s.threshold_rule = "fixed";
  } else {
    s.threshold_slope = default_slope_threshold(points);
    s.threshold_rule = "3x median slope sigma";
  }
  auto part = filter_by_slope(points, s.threshold_slope);
  s.extrapolation = zero_pressure_width(part.kept, part.rejected.size());
  s.kept = std::move(part.kept);
  s.rejected = std::move(part.rejected);
  s.label = first.label;
  s.nu0_mhz = first.nu0_abs_mhz;
  s.mass_u = first.mass_u;
  s.temperature = {first.temperature_k, first.temperature_sigma_k};
  s.model = std::string(to_string(first.model));
  return s;
}

inline json to_json(const SeriesSummary& s) {
  const auto& e = s.extrapolation;
  json j;
  j["schema_version"] = io::kSchemaVersion;
  j["model"] = s.model;
  j["transition"] = {{"label", s.label}, {"nu0_mhz", s.nu0_mhz}, {"mass_u", s.mass_u}};
  j["temperature"] = {{"value_k", s.temperature.value}, {"sigma_k", s.temperature.sigma}};
  j["threshold_slope"] = s.threshold_slope;
  j["threshold_rule"] = s.threshold_rule;
  j["n_used"] = e.n_used;
  j["n_rejected"] = e.n_rejected;
  j["n_unconverged"] = s.n_unconverged;
  j["delta_d_mhz"] = e.delta_d;
  j["delta_d_sigma_mhz"] = e.delta_d_sigma;
  j["slope_mhz_per_amplitude"] = e.slope;
  j["slope_sigma"] = e.slope_sigma;
  j["chi2_reduced"] = e.chi2_reduced;
  j["sigma_inflated"] = e.sigma_inflated;
  j["unweighted_delta_d_mhz"] = e.unweighted_delta_d;
  j["unweighted_delta_d_sigma_mhz"] = e.unweighted_delta_d_sigma;
  j["report_unweighted"] = e.report_unweighted;
  return j;
}

/// The inputs of the kB stage, as read back from a summary file.
struct WidthSummary {
  double delta_d_mhz = 0.0;
  double delta_d_sigma_mhz = 0.0;
  Transition transition;
  TemperatureReading temperature{0.0, 0.0};
};

inline WidthSummary width_summary_from_json(const json& j) {
  try {
    WidthSummary w;
    w.delta_d_mhz = j.at("delta_d_mhz").get<double>();
    w.delta_d_sigma_mhz = j.at("delta_d_sigma_mhz").get<double>();
    const auto& t = j.at("transition");
    w.transition = Transition::from_mass_u(t.at("nu0_mhz").get<double>(), t.at("mass_u").get<double>(),
                                           t.at("label").get<std::string>());
    const auto& tt = j.at("temperature");
    w.temperature = {tt.at("value_k").get<double>(), tt.at("sigma_k").get<double>()};
    w.temperature.validate();
    return w;
  } catch (const json::exception& e) {
    throw DataError(std::string("summary: ") + e.what());
  } catch (const DomainError& e) {
    throw DataError(std::string("summary: ") + e.what());
  }
}

inline WidthSummary width_summary(const SeriesSummary& s) {
  return width_summary_from_json(to_json(s));
}

/// Plot-ready (amplitude, width, sigma) table, kept and rejected points.
inline std::string format_width_table(const SeriesSummary& s) {
  std::ostringstream o;
  o << "# zero-pressure extrapolation: width = delta_d + slope * amplitude\n";
  o << "# delta_d_mhz = " << io::format_double(s.extrapolation.delta_d) << '\n';
  o << "# delta_d_sigma_mhz = " << io::format_double(s.extrapolation.delta_d_sigma) << '\n';
  o << "# slope_mhz_per_amplitude = " << io::format_double(s.extrapolation.slope) << '\n';
  o << "amplitude\twidth_mhz\twidth_sigma_mhz\tbaseline_slope\tkept\tsource_id\n";
  auto row = [&](const WidthPoint& p, int kept) {
    o << io::format_double(p.amplitude) << '\t' << io::format_double(p.width) << '\t'
      << io::format_double(p.width_sigma) << '\t' << io::format_double(p.baseline_slope) << '\t' << kept << '\t'
      << p.source_id << '\n';
  };
  for (const auto& p : s.kept) row(p, 1);
  for (const auto& p : s.rejected) row(p, 0);
  return o.str();
}

// -------------------------------------------------------------- Boltzmann --

inline BoltzmannResult boltzmann_from_summary(const WidthSummary& w, double mass_rel_sigma, double frequency_rel_sigma) {
  return uncertainty_budget({w.delta_d_mhz, w.delta_d_sigma_mhz},
                            {w.transition.mass_kg, mass_rel_sigma * w.transition.mass_kg},
                            {w.transition.nu0_mhz, frequency_rel_sigma * w.transition.nu0_mhz}, w.temperature);
}

inline json to_json(const BoltzmannResult& r) {
  json j;
  j["kb_j_per_k"] = r.kb;
  j["sigma_kb_j_per_k"] = r.sigma_kb;
  j["relative_sigma"] = r.relative_sigma();
  json b = json::array();
  for (const auto& item : r.budget) b.push_back({{"source", item.source}, {"relative", item.relative}});
  j["budget"] = b;
  return j;
}

inline std::string format_budget_table(const BoltzmannResult& r) {
  std::ostringstream o;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-14s %14s\n", "source", "relative");
  o << buf;
  for (const auto& item : r.budget) {
    std::snprintf(buf, sizeof buf, "%-14s %14.3e\n", item.source.c_str(), item.relative);
    o << buf;
  }
  std::snprintf(buf, sizeof buf, "%-14s %14.3e\n", "combined", r.relative_sigma());
  o << buf;
  std::snprintf(buf, sizeof buf, "kB = %.8e J/K +- %.3e J/K\n", r.kb, r.sigma_kb);
  o << buf;
  return o.str();
}

}  // namespace dbt
