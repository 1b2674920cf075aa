// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Numbers behind each verdict are printed on the same line.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dbt/dbt.hpp"
#include "../support.hpp"

using namespace dbt;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kKbTrue = constants::kBoltzmannCodata2002;

struct Verdict {
  bool pass;
  std::string detail;
};

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct CampaignOutcome {
  SeriesSummary series;
  BoltzmannResult kb;
};

CampaignOutcome run_campaign(const CampaignConfig& c) {
  const auto sims = simulate_campaign(c);
  std::vector<Spectrum> spectra;
  spectra.reserve(sims.size());
  for (const auto& s : sims) spectra.push_back(s.first);
  const auto records = fit_batch(spectra, c.model);
  auto series = analyze_series(records, c.threshold_slope);
  const auto kb = boltzmann_from_summary(width_summary(series), c.mass_rel_sigma, c.frequency_rel_sigma);
  return {std::move(series), kb};
}

// ---------------------------------------------------------------------------

Verdict c1a_kb_from_published_width() {
  const auto t0 = std::chrono::steady_clock::now();
  const double kb = kb_from_width(GaussianWidth(49.8831), nh3_asq63(), 273.15);
  const double dev = kb / 1.38065e-23 - 1.0;
  return {std::abs(dev) <= 1e-5 && seconds_since(t0) < 0.1,
          fmt("kB = %.7e J/K, deviation from 1.38065e-23 %.2e (tol 1e-5)", kb, dev)};
}

Verdict c1b_budget_from_published_terms() {
  const auto nh3 = nh3_asq63();
  const auto r = uncertainty_budget({49.8831, 9.5e-5 * 49.8831}, {nh3.mass_kg, 0.0}, {nh3.nu0_mhz, 0.0},
                                    {273.15, 7e-5 * 273.15});
  // Two significant digits: the combined value must round to 1.9e-4.
  const double combined = r.relative_sigma();
  const bool pass = std::abs(combined - 1.9e-4) <= 0.05e-4;
  return {pass, fmt("combined %.3e vs 1.9e-4 (width term %.3e, temperature %.1e; quadrature sum rounds to %.1e)",
                    combined, r.budget[0].relative, r.budget[1].relative, combined)};
}

Verdict c2_noiseless_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  CampaignConfig c;
  c.snr = kInf;
  c.kb_true = kKbTrue;
  c.model = FitModel::ExpVoigtPlusSlope;
  c.threshold_slope = 1e-6;  // default rule is meaningless without noise
  const auto voigt = run_campaign(c);
  const double dev = voigt.kb.kb / kKbTrue - 1.0;
  const double secs = seconds_since(t0);

  c.model = FitModel::ExpGaussianPlusSlope;
  const auto gauss = run_campaign(c);
  const double gdev = gauss.kb.kb / kKbTrue - 1.0;
  return {std::abs(dev) <= 1e-6 && secs < 10.0,
          fmt("exp-voigt: kB deviation %.2e (tol 1e-6), %zu spectra, %.2f s; exp-gaussian for comparison: %.2e", dev,
              voigt.series.extrapolation.n_used, secs, gdev)};
}

Verdict c3_noisy_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  CampaignConfig c;
  c.replicas = 60;
  c.snr = 1000.0;
  c.seed = 20240501;
  const auto o = run_campaign(c);
  const double secs = seconds_since(t0);
  const double z = (o.kb.kb - kKbTrue) / o.kb.sigma_kb;
  const double rel = o.kb.relative_sigma();
  // "Of order 1e-4": within a factor of 3 either side.
  const bool pass = std::abs(z) <= 3.0 && rel >= 3e-5 && rel <= 3e-4 && secs < 300.0;
  const auto& e = o.series.extrapolation;
  return {pass, fmt("kB = %.6e, deviation %.2f sigma, relative sigma %.2e, width %.5f(%.0f) MHz, "
                    "chi2_red %.2f, %zu used / %zu rejected, %.1f s",
                    o.kb.kb, z, rel, e.delta_d, e.delta_d_sigma * 1e5, e.chi2_reduced, e.n_used, e.n_rejected, secs)};
}

// Fitted Gaussian width of a noiseless line built from `model`, relative to delta.
double fitted_relative_broadening(const AbsorptionModel& model) {
  Spectrum s;
  s.offset_mhz = ScanConfig{}.grid();
  s.transmission = transmission(s.offset_mhz, model);
  const auto f = fit_spectrum(s);
  if (!f.converged) throw NonConvergenceError("broadening oracle fit did not converge");
  return f.params.delta / model.delta.value() - 1.0;
}

Verdict c4_broadening_coefficients() {
  const double D = 49.8831, depth = 0.02;
  bool pass = true;
  std::string detail = "homogeneous coeff (fit / pure-Gaussian oracle):";
  for (double r : {1e-3, 3e-3, 1e-2}) {
    AbsorptionModel m{.transition = nh3_asq63(), .delta = GaussianWidth(D), .gamma = LorentzWidth(r * D), .peak_depth = depth};
    const double coeff = fitted_relative_broadening(m) / r;
    const double ocoeff =
        (oracle::gaussian_fit_width([&](double x) { return voigt(x, GaussianWidth(D), LorentzWidth(r * D)); }, 250.0,
                                    0.5, D) /
             D -
         1.0) /
        r;
    pass = pass && std::abs(coeff / kHomogeneousBroadeningCoeff - 1.0) <= 0.10;
    detail += fmt(" %.0e: %.3f/%.3f", r, coeff, ocoeff);
  }
  detail += fmt(" (target %.3f +-10%%); doublet coeff:", kHomogeneousBroadeningCoeff);
  for (double r : {0.01, 0.03, 0.05}) {
    AbsorptionModel m{.transition = nh3_asq63(), .delta = GaussianWidth(D), .gamma = LorentzWidth(0.0), .peak_depth = depth};
    m.hyperfine = HyperfineStructure::doublet(r * D);
    const double coeff = fitted_relative_broadening(m) / (r * r);
    pass = pass && std::abs(coeff / kHyperfineBroadeningCoeff - 1.0) <= 0.10;
    detail += fmt(" %.2f: %.4f", r, coeff);
  }
  detail += fmt(" (target %.3f +-10%%)", kHyperfineBroadeningCoeff);
  return {pass, detail};
}

Verdict c5_voigt_accuracy() {
  double worst = 0.0;
  int n = 0;
  for (double delta : {0.5, 1.0, 10.0, 49.8831})
    for (double g : {1e-3, 1e-2, 0.1, 0.5, 1.0})
      for (double x : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        const double v = voigt(x * delta, GaussianWidth(delta), LorentzWidth(g * delta));
        const double o = oracle::voigt_quadrature(x * delta, delta, g * delta);
        worst = std::max(worst, std::abs(v / o - 1.0));
        ++n;
      }
  return {worst <= 1e-6 && n == 100, fmt("%d points, worst relative deviation from quadrature %.2e (tol 1e-6)", n, worst)};
}

Verdict c6_jacobian() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> c(-30, 30), d(10, 150), a(0.01, 2.5), b(0.5, 1.5), s(-2e-3, 2e-3),
      g(0.01, 20.0);
  const auto nu = ScanConfig{}.grid();
  const double scale[6] = {250.0, 50.0, 1.0, 1.0, 1.0 / 250.0, 1.0};
  double worst = 0.0;
  int draws = 0;
  for (auto m : {FitModel::ExpGaussianPlusSlope, FitModel::ExpVoigtPlusSlope}) {
    for (int k = 0; k < 100; ++k, ++draws) {
      LineParams p{c(rng), d(rng), a(rng), b(rng), s(rng), g(rng)};
      const auto an = jacobian(m, p, nu);
      for (Eigen::Index col = 0; col < an.cols(); ++col) {
        const double h = 1e-6 * scale[col];
        Eigen::VectorXd vp = p.to_vector(m), vm = vp;
        vp(col) += h;
        vm(col) -= h;
        const auto pp = LineParams::from_vector(vp), pm = LineParams::from_vector(vm);
        double err = 0.0;
        for (std::size_t i = 0; i < nu.size(); ++i) {
          const double fd = (model_value(m, pp, nu[i]) - model_value(m, pm, nu[i])) / (2.0 * h);
          err = std::max(err, std::abs(fd - an(static_cast<Eigen::Index>(i), col)));
        }
        worst = std::max(worst, err / an.col(col).cwiseAbs().maxCoeff());
      }
    }
  }
  return {worst <= 1e-6, fmt("%d draws over both models, worst column deviation %.2e relative (tol 1e-6)", draws, worst)};
}

Verdict c7_invariance() {
  // (a) amplitude rescaling of the intercept, on the width points of a real noisy campaign.
  CampaignConfig c;
  c.replicas = 2;
  c.seed = 77;
  const auto o = run_campaign(c);
  auto pts = o.series.kept;
  const auto r0 = zero_pressure_width(pts);
  double amp_dev = 0.0;
  for (double k : {1e-3, 0.5, 7.0, 1e4}) {
    auto scaled = pts;
    for (auto& p : scaled) p.amplitude *= k;
    const auto r = zero_pressure_width(scaled);
    amp_dev = std::max({amp_dev, std::abs(r.delta_d / r0.delta_d - 1.0), std::abs(r.delta_d_sigma / r0.delta_d_sigma - 1.0)});
  }

  // (b) translating the frequency axis.
  GasConditions g;
  g.pressure_pa = 1.5;
  auto s = synth_spectrum(nh3_asq63(), g, ScanConfig{}, kKbTrue, 9).first;
  const auto f0 = fit_spectrum(s);
  double shift_dev = 0.0;
  for (double shift : {-40.0, 3.3, 125.0}) {
    auto t = s;
    for (auto& x : t.offset_mhz) x += shift;
    const auto f = fit_spectrum(t);
    shift_dev = std::max({shift_dev, std::abs(f.params.delta / f0.params.delta - 1.0),
                          std::abs(f.params.nu0 - f0.params.nu0 - shift) / f0.params.delta});
  }

  // (c) covariance calibration over 200 replicas.
  std::vector<double> w, v;
  for (std::uint64_t seed = 5000; seed < 5200; ++seed) {
    const auto f = fit_spectrum(synth_spectrum(nh3_asq63(), g, ScanConfig{}, kKbTrue, seed).first);
    w.push_back(f.params.delta);
    v.push_back(f.covariance(kDelta, kDelta));
  }
  const double factor = oracle::variance(w) / oracle::mean(v);
  const bool pass = amp_dev <= 1e-12 && shift_dev <= 1e-9 && factor >= 0.5 && factor <= 2.0;
  return {pass, fmt("amplitude-scale deviation %.1e (tol 1e-12), translation deviation %.1e (tol 1e-9), "
                    "covariance calibration factor %.3f (want [0.5, 2])",
                    amp_dev, shift_dev, factor)};
}

Verdict c8_slope_filter() {
  // Each ensemble member: 8 pressures x 3 replicas at snr 1e3, half the spectra
  // carrying a baseline slope of +-1e-4 per MHz; filtered at half the injection level.
  constexpr int kMembers = 100;
  constexpr double kSlope = 1e-4;
  std::vector<double> all, kept;
  int skipped = 0;
  double mean_rejected = 0.0;
  for (int e = 0; e < kMembers; ++e) {
    CampaignConfig c;
    c.replicas = 3;
    c.seed = 900000 + static_cast<std::uint64_t>(e);
    c.slope_injection_fraction = 0.5;
    c.slope_injection_per_mhz = kSlope;
    const auto sims = simulate_campaign(c);
    std::vector<Spectrum> spectra;
    for (const auto& s : sims) spectra.push_back(s.first);
    const auto records = fit_batch(spectra, c.model);
    try {
      const auto filtered = analyze_series(records, kSlope / 2);
      const auto unfiltered = analyze_series(records, kInf);
      kept.push_back(filtered.extrapolation.delta_d);
      all.push_back(unfiltered.extrapolation.delta_d);
      mean_rejected += static_cast<double>(filtered.extrapolation.n_rejected);
    } catch (const DataError&) {
      ++skipped;  // too few spectra left to extrapolate
    }
  }
  const double sd_all = std::sqrt(oracle::variance(all)), sd_kept = std::sqrt(oracle::variance(kept));
  mean_rejected /= static_cast<double>(kept.size());
  return {sd_kept < sd_all && skipped == 0,
          fmt("spread of intercepts: filtered %.5f MHz vs unfiltered %.5f MHz over %zu members (%d skipped), "
              "mean %.1f of 24 spectra rejected, mean shift filtered-unfiltered %.5f MHz",
              sd_kept, sd_all, kept.size(), skipped, mean_rejected, oracle::mean(kept) - oracle::mean(all))};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"1a kB from published width", c1a_kb_from_published_width},
      {"1b published budget", c1b_budget_from_published_terms},
      {"2  noiseless end-to-end", c2_noiseless_recovery},
      {"3  noisy end-to-end", c3_noisy_recovery},
      {"4  broadening coefficients", c4_broadening_coefficients},
      {"5  Voigt accuracy", c5_voigt_accuracy},
      {"6  Jacobian", c6_jacobian},
      {"7  invariance suite", c7_invariance},
      {"8  slope filter", c8_slope_filter},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-28s %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
