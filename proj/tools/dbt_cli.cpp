// dbt: command-line pipeline for Doppler-width thermometry.
//
//   dbt simulate --config c.json --out DIR [--seed N] [--no-noise]
//   dbt fit      [--config c.json] [--model exp-gaussian|exp-voigt] --out fits.tsv SPECTRA...
//   dbt series   [--config c.json] [--threshold-slope X] --out summary.json fits.tsv
//   dbt kb       --out kb.json summary.json
//   dbt budget   [--config c.json] --out budget.json summary.json
//   dbt reproduce-paper
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 non-convergence.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dbt/dbt.hpp"

namespace fs = std::filesystem;
using dbt::json;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNonConvergence = 3 };

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

int report_error(const char* kind, int code, const std::string& message) {
  std::cerr << "error kind=" << kind << " code=" << code << " message=\"" << escape(message) << "\"\n";
  return code;
}

struct Context {
  std::vector<std::string> argv;
  std::string config_path;
  std::optional<dbt::CampaignConfig> config;

  const dbt::CampaignConfig* load() {
    if (!config && !config_path.empty()) config = dbt::load_config(config_path);
    return config ? &*config : nullptr;
  }

  fs::path config_dir() const { return config_path.empty() ? fs::path{} : fs::path(config_path).parent_path(); }
};

void write_manifest(const fs::path& path, std::string_view sub, const Context& ctx,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  const json m = dbt::make_manifest(sub, ctx.argv, ctx.config, inputs, outputs);
  dbt::io::atomic_write(path, m.dump(2) + "\n");
}

fs::path manifest_for(const fs::path& out) {
  fs::path m = out;
  m += ".manifest.json";
  return m;
}

std::vector<std::string> expand_inputs(const std::vector<std::string>& args) {
  std::vector<std::string> files;
  for (const auto& a : args) {
    if (fs::is_directory(a)) {
      std::vector<std::string> dir;
      for (const auto& e : fs::directory_iterator(a))
        if (e.is_regular_file() && e.path().extension() == ".txt") dir.push_back(e.path().string());
      std::sort(dir.begin(), dir.end());
      files.insert(files.end(), dir.begin(), dir.end());
    } else {
      files.push_back(a);
    }
  }
  if (files.empty()) throw dbt::DataError("no input spectra");
  return files;
}

// ----------------------------------------------------------------------------

int cmd_simulate(Context& ctx, std::optional<std::uint64_t> seed, const std::string& out, bool no_noise) {
  if (ctx.config_path.empty()) throw CLI::RequiredError("--config");
  auto cfg = *ctx.load();
  if (seed) cfg.seed = *seed;
  if (no_noise) cfg.snr = std::numeric_limits<double>::infinity();
  ctx.config = cfg;

  const auto sims = dbt::simulate_campaign(cfg, ctx.config_dir());
  const fs::path dir(out);
  const fs::path spectra_dir = dir / cfg.output.spectra_dir;
  std::vector<std::string> outputs;
  std::ostringstream truth;
  truth << "source_id\tpressure_pa\tkb_true\tdelta_d_true_mhz\tgamma_mhz\tpeak_depth\tbaseline_slope\n";
  for (const auto& [spectrum, t] : sims) {
    const fs::path p = spectra_dir / (spectrum.header.id + ".txt");
    dbt::io::write_spectrum(spectrum, p);
    outputs.push_back(p.string());
    truth << spectrum.header.id << '\t' << dbt::io::format_double(t.pressure_pa) << '\t'
          << dbt::io::format_double(t.kb_true) << '\t' << dbt::io::format_double(t.delta_d_true) << '\t'
          << dbt::io::format_double(t.gamma) << '\t' << dbt::io::format_double(t.peak_depth) << '\t'
          << dbt::io::format_double(t.baseline_slope) << '\n';
  }
  dbt::io::atomic_write(dir / "truth.tsv", truth.str());
  outputs.push_back((dir / "truth.tsv").string());
  write_manifest(dir / "manifest.json", "simulate", ctx, {ctx.config_path}, outputs);
  std::cout << "simulated " << sims.size() << " spectra into " << spectra_dir.string() << "\n";
  return kOk;
}

int cmd_fit(Context& ctx, const std::vector<std::string>& inputs, std::optional<std::string> model_flag,
            const std::string& out) {
  const auto* cfg = ctx.load();
  dbt::FitModel model = cfg ? cfg->model : dbt::FitModel::ExpGaussianPlusSlope;
  if (model_flag) model = dbt::fit_model_from_string(*model_flag);

  const auto files = expand_inputs(inputs);
  std::vector<dbt::Spectrum> spectra;
  spectra.reserve(files.size());
  for (const auto& f : files) spectra.push_back(dbt::io::read_spectrum(f));

  const dbt::FitOptions opt;
  const auto records = dbt::fit_batch(spectra, model, opt);
  dbt::io::write_fit_records(records, out, opt);
  write_manifest(manifest_for(out), "fit", ctx, files, {out});

  const auto unconverged = std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.converged; });
  std::cout << "fitted " << records.size() << " spectra (" << dbt::to_string(model) << "), " << unconverged
            << " not converged -> " << out << "\n";
  if (unconverged > 0)
    return report_error("non-convergence", kNonConvergence,
                        std::to_string(unconverged) + " fit(s) did not converge; records are flagged in " + out);
  return kOk;
}

int cmd_series(Context& ctx, const std::string& fits, std::optional<double> threshold, const std::string& out) {
  const auto* cfg = ctx.load();
  if (!threshold && cfg && cfg->threshold_slope) threshold = cfg->threshold_slope;
  const auto records = dbt::io::read_fit_records(fits);
  const auto summary = dbt::analyze_series(records, threshold);

  const fs::path out_path(out);
  fs::path table = out_path.parent_path() / (cfg ? cfg->output.table : std::string("widths.tsv"));
  dbt::io::atomic_write(out_path, dbt::to_json(summary).dump(2) + "\n");
  dbt::io::atomic_write(table, dbt::format_width_table(summary));
  write_manifest(manifest_for(out_path), "series", ctx, {fits}, {out, table.string()});

  const auto& e = summary.extrapolation;
  std::printf("zero-pressure width %.7f +- %.7f MHz (rel %.2e), slope %.5f MHz/amplitude, chi2_red %.3f\n", e.delta_d,
              e.delta_d_sigma, e.delta_d_sigma / e.delta_d, e.slope, e.chi2_reduced);
  std::printf("used %zu spectra, rejected %zu by |slope| > %.3e (%s), %zu unconverged\n", e.n_used, e.n_rejected,
              summary.threshold_slope, summary.threshold_rule.c_str(), summary.n_unconverged);
  if (e.sigma_inflated) std::printf("uncertainties inflated by sqrt(chi2_red)\n");
  if (e.report_unweighted)
    std::printf("unweighted intercept %.7f +- %.7f MHz differs by more than 0.1 sigma\n", e.unweighted_delta_d,
                e.unweighted_delta_d_sigma);
  return kOk;
}

dbt::WidthSummary read_summary(const std::string& path) {
  try {
    return dbt::width_summary_from_json(json::parse(dbt::io::read_file(path)));
  } catch (const json::parse_error& e) {
    throw dbt::DataError(path + ": " + e.what());
  }
}

int cmd_kb(Context& ctx, const std::string& summary_path, const std::string& out) {
  const auto w = read_summary(summary_path);
  const double kb = dbt::kb_from_width(dbt::GaussianWidth(w.delta_d_mhz), w.transition, w.temperature.value);
  json j{{"kb_j_per_k", kb},
         {"delta_d_mhz", w.delta_d_mhz},
         {"nu0_mhz", w.transition.nu0_mhz},
         {"mass_u", w.transition.mass_u},
         {"temperature_k", w.temperature.value}};
  if (!out.empty()) {
    dbt::io::atomic_write(out, j.dump(2) + "\n");
    write_manifest(manifest_for(out), "kb", ctx, {summary_path}, {out});
  }
  std::printf("kB = %.8e J/K  (delta_d %.7f MHz, T %.3f K)\n", kb, w.delta_d_mhz, w.temperature.value);
  return kOk;
}

int cmd_budget(Context& ctx, const std::string& summary_path, const std::string& out) {
  const auto* cfg = ctx.load();
  const double mass_rel = cfg ? cfg->mass_rel_sigma : dbt::constants::kMassRelSigma;
  const double freq_rel = cfg ? cfg->frequency_rel_sigma : dbt::constants::kFrequencyRelSigma;
  const auto w = read_summary(summary_path);
  const auto r = dbt::boltzmann_from_summary(w, mass_rel, freq_rel);
  if (!out.empty()) {
    dbt::io::atomic_write(out, dbt::to_json(r).dump(2) + "\n");
    write_manifest(manifest_for(out), "budget", ctx, {summary_path}, {out});
  }
  std::cout << dbt::format_budget_table(r);
  return kOk;
}

int cmd_reproduce_paper(Context& ctx, const std::string& out) {
  namespace c = dbt::constants;
  const auto nh3 = dbt::nh3_asq63();
  const dbt::TemperatureReading t{c::kIceBathTemperature, c::kIceBathSigma};
  const auto r = dbt::uncertainty_budget({c::kPublishedDopplerWidthMHz, c::kPublishedDopplerWidthSigmaMHz},
                                         {nh3.mass_kg, c::kMassRelSigma * nh3.mass_kg},
                                         {nh3.nu0_mhz, c::kFrequencyRelSigma * nh3.nu0_mhz}, t);
  const double width_only = 2.0 * c::kPublishedDopplerWidthSigmaMHz / c::kPublishedDopplerWidthMHz;
  std::printf("inputs: delta_d = %.4f(%.0f) MHz, nu = %.0f MHz, T = %.2f(%.0f mK) K, m = %.9f u\n",
              c::kPublishedDopplerWidthMHz, c::kPublishedDopplerWidthSigmaMHz * 1e4, nh3.nu0_mhz, t.value,
              t.sigma * 1e3, nh3.mass_u);
  std::printf("k_B = %.5e J/K +- %.2e J/K, relative %.2e\n", r.kb, r.sigma_kb, r.relative_sigma());
  std::printf("published: k_B = %.5e J/K +- %.2e J/K, relative %.2e\n", c::kPublishedBoltzmann,
              c::kPublishedBoltzmannSigma, c::kPublishedBoltzmannSigma / c::kPublishedBoltzmann);
  std::printf("difference from published value: %.2e relative\n", r.kb / c::kPublishedBoltzmann - 1.0);
  std::printf("width term alone: relative %.2e (+- %.2e J/K)\n", width_only, width_only * r.kb);
  std::printf("CODATA 2002: %.7e J/K, deviation %.2e relative (%.2f combined sigma)\n", c::kBoltzmannCodata2002,
              r.kb / c::kBoltzmannCodata2002 - 1.0, (r.kb - c::kBoltzmannCodata2002) / r.sigma_kb);
  std::cout << dbt::format_budget_table(r);
  if (!out.empty()) {
    json j = dbt::to_json(r);
    j["published_kb"] = c::kPublishedBoltzmann;
    j["published_sigma_kb"] = c::kPublishedBoltzmannSigma;
    dbt::io::atomic_write(out, j.dump(2) + "\n");
    write_manifest(manifest_for(out), "reproduce-paper", ctx, {}, {out});
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.argv.assign(argv, argv + argc);

  CLI::App app{"Doppler-width thermometry: simulate, fit and extrapolate absorption spectra to the Boltzmann constant"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dbt::kToolVersion));

  std::optional<std::uint64_t> seed;
  std::string out;
  bool no_noise = false;
  std::vector<std::string> inputs;
  std::optional<std::string> model;
  std::optional<double> threshold;
  std::string positional;

  auto* sim = app.add_subcommand("simulate", "Write a synthetic pressure series of spectra");
  sim->add_option("--config", ctx.config_path, "Campaign configuration (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--seed", seed, "Override the master seed");
  sim->add_option("--out", out, "Output directory")->required();
  sim->add_flag("--no-noise", no_noise, "Disable detector noise");

  auto* fit = app.add_subcommand("fit", "Fit every spectrum and write fit records");
  fit->add_option("--config", ctx.config_path, "Campaign configuration (JSON)")->check(CLI::ExistingFile);
  fit->add_option("--model", model, "Line-shape model")->check(CLI::IsMember({"exp-gaussian", "exp-voigt"}));
  fit->add_option("--out", out, "Fit-record file")->required();
  fit->add_option("spectra", inputs, "Spectrum files or directories")->required();

  auto* series = app.add_subcommand("series", "Slope filter and zero-pressure extrapolation");
  series->add_option("--config", ctx.config_path, "Campaign configuration (JSON)")->check(CLI::ExistingFile);
  series->add_option("--threshold-slope", threshold, "Reject spectra with |baseline slope| above this (per MHz)")
      ->check(CLI::PositiveNumber);
  series->add_option("--out", out, "Regression summary (JSON)")->required();
  series->add_option("fits", positional, "Fit-record file")->required()->check(CLI::ExistingFile);

  auto* kb = app.add_subcommand("kb", "Boltzmann constant from a regression summary");
  kb->add_option("--config", ctx.config_path, "Campaign configuration (JSON)")->check(CLI::ExistingFile);
  kb->add_option("--out", out, "Result file (JSON)");
  kb->add_option("summary", positional, "Regression summary")->required()->check(CLI::ExistingFile);

  auto* budget = app.add_subcommand("budget", "Uncertainty budget from a regression summary");
  budget->add_option("--config", ctx.config_path, "Campaign configuration (JSON)")->check(CLI::ExistingFile);
  budget->add_option("--out", out, "Budget file (JSON)");
  budget->add_option("summary", positional, "Regression summary")->required()->check(CLI::ExistingFile);

  auto* paper = app.add_subcommand("reproduce-paper", "Recompute kB and its budget from the published width");
  paper->add_option("--out", out, "Result file (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", kUsage, e.what());
  }

  try {
    if (*sim) return cmd_simulate(ctx, seed, out, no_noise);
    if (*fit) return cmd_fit(ctx, inputs, model, out);
    if (*series) return cmd_series(ctx, positional, threshold, out);
    if (*kb) return cmd_kb(ctx, positional, out);
    if (*budget) return cmd_budget(ctx, positional, out);
    if (*paper) return cmd_reproduce_paper(ctx, out);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", kUsage, e.what());
  } catch (const dbt::NonConvergenceError& e) {
    return report_error("non-convergence", kNonConvergence, e.what());
  } catch (const dbt::DataError& e) {
    return report_error("data", kDataError, e.what());
  } catch (const dbt::DomainError& e) {
    return report_error("data", kDataError, e.what());
  } catch (const std::exception& e) {
    return report_error("data", kDataError, e.what());
  }
  return kUsage;
}
