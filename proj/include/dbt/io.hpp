#pragma once

// Text file formats: spectrum files and fit-record tables.
//
// Spectrum file:
//   # dbt-spectrum
//   # key = value            (header; every field in kSpectrumHeaderFields)
//   frequency_offset_mhz	transmission
//   <offset>	<transmission>  (one row per sample, offsets strictly increasing)
//
// Numbers are written with 17 significant digits so a write/read round trip
// reproduces every double exactly.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "dbt/error.hpp"
#include "dbt/fitter.hpp"
#include "dbt/spectrum.hpp"

namespace dbt::io {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kSpectrumMagic = "# dbt-spectrum";
inline constexpr std::string_view kFitsMagic = "# dbt-fits";

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  // Shortest text that reads back to the same bits.
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Parses a whole token as a double; accepts "inf"/"-inf"/"nan".
inline bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size() && !tok.empty();
}

inline bool parse_u64(std::string_view tok, std::uint64_t& out) {
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size() && !tok.empty();
}

/// Writes `content` to `path` through a temporary file and a rename, so
/// readers never observe a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- spectra --

inline constexpr std::string_view kSpectrumHeaderFields[] = {
    "schema_version", "id", "transition_label", "nu0_mhz", "mass_u", "temperature_k", "temperature_sigma_k",
    "pressure_pa", "cell_length_m", "span_mhz", "step_mhz", "center_mhz", "time_constant_ms", "snr", "seed"};

inline std::string format_spectrum(const Spectrum& s) {
  s.validate();
  const auto& h = s.header;
  std::ostringstream o;
  o << kSpectrumMagic << '\n';
  auto kv = [&](std::string_view k, const std::string& v) { o << "# " << k << " = " << v << '\n'; };
  kv("schema_version", std::to_string(h.schema_version));
  kv("id", h.id);
  kv("transition_label", h.label);
  kv("nu0_mhz", format_double(h.nu0_mhz));
  kv("mass_u", format_double(h.mass_u));
  kv("temperature_k", format_double(h.temperature_k));
  kv("temperature_sigma_k", format_double(h.temperature_sigma_k));
  kv("pressure_pa", format_double(h.pressure_pa));
  kv("cell_length_m", format_double(h.cell_length_m));
  kv("span_mhz", format_double(h.scan.span_mhz));
  kv("step_mhz", format_double(h.scan.step_mhz));
  kv("center_mhz", format_double(h.scan.center_mhz));
  kv("time_constant_ms", format_double(h.scan.time_constant_ms));
  kv("snr", format_double(h.scan.snr));
  kv("seed", std::to_string(h.seed));
  o << "frequency_offset_mhz\ttransmission\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    o << format_double(s.offset_mhz[i]) << '\t' << format_double(s.transmission[i]) << '\n';
  return o.str();
}

inline Spectrum parse_spectrum(std::istream& in, const std::string& name = {}) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || trim(line) != kSpectrumMagic)
    throw ParseError(name, 1, "not a spectrum file (expected '" + std::string(kSpectrumMagic) + "')");
  ++lineno;

  std::map<std::string, std::pair<std::string, std::size_t>, std::less<>> fields;
  bool columns_seen = false;
  Spectrum s;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!columns_seen && t.front() == '#') {
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ParseError(name, lineno, "malformed header line (expected '# key = value')");
      std::string key = trim(std::string_view(t).substr(1, eq - 1));
      std::string value = trim(std::string_view(t).substr(eq + 1));
      bool known = false;
      for (auto f : kSpectrumHeaderFields) known = known || f == key;
      if (!known) throw ParseError(name, lineno, "unknown header field '" + key + "'");
      if (fields.count(key)) throw ParseError(name, lineno, "duplicate header field '" + key + "'");
      fields[key] = {value, lineno};
      continue;
    }
    if (!columns_seen) {
      std::istringstream cols(t);
      std::string a, b, extra;
      cols >> a >> b;
      if (a != "frequency_offset_mhz" || b != "transmission" || (cols >> extra))
        throw ParseError(name, lineno, "expected column header 'frequency_offset_mhz transmission'");
      columns_seen = true;
      continue;
    }
    std::istringstream row(t);
    std::string a, b, extra;
    double f = 0.0, tr = 0.0;
    if (!(row >> a >> b) || (row >> extra) || !parse_double(a, f) || !parse_double(b, tr))
      throw ParseError(name, lineno, "malformed data row (expected two numbers)");
    if (!std::isfinite(f) || !std::isfinite(tr)) throw ParseError(name, lineno, "non-finite value in data row");
    if (!s.offset_mhz.empty() && !(f > s.offset_mhz.back()))
      throw ParseError(name, lineno, "frequency grid not strictly increasing");
    s.offset_mhz.push_back(f);
    s.transmission.push_back(tr);
  }
  if (!columns_seen) throw ParseError(name, lineno, "missing column header");
  for (auto f : kSpectrumHeaderFields)
    if (!fields.count(f)) throw ParseError(name, 0, "missing header field '" + std::string(f) + "'");

  auto num = [&](std::string_view key) {
    const auto& [v, ln] = fields.find(key)->second;
    double x = 0.0;
    if (!parse_double(v, x)) throw ParseError(name, ln, "field '" + std::string(key) + "' is not a number");
    return x;
  };
  auto& h = s.header;
  const auto& [sv, sv_line] = fields.find("schema_version")->second;
  std::uint64_t version = 0;
  if (!parse_u64(sv, version) || version != static_cast<std::uint64_t>(kSchemaVersion))
    throw ParseError(name, sv_line, "unsupported schema_version '" + sv + "'");
  h.schema_version = kSchemaVersion;
  h.id = fields.find("id")->second.first;
  h.label = fields.find("transition_label")->second.first;
  h.nu0_mhz = num("nu0_mhz");
  h.mass_u = num("mass_u");
  h.temperature_k = num("temperature_k");
  h.temperature_sigma_k = num("temperature_sigma_k");
  h.pressure_pa = num("pressure_pa");
  h.cell_length_m = num("cell_length_m");
  h.scan.span_mhz = num("span_mhz");
  h.scan.step_mhz = num("step_mhz");
  h.scan.center_mhz = num("center_mhz");
  h.scan.time_constant_ms = num("time_constant_ms");
  h.scan.snr = num("snr");
  const auto& [seed, seed_line] = fields.find("seed")->second;
  if (!parse_u64(seed, h.seed)) throw ParseError(name, seed_line, "field 'seed' is not an unsigned integer");
  if (s.size() < 2) throw ParseError(name, lineno, "spectrum has fewer than 2 samples");
  return s;
}

inline void write_spectrum(const Spectrum& s, const std::filesystem::path& path) {
  atomic_write(path, format_spectrum(s));
}

inline Spectrum read_spectrum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open spectrum file " + path.string());
  return parse_spectrum(in, path.string());
}

// ------------------------------------------------------------ fit records --

/// One fitted spectrum together with the metadata needed downstream.
struct FitRecord {
  std::string source_id;
  std::string label;
  double nu0_abs_mhz = 0.0;
  double mass_u = 0.0;
  double temperature_k = 0.0;
  double temperature_sigma_k = 0.0;
  double pressure_pa = 0.0;
  FitModel model = FitModel::ExpGaussianPlusSlope;
  bool converged = false;
  int n_iter = 0;
  double chi2_reduced = 0.0;
  LineParams params;
  LineParams sigmas;

  static FitRecord from_fit(const SpectrumHeader& h, const FitResult& f) {
    FitRecord r;
    r.source_id = h.id;
    r.label = h.label;
    r.nu0_abs_mhz = h.nu0_mhz;
    r.mass_u = h.mass_u;
    r.temperature_k = h.temperature_k;
    r.temperature_sigma_k = h.temperature_sigma_k;
    r.pressure_pa = h.pressure_pa;
    r.model = f.model;
    r.converged = f.converged;
    r.n_iter = f.n_iter;
    r.chi2_reduced = f.chi2_reduced;
    r.params = f.params;
    r.sigmas = {f.sigma(kNu0), f.sigma(kDelta), f.sigma(kDepth), f.sigma(kLevel), f.sigma(kSlope),
                f.model == FitModel::ExpVoigtPlusSlope ? f.sigma(kGamma) : 0.0};
    return r;
  }
};

inline constexpr std::string_view kFitColumns[] = {
    "source_id",      "label",          "nu0_abs_mhz",          "mass_u",        "temperature_k",
    "temperature_sigma_k", "pressure_pa", "model",             "converged",     "n_iter",
    "chi2_reduced",   "nu0",            "nu0_sigma",            "delta",         "delta_sigma",
    "peak_depth",     "peak_depth_sigma", "baseline_level",     "baseline_level_sigma", "baseline_slope",
    "baseline_slope_sigma", "gamma",    "gamma_sigma"};

inline std::string fit_options_description(const FitOptions& o) {
  std::ostringstream s;
  s << "unweighted least squares; damped Gauss-Newton; stop when relative cost change < "
    << format_double(o.relative_cost_tolerance) << " or scaled gradient max-norm < " << format_double(o.gradient_tolerance)
    << "; max " << o.max_iterations << " iterations";
  return s.str();
}

inline std::string format_fit_records(const std::vector<FitRecord>& records, const FitOptions& opt = {}) {
  std::ostringstream o;
  o << kFitsMagic << '\n';
  o << "# schema_version = " << kSchemaVersion << '\n';
  o << "# fit_method = " << fit_options_description(opt) << '\n';
  for (std::size_t i = 0; i < std::size(kFitColumns); ++i) o << (i ? "\t" : "") << kFitColumns[i];
  o << '\n';
  for (const auto& r : records) {
    const auto& p = r.params;
    const auto& e = r.sigmas;
    o << r.source_id << '\t' << r.label << '\t' << format_double(r.nu0_abs_mhz) << '\t' << format_double(r.mass_u) << '\t'
      << format_double(r.temperature_k) << '\t' << format_double(r.temperature_sigma_k) << '\t'
      << format_double(r.pressure_pa) << '\t' << to_string(r.model) << '\t' << (r.converged ? 1 : 0) << '\t' << r.n_iter
      << '\t' << format_double(r.chi2_reduced) << '\t' << format_double(p.nu0) << '\t' << format_double(e.nu0) << '\t'
      << format_double(p.delta) << '\t' << format_double(e.delta) << '\t' << format_double(p.peak_depth) << '\t'
      << format_double(e.peak_depth) << '\t' << format_double(p.baseline_level) << '\t'
      << format_double(e.baseline_level) << '\t' << format_double(p.baseline_slope) << '\t'
      << format_double(e.baseline_slope) << '\t' << format_double(p.gamma) << '\t' << format_double(e.gamma) << '\n';
  }
  return o.str();
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

}  // namespace detail

inline std::vector<FitRecord> parse_fit_records(std::istream& in, const std::string& name = {}) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || trim(line) != kFitsMagic)
    throw ParseError(name, 1, "not a fit-record file (expected '" + std::string(kFitsMagic) + "')");
  ++lineno;
  bool columns_seen = false;
  std::vector<FitRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (!columns_seen && line.front() == '#') continue;
    auto cells = detail::split_tabs(line);
    if (!columns_seen) {
      bool ok = cells.size() == std::size(kFitColumns);
      for (std::size_t i = 0; ok && i < cells.size(); ++i) ok = cells[i] == kFitColumns[i];
      if (!ok) throw ParseError(name, lineno, "unexpected fit-record column header");
      columns_seen = true;
      continue;
    }
    if (cells.size() != std::size(kFitColumns))
      throw ParseError(name, lineno, "expected " + std::to_string(std::size(kFitColumns)) + " tab-separated fields");
    std::vector<double> v(cells.size(), 0.0);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == 0 || i == 1 || i == 7) continue;
      if (!parse_double(cells[i], v[i]))
        throw ParseError(name, lineno, "field '" + std::string(kFitColumns[i]) + "' is not a number");
    }
    FitRecord r;
    r.source_id = cells[0];
    r.label = cells[1];
    r.nu0_abs_mhz = v[2];
    r.mass_u = v[3];
    r.temperature_k = v[4];
    r.temperature_sigma_k = v[5];
    r.pressure_pa = v[6];
    try {
      r.model = fit_model_from_string(cells[7]);
    } catch (const DomainError& e) {
      throw ParseError(name, lineno, e.what());
    }
    r.converged = v[8] != 0.0;
    r.n_iter = static_cast<int>(v[9]);
    r.chi2_reduced = v[10];
    r.params = {v[11], v[13], v[15], v[17], v[19], v[21]};
    r.sigmas = {v[12], v[14], v[16], v[18], v[20], v[22]};
    out.push_back(std::move(r));
  }
  if (!columns_seen) throw ParseError(name, lineno, "missing column header");
  return out;
}

inline void write_fit_records(const std::vector<FitRecord>& records, const std::filesystem::path& path,
                              const FitOptions& opt = {}) {
  atomic_write(path, format_fit_records(records, opt));
}

inline std::vector<FitRecord> read_fit_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fit-record file " + path.string());
  return parse_fit_records(in, path.string());
}

}  // namespace dbt::io
