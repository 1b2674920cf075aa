#pragma once

// Independent oracles shared by the unit and acceptance suites. None of them
// call into the library's line-shape code.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

namespace oracle {

// Unit-peak Gaussian convolved with the area-normalised Lorentzian, by
// adaptive Gauss-Kronrod on a truncated window split at the Lorentzian peak.
inline double voigt_quadrature(double x, double delta, double gamma) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double t) {
    const double g = (x - t) / delta;
    return std::exp(-g * g) * gamma / (std::numbers::pi * (t * t + gamma * gamma));
  };
  const double lo = x - 12.0 * delta, hi = x + 12.0 * delta;
  // Break points around t = 0 so a narrow Lorentzian is resolved.
  std::vector<double> cuts{lo};
  for (double c : {-50.0 * gamma, -gamma, 0.0, gamma, 50.0 * gamma})
    if (c > lo && c < hi) cuts.push_back(c);
  cuts.push_back(hi);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    sum += gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1], 15, 1e-14);
  return sum;
}

// Optical depth of a component list, summed directly from exp(-(x/D)^2).
inline double hyperfine_depth(double nu, double delta, double depth, const std::vector<std::pair<double, double>>& comps) {
  long double s = 0.0L;
  for (const auto& [off, w] : comps) {
    const long double u = (static_cast<long double>(nu) - off) / delta;
    s += static_cast<long double>(w) * std::exp(-u * u);
  }
  return static_cast<double>(depth * s);
}

// Least-squares Gaussian width for a sampled profile y(x): the amplitude is
// solved linearly for each trial width, the width by Brent minimisation.
template <class Profile>
double gaussian_fit_width(Profile&& y, double span, double step, double guess) {
  std::vector<double> xs, ys;
  for (double x = -span / 2; x <= span / 2 + 1e-9; x += step) {
    xs.push_back(x);
    ys.push_back(y(x));
  }
  auto cost = [&](double d) {
    double gy = 0, gg = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double g = std::exp(-(xs[i] / d) * (xs[i] / d));
      gy += g * ys[i];
      gg += g * g;
    }
    const double a = gy / gg;
    double r = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double e = ys[i] - a * std::exp(-(xs[i] / d) * (xs[i] / d));
      r += e * e;
    }
    return r;
  };
  return boost::math::tools::brent_find_minima(cost, 0.8 * guess, 1.25 * guess, 52).first;
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("dbt-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace oracle
