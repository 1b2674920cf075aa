#pragma once

// Faddeeva function w(z) = exp(-z^2) erfc(-iz).
//
// Evaluation follows Gautschi's scheme as refined by Poppe and Wijers (ACM
// TOMS 680): a power series times exp(-z^2) close to the origin, and a
// truncated Laplace continued fraction with Taylor acceleration elsewhere.
// Roughly 14 significant digits in the upper half plane.

#include <cmath>
#include <complex>

namespace dbt::faddeeva {

namespace detail {

// Upper half plane, x >= 0, y >= 0.
inline std::complex<double> w_first_quadrant(double xabs, double yabs) {
  constexpr double two_over_sqrt_pi = 1.12837916709551257388;

  const double xs = xabs / 6.3;
  const double ys = yabs / 4.4;
  double qrho = xs * xs + ys * ys;
  const double xquad = xabs * xabs - yabs * yabs;
  const double yquad = 2.0 * xabs * yabs;

  if (qrho < 0.085264) {
    // Power series for erfc-type sum, then multiply by exp(-z^2).
    qrho = (1.0 - 0.85 * ys) * std::sqrt(qrho);
    const int n_terms = static_cast<int>(std::lround(6.0 + 72.0 * qrho));
    int j = 2 * n_terms + 1;
    double xsum = 1.0 / j;
    double ysum = 0.0;
    for (int i = n_terms; i >= 1; --i) {
      j -= 2;
      const double xaux = (xsum * xquad - ysum * yquad) / i;
      ysum = (xsum * yquad + ysum * xquad) / i;
      xsum = xaux + 1.0 / j;
    }
    const double u1 = -two_over_sqrt_pi * (xsum * yabs + ysum * xabs) + 1.0;
    const double v1 = two_over_sqrt_pi * (xsum * xabs - ysum * yabs);
    const double daux = std::exp(-xquad);
    const double u2 = daux * std::cos(yquad);
    const double v2 = -daux * std::sin(yquad);
    return {u1 * u2 - v1 * v2, u1 * v2 + v1 * u2};
  }

  double h = 0.0;
  int kapn = 0;
  int nu = 0;
  if (qrho > 1.0) {
    qrho = std::sqrt(qrho);
    nu = static_cast<int>(3.0 + 1442.0 / (26.0 * qrho + 77.0));
  } else {
    qrho = (1.0 - ys) * std::sqrt(1.0 - qrho);
    h = 1.88 * qrho;
    kapn = static_cast<int>(std::lround(7.0 + 34.0 * qrho));
    nu = static_cast<int>(std::lround(16.0 + 26.0 * qrho));
  }
  const bool accelerate = h > 0.0;
  const double h2 = 2.0 * h;
  double qlambda = accelerate ? std::pow(h2, kapn) : 0.0;

  double rx = 0.0, ry = 0.0, sx = 0.0, sy = 0.0;
  for (int n = nu; n >= 0; --n) {
    const double np1 = n + 1.0;
    double tx = yabs + h + np1 * rx;
    const double ty = xabs - np1 * ry;
    const double c = 0.5 / (tx * tx + ty * ty);
    rx = c * tx;
    ry = c * ty;
    if (accelerate && n <= kapn) {
      tx = qlambda + sx;
      sx = rx * tx - ry * sy;
      sy = ry * tx + rx * sy;
      qlambda /= h2;
    }
  }
  double u = accelerate ? two_over_sqrt_pi * sx : two_over_sqrt_pi * rx;
  const double v = accelerate ? two_over_sqrt_pi * sy : two_over_sqrt_pi * ry;
  if (yabs == 0.0) u = std::exp(-xabs * xabs);
  return {u, v};
}

}  // namespace detail

/// w(z) for Im z >= 0. The lower half plane is not needed by any line shape
/// here and is rejected by the callers.
inline std::complex<double> w(std::complex<double> z) {
  const auto q = detail::w_first_quadrant(std::abs(z.real()), z.imag());
  return z.real() < 0.0 ? std::complex<double>(q.real(), -q.imag()) : q;
}

/// dw/dz = -2 z w(z) + 2i/sqrt(pi).
inline std::complex<double> w_derivative(std::complex<double> z, std::complex<double> wz) {
  constexpr double two_over_sqrt_pi = 1.12837916709551257388;
  return -2.0 * z * wz + std::complex<double>(0.0, two_over_sqrt_pi);
}

}  // namespace dbt::faddeeva
