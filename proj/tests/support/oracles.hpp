#pragma once

// Test-only reference computations. Nothing here calls into the library's
// numerical routines; they are slow, simple and independent.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

// Adaptive Gauss-Kronrod (7/15) on [a, b] to absolute tolerance tol.
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-13,
                        int depth = 0) {
  static constexpr std::array<double, 8> xk = {0.991455371120812639, 0.949107912342758525, 0.864864423359769073,
                                               0.741531185599394440, 0.586087235467691130, 0.405845151377397167,
                                               0.207784955007898468, 0.000000000000000000};
  static constexpr std::array<double, 8> wk = {0.022935322010529225, 0.063092092629978553, 0.104790010322250184,
                                               0.140653259715525919, 0.169004726639267903, 0.190350578064785410,
                                               0.204432940075298892, 0.209482141084727828};
  static constexpr std::array<double, 4> wg = {0.129484966168869693, 0.279705391489276668, 0.381830050505118945,
                                               0.417959183673469388};
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double k15 = wk[7] * f(c);
  double g7 = wg[3] * f(c);
  for (int j = 0; j < 7; ++j) {
    const double fx = f(c - h * xk[j]) + f(c + h * xk[j]);
    k15 += wk[j] * fx;
    if (j % 2 == 1) g7 += wg[j / 2] * fx;
  }
  k15 *= h;
  g7 *= h;
  if (std::abs(k15 - g7) <= tol || depth > 40) return k15;
  return integrate(f, a, c, tol / 2, depth + 1) + integrate(f, c, b, tol / 2, depth + 1);
}

inline double normal_density(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

// Phi(x) by quadrature of the density (from the nearer tail).
inline double normal_cdf(double x) {
  if (x <= 0.0) return integrate(normal_density, -40.0, x, 1e-16);
  return 1.0 - integrate(normal_density, x, 40.0, 1e-16);
}

inline double bivariate_density(double x, double y, double rho) {
  const double om = 1.0 - rho * rho;
  return std::exp(-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * om)) / (2.0 * kPi * std::sqrt(om));
}

// Phi2(a, b; rho) as a nested 2-D adaptive integral of the bivariate density
// over (-L, a] x (-L, b]. The inner range is cut to where the conditional
// density of y given x carries mass.
inline double bivariate_cdf(double a, double b, double rho, double tol = 1e-11) {
  constexpr double L = 12.0;
  const double s = std::sqrt(1.0 - rho * rho);
  const double lo_x = -L;
  const double hi_x = std::min(a, L);
  if (hi_x <= lo_x) return 0.0;
  auto inner = [&](double x) {
    const double mean = rho * x;
    const double lo = std::max(-L, mean - 10.0 * s);
    const double hi = std::min(b, mean + 10.0 * s);
    if (hi <= lo) return 0.0;
    return integrate([&](double y) { return bivariate_density(x, y, rho); }, lo, hi, tol * 1e-2);
  };
  return integrate(inner, lo_x, hi_x, tol);
}

// Closed form at the origin.
inline double bivariate_cdf_origin(double rho) { return 0.25 + std::asin(rho) / (2.0 * kPi); }

// Phi through the C library's erfc; independent of the library's own routine.
inline double phi_erfc(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Phi2(a, b; rho) = int_{-inf}^h phi(x) Phi((k - rho x) / sqrt(1 - rho^2)) dx
// with h = min(a, b), k = max(a, b). The range below h is split on a
// geometric grid and the tolerance is made relative with a second pass, so
// tiny tail probabilities come out with full relative accuracy.
inline double bivariate_cdf_1d(double a, double b, double rho) {
  const double s = std::sqrt(1.0 - rho * rho);
  const double h = std::min(a, b);
  const double k = std::max(a, b);
  auto f = [&](double y) {
    const double x = h - y;
    return normal_density(x) * 0.5 * std::erfc(-((k - rho * x) / s) / std::sqrt(2.0));
  };
  auto pass = [&](double tol) {
    double total = 0.0;
    double lo = 0.0;
    for (double hi = 1e-6; lo < 80.0; hi *= 4.0) {
      total += integrate(f, lo, std::min(hi, 80.0), tol);
      lo = hi;
    }
    return total;
  };
  const double rough = pass(1e-15);
  return rough < 1e-3 && rough > 0.0 ? pass(rough * 1e-13) : rough;
}

// Root of the increasing function f(x) - target by bisection.
inline double bisect(const std::function<double(double)>& f, double target, double lo, double hi,
                     int iters = 200) {
  for (int k = 0; k < iters; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < target) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
