#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "spr/error.hpp"

namespace spr {

namespace detail {

// Regularized lower incomplete gamma P(a, x) by the usual split: power
// series for x < a + 1, modified Lentz continued fraction for the upper
// tail otherwise (cf. Numerical Recipes ch. 6.2).
inline double gamma_p_series(double a, double x) {
  const double lga = std::lgamma(a);
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < 1000; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17)
      return sum * std::exp(-x + a * std::log(x) - lga);
  }
  return sum * std::exp(-x + a * std::log(x) - lga);
}

inline double gamma_q_contfrac(double a, double x) {
  const double lga = std::lgamma(a);
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-17) break;
  }
  return std::exp(-x + a * std::log(x) - lga) * h;
}

}  // namespace detail

inline double gamma_p(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a))
    throw invalid_argument("gamma_p: shape must be positive");
  if (!(x >= 0.0) || !std::isfinite(x))
    throw invalid_argument("gamma_p: argument must be nonnegative");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_contfrac(a, x);
}

// CDF of the chi-square distribution with df degrees of freedom.
inline double chi_square_cdf(int df, double x) {
  if (df < 1) throw invalid_argument("chi_square_cdf: df must be >= 1");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * df, 0.5 * x);
}

// Inverse CDF by bisection on the CDF. The bracket grows geometrically from
// the mean; bisection then runs essentially to machine precision (the
// contract elsewhere only needs 1e-10 absolute, closed-form cases come out
// to ~1e-13).
inline double chi_square_quantile(int df, double p) {
  if (df < 1) throw invalid_argument("chi_square_quantile: df must be >= 1");
  if (!(p > 0.0 && p < 1.0))
    throw invalid_argument("chi_square_quantile: probability must lie in (0,1), got " +
                           std::to_string(p));
  double lo = 0.0;
  double hi = static_cast<double>(df);
  while (chi_square_cdf(df, hi) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e308) throw invalid_argument("chi_square_quantile: bracket overflow");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // interval collapsed to adjacent doubles
    if (chi_square_cdf(df, mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace spr
