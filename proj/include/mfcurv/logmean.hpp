#pragma once

// Logarithmic mean Λ(a,b) = (a−b)/(log a − log b) = ∫₀¹ a^{1−s} b^s ds,
// its partial derivatives, and the dissipation kernel Θ.
//
// Near the diagonal the log formula cancels catastrophically, so for
// |a−b| <= 1e-4·max(a,b) everything is evaluated from the expansion
// Λ = m·g(u) with m = (a+b)/2, u = (a−b)/(a+b) and g(u) = u/atanh(u).

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "mfcurv/errors.hpp"

namespace mfcurv::logmean {

inline constexpr double series_threshold = 1e-4;

namespace detail {

// g(u) = u/atanh(u) = 1 − u²/3 − 4u⁴/45 − 44u⁶/945 + O(u⁸)
inline double g(double u) {
  const double u2 = u * u;
  return 1.0 - u2 * (1.0 / 3.0 + u2 * (4.0 / 45.0 + u2 * (44.0 / 945.0)));
}

// g'(u) = −2u/3 − 16u³/45 − 88u⁵/315 + O(u⁷)
inline double dg(double u) {
  const double u2 = u * u;
  return -u * (2.0 / 3.0 + u2 * (16.0 / 45.0 + u2 * (88.0 / 315.0)));
}

inline bool near_diagonal(double a, double b) {
  return std::abs(a - b) <= series_threshold * std::max(a, b);
}

// log(a/b) without cancellation when a ≈ b.
inline double log_ratio(double a, double b) {
  const double x = (a - b) / b;
  return std::abs(x) <= 0.5 ? std::log1p(x) : std::log(a) - std::log(b);
}

}  // namespace detail

inline double lambda(double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0)) throw DomainError("logarithmic mean: negative argument");
  if (a == 0.0 || b == 0.0) return 0.0;
  if (a == b) return a;
  if (a < b) std::swap(a, b);
  if (detail::near_diagonal(a, b)) {
    const double m = 0.5 * (a + b);
    return m * detail::g((a - b) / (a + b));
  }
  return (a - b) / detail::log_ratio(a, b);
}

/// (∂₁Λ(a,b), ∂₂Λ(a,b)); requires a, b > 0.
inline std::pair<double, double> dlambda(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("logarithmic mean derivative: nonpositive argument");
  if (detail::near_diagonal(a, b)) {
    const double u = (a - b) / (a + b);
    const double g = detail::g(u);
    const double dg = detail::dg(u);
    return {0.5 * (g + (1.0 - u) * dg), 0.5 * (g - (1.0 + u) * dg)};
  }
  const double l = detail::log_ratio(a, b);
  const double l2 = l * l;
  const double x = (a - b) / b;
  if (std::abs(x) <= 0.5) {
    // l − 1 + b/a = l − x/(1+x) and −l − 1 + a/b = x − l, both O(x²).
    return {(l - x / (1.0 + x)) / l2, (x - l) / l2};
  }
  return {(l - 1.0 + b / a) / l2, (-l - 1.0 + a / b) / l2};
}

/// Θ(a,b) = (a−b)(log a − log b); +∞ when exactly one argument vanishes.
inline double theta(double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0)) throw DomainError("theta: negative argument");
  if (a == b) return 0.0;
  if (a == 0.0 || b == 0.0) return std::numeric_limits<double>::infinity();
  if (a < b) std::swap(a, b);
  return (a - b) * detail::log_ratio(a, b);
}

/// r(∂₁Λ(s,t) + ∂₂Λ(s,t)) + Λ(s,t) − Λ(r,s) − Λ(r,t).
inline double fm_slack(double r, double s, double t) {
  if (!(r > 0.0) || !(s > 0.0) || !(t > 0.0)) throw DomainError("fm inequality: nonpositive argument");
  const auto [d1, d2] = dlambda(s, t);
  return r * (d1 + d2) + lambda(s, t) - lambda(r, s) - lambda(r, t);
}

/// Whether r(∂₁Λ+∂₂Λ)(s,t) + Λ(s,t) >= Λ(r,s) + Λ(r,t) holds with slack >= −1e-10.
inline bool fm_inequality_check(double r, double s, double t) {
  return fm_slack(r, s, t) >= -1e-10;
}

}  // namespace mfcurv::logmean
