#pragma once

// Real polynomials on [0,1] with certified extrema. Used for the rate
// profiles a(r), b(r) of separable models.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

#include "mfcurv/errors.hpp"

namespace mfcurv {

class Polynomial {
 public:
  Polynomial() : c_{0.0} {}
  /// Coefficients, constant term first.
  explicit Polynomial(std::vector<double> coefficients) : c_(std::move(coefficients)) {
    if (c_.empty()) c_.push_back(0.0);
    for (double v : c_)
      if (!std::isfinite(v)) throw SpecError("polynomial coefficients must be finite");
    trim();
  }
  Polynomial(std::initializer_list<double> c) : Polynomial(std::vector<double>(c)) {}

  const std::vector<double>& coefficients() const { return c_; }
  std::size_t degree() const { return c_.size() - 1; }

  double operator()(double r) const {
    double acc = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * r + *it;
    return acc;
  }

  Polynomial derivative() const {
    if (c_.size() == 1) return Polynomial({0.0});
    std::vector<double> d(c_.size() - 1);
    for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = static_cast<double>(k) * c_[k];
    return Polynomial(std::move(d));
  }

  bool is_constant() const { return c_.size() == 1; }

  /// All real roots in [lo, hi], sorted. Roots are isolated recursively via the
  /// critical points of the polynomial and refined by bisection.
  std::vector<double> roots_in(double lo, double hi, double tolerance = 1e-14) const {
    std::vector<double> out;
    if (is_constant()) return out;
    std::vector<double> knots{lo};
    for (double r : derivative().roots_in(lo, hi, tolerance)) knots.push_back(r);
    knots.push_back(hi);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      double a = knots[i], b = knots[i + 1];
      double fa = (*this)(a), fb = (*this)(b);
      if (fa == 0.0) {
        push_unique(out, a, tolerance);
        continue;
      }
      if (fb == 0.0) {
        push_unique(out, b, tolerance);
        continue;
      }
      if ((fa < 0.0) == (fb < 0.0)) continue;
      while (b - a > tolerance) {
        const double m = 0.5 * (a + b);
        const double fm = (*this)(m);
        if (fm == 0.0) {
          a = b = m;
          break;
        }
        if ((fm < 0.0) == (fa < 0.0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      push_unique(out, 0.5 * (a + b), tolerance);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// (min, max) over [lo, hi], evaluated at endpoints and critical points.
  std::pair<double, double> extrema(double lo = 0.0, double hi = 1.0) const {
    double mn = std::min((*this)(lo), (*this)(hi));
    double mx = std::max((*this)(lo), (*this)(hi));
    for (double r : derivative().roots_in(lo, hi)) {
      const double v = (*this)(r);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    return {mn, mx};
  }

  /// max |p'| on [0,1].
  double lipschitz() const {
    const auto [mn, mx] = derivative().extrema();
    return std::max(std::abs(mn), std::abs(mx));
  }

  bool operator==(const Polynomial&) const = default;

 private:
  void trim() {
    while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
  }

  static void push_unique(std::vector<double>& v, double r, double tolerance) {
    for (double x : v)
      if (std::abs(x - r) <= 10.0 * tolerance) return;
    v.push_back(r);
  }

  std::vector<double> c_;
};

}  // namespace mfcurv
