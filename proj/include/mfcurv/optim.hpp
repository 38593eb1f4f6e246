#pragma once

// Small unconstrained optimizers: BFGS with a backtracking Armijo/Wolfe line
// search, Nelder–Mead, and golden-section search on an interval.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "mfcurv/simplex.hpp"

namespace mfcurv::optim {

struct Result {
  Vector x;
  double value = std::numeric_limits<double>::infinity();
  double gradient_norm = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
};

/// f(x, grad) returns the value and, if grad is non-null, writes the gradient.
using Objective = std::function<double(const Vector&, Vector*)>;

struct BfgsOptions {
  std::size_t max_iterations = 2000;
  double gradient_tol = 1e-8;
  double value_tol = 1e-15;  // relative change that counts as stalled
};

inline Result bfgs(const Objective& f, Vector x, const BfgsOptions& opts = {}) {
  const auto n = x.size();
  Vector g(n);
  double fx = f(x, &g);
  Matrix hinv = Matrix::Identity(n, n);
  Result r;
  int stalls = 0;
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    r.iterations = it;
    if (!std::isfinite(fx)) break;
    if (g.lpNorm<Eigen::Infinity>() <= opts.gradient_tol) {
      r.converged = true;
      break;
    }
    Vector d = -hinv * g;
    double slope = g.dot(d);
    if (slope >= 0.0) {
      hinv.setIdentity();
      d = -g;
      slope = -g.squaredNorm();
    }
    double t = 1.0;
    Vector xn(n), gn(n);
    double fn = 0.0;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      xn = x + t * d;
      fn = f(xn, &gn);
      if (!std::isfinite(fn)) continue;
      // near the optimum the decrease drops below roundoff in f; then accept
      // steps that keep f flat and shrink the gradient
      const bool armijo = fn <= fx + 1e-4 * t * slope;
      const bool flat = fn <= fx + 1e-14 * std::abs(fx) && gn.lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>();
      if (armijo || flat) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      if (hinv.isIdentity()) break;
      hinv.setIdentity();
      continue;
    }
    const Vector s = xn - x, y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      if (it == 0) hinv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Matrix I = Matrix::Identity(n, n);
      hinv = (I - rho * s * y.transpose()) * hinv * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    const double change = std::abs(fx - fn);
    const bool shrinking = gn.lpNorm<Eigen::Infinity>() < 0.5 * g.lpNorm<Eigen::Infinity>();
    stalls = change <= opts.value_tol * std::max(1.0, std::abs(fx)) && !shrinking ? stalls + 1 : 0;
    x = xn;
    fx = fn;
    g = gn;
    if (stalls >= 50) break;
  }
  r.x = x;
  r.value = fx;
  r.gradient_norm = g.lpNorm<Eigen::Infinity>();
  if (r.gradient_norm <= opts.gradient_tol) r.converged = true;
  return r;
}

struct NelderMeadOptions {
  std::size_t max_evaluations = 20000;
  double initial_step = 0.5;
  double x_tol = 1e-9;
  double f_tol = 1e-12;
};

inline Result nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                          const NelderMeadOptions& opts = {}) {
  const auto n = x0.size();
  std::vector<Vector> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> vals(pts.size());
  for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i + 1)][i] += opts.initial_step;
  std::size_t evals = 0;
  auto eval = [&](const Vector& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = eval(pts[i]);
  std::vector<std::size_t> idx(pts.size());
  Result r;
  while (evals < opts.max_evaluations) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const std::size_t best = idx.front(), worst = idx.back(), second = idx[idx.size() - 2];
    double spread = 0.0;
    for (const auto& p : pts) spread = std::max(spread, (p - pts[best]).lpNorm<Eigen::Infinity>());
    if (spread <= opts.x_tol && vals[worst] - vals[best] <= opts.f_tol * (1.0 + std::abs(vals[best]))) {
      r.converged = true;
      break;
    }
    Vector centroid = Vector::Zero(n);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(n);
    const Vector xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < vals[best]) {
      const Vector xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
    } else if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
    } else {
      const bool outside = fr < vals[worst];
      const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid)) : Vector(centroid + 0.5 * (pts[worst] - centroid));
      const double fc = eval(xc);
      if (fc < std::min(fr, vals[worst])) {
        pts[worst] = xc;
        vals[worst] = fc;
      } else {
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          vals[i] = eval(pts[i]);
        }
      }
    }
  }
  const auto b = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  r.x = pts[b];
  r.value = vals[b];
  r.iterations = evals;
  return r;
}

struct ScalarMin {
  double x;
  double value;
};

/// Golden-section search for a minimum of f on [lo, hi].
inline ScalarMin golden_section(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-13) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && b - a > tol * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? ScalarMin{c, fc} : ScalarMin{d, fd};
}

/// Grid scan followed by golden-section refinement around the best grid point.
inline ScalarMin grid_then_golden(const std::function<double(double)>& f, double lo, double hi, std::size_t points) {
  ScalarMin best{lo, std::numeric_limits<double>::infinity()};
  std::size_t bi = 0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    const double v = f(x);
    if (v < best.value) {
      best = {x, v};
      bi = i;
    }
  }
  const double h = (hi - lo) / static_cast<double>(points - 1);
  const double a = std::max(lo, lo + h * (static_cast<double>(bi) - 1.0));
  const double b = std::min(hi, lo + h * (static_cast<double>(bi) + 1.0));
  const ScalarMin g = golden_section(f, a, b);
  return g.value < best.value ? g : best;
}

}  // namespace mfcurv::optim
