#pragma once

// Master equation μ̇ = μQ(μ): right-hand side, adaptive integration on the
// simplex, free energy ℱ, Fisher information ℐ, stationary points, and the
// free-energy dissipation balance ℱ(μ_t) + ∫₀ᵗ ℐ = ℱ(μ₀).

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mfcurv/errors.hpp"
#include "mfcurv/logmean.hpp"
#include "mfcurv/models.hpp"
#include "mfcurv/parallel.hpp"
#include "mfcurv/random.hpp"
#include "mfcurv/simplex.hpp"

namespace mfcurv {

// ── pointwise quantities ────────────────────────────────────────────────────

inline Vector rhs_vector(const NonlinearMarkovTriple& triple, const Vector& mu) {
  return triple.Q(mu).transpose() * mu;
}

/// (μQ(μ))_y = Σ_x μ_x Q_xy(μ).
inline TangentVector rhs(const NonlinearMarkovTriple& triple, const ProbabilityMeasure& mu) {
  return TangentVector(rhs_vector(triple, mu.weights()), 1e-10);
}

/// ℱ(μ) = Σ μ_x log μ_x + U(μ), with 0·log 0 = 0.
inline double free_energy(const NonlinearMarkovTriple& triple, const Vector& mu) {
  double s = 0.0;
  for (Eigen::Index x = 0; x < mu.size(); ++x)
    if (mu[x] > 0.0) s += mu[x] * std::log(mu[x]);
  return s + triple.U(mu);
}

inline double free_energy(const NonlinearMarkovTriple& triple, const ProbabilityMeasure& mu) {
  return free_energy(triple, mu.weights());
}

/// ℐ(μ) = ½ Σ Θ(μ_x Q_xy, μ_y Q_yx) on the interior, +∞ otherwise.
inline double fisher_info(const NonlinearMarkovTriple& triple, const Vector& mu) {
  if (!(mu.minCoeff() > 0.0)) return std::numeric_limits<double>::infinity();
  const Matrix q = triple.Q(mu);
  double s = 0.0;
  for (Eigen::Index x = 0; x < mu.size(); ++x)
    for (Eigen::Index y = x + 1; y < mu.size(); ++y)
      s += logmean::theta(mu[x] * q(x, y), mu[y] * q(y, x));
  return s;  // ½ Σ over ordered pairs = Σ over unordered pairs
}

inline double fisher_info(const NonlinearMarkovTriple& triple, const ProbabilityMeasure& mu) {
  return fisher_info(triple, mu.weights());
}

/// log ρ with ρ = μ/π(μ).
inline Vector log_density(const NonlinearMarkovTriple& triple, const Vector& mu) {
  return (mu.array().log() - triple.pi(mu).array().log()).matrix();
}

// ── stationary points ───────────────────────────────────────────────────────

struct StationarySet {
  std::vector<ProbabilityMeasure> points;
  std::vector<double> residuals;       // ‖πQ(π)‖∞
  std::vector<double> fisher_values;
  std::vector<double> free_energies;
  std::size_t global_minimizer = 0;    // index of the ℱ-minimizing point

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
  double min_free_energy() const {
    if (points.empty()) throw Error("stationary set is empty; run find_stationary first");
    return free_energies[global_minimizer];
  }
  const ProbabilityMeasure& minimizer() const {
    if (points.empty()) throw Error("stationary set is empty; run find_stationary first");
    return points[global_minimizer];
  }
};

struct StationaryOptions {
  std::size_t fixed_point_iterations = 5000;
  double damping = 0.5;
  std::size_t newton_iterations = 100;
  double accept_residual = 1e-10;
  double accept_fisher = 1e-9;
  double dedup_distance = 1e-6;
  std::uint64_t seed = defaults::seed;
};

namespace detail {

// Newton on F(μ) = μQ(μ) in the first n−1 coordinates (μ_{n−1} = 1 − Σ rest).
inline std::optional<Vector> newton_stationary(const NonlinearMarkovTriple& triple, Vector mu,
                                               std::size_t iterations) {
  const auto n = mu.size();
  auto residual = [&](const Vector& m) { return rhs_vector(triple, m).cwiseAbs().maxCoeff(); };
  double r = residual(mu);
  for (std::size_t it = 0; it < iterations && r > 1e-14; ++it) {
    const Matrix q = triple.Q(mu);
    const auto dq = triple.dQ(mu);
    Matrix jac(n, n);  // J(y,z) = ∂F_y/∂μ_z
    for (Eigen::Index z = 0; z < n; ++z)
      jac.col(z) = q.row(z).transpose() + dq[static_cast<std::size_t>(z)].transpose() * mu;
    Matrix red(n - 1, n - 1);
    for (Eigen::Index z = 0; z < n - 1; ++z) red.col(z) = jac.col(z).head(n - 1) - jac.col(n - 1).head(n - 1);
    const Vector f = rhs_vector(triple, mu);
    Eigen::FullPivLU<Matrix> lu(red);
    if (lu.rank() < n - 1) return std::nullopt;
    const Vector step = lu.solve(Vector(-f.head(n - 1)));
    Vector full(n);
    full.head(n - 1) = step;
    full[n - 1] = -step.sum();
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      Vector cand = mu + t * full;
      if (cand.minCoeff() <= 0.0) continue;
      cand /= cand.sum();
      const double rc = residual(cand);
      if (rc < r || rc <= 1e-14) {
        mu = cand;
        r = rc;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return mu;
}

inline Vector damped_fixed_point(const NonlinearMarkovTriple& triple, Vector mu, const StationaryOptions& opts) {
  for (std::size_t it = 0; it < opts.fixed_point_iterations; ++it) {
    const Vector p = triple.pi(mu);
    const double gap = (p - mu).cwiseAbs().maxCoeff();
    mu = (1.0 - opts.damping) * mu + opts.damping * p;
    mu /= mu.sum();
    if (gap < 1e-12) break;
  }
  return mu;
}

}  // namespace detail

/// Locates stationary points from `n_starts` starting measures (barycenter,
/// shrunk vertices, then seeded Dirichlet samples). Each start is run through
/// the damped fixed-point map μ ← (1−θ)μ + θπ(μ) followed by a Newton polish,
/// and separately through Newton alone so that unstable fixed points are found
/// too. The set is not claimed to be complete.
inline StationarySet find_stationary(const NonlinearMarkovTriple& triple, std::size_t n_starts,
                                     const StationaryOptions& opts = {}) {
  if (n_starts == 0) throw SpecError("find_stationary: n_starts must be >= 1");
  const std::size_t n = triple.size();
  std::vector<Vector> starts;
  starts.push_back(ProbabilityMeasure::uniform(n).weights());
  for (std::size_t i = 0; i < n && starts.size() < n_starts; ++i) {
    Vector v = Vector::Constant(static_cast<Eigen::Index>(n), 0.1 / static_cast<double>(n));
    v[static_cast<Eigen::Index>(i)] += 0.9;
    starts.push_back(v);
  }
  for (std::size_t i = starts.size(); i < n_starts; ++i) {
    Rng rng(derive_seed(opts.seed, i));
    starts.push_back(sample_dirichlet(rng, n, 1.0, 1e-3).weights());
  }

  std::vector<std::vector<Vector>> found(starts.size());
  parallel_for(starts.size(), [&](std::size_t i) {
    const Vector fp = detail::damped_fixed_point(triple, starts[i], opts);
    if (auto p = detail::newton_stationary(triple, fp, opts.newton_iterations)) found[i].push_back(*p);
    if (auto p = detail::newton_stationary(triple, starts[i], opts.newton_iterations)) found[i].push_back(*p);
  });

  StationarySet set;
  for (const auto& group : found)
    for (const Vector& p : group) {
      if (!(p.minCoeff() > 0.0)) continue;
      const double res = rhs_vector(triple, p).cwiseAbs().maxCoeff();
      const double fi = fisher_info(triple, p);
      if (res > opts.accept_residual || fi > opts.accept_fisher) continue;
      bool dup = false;
      for (const auto& q : set.points)
        if ((q.weights() - p).cwiseAbs().maxCoeff() <= opts.dedup_distance) dup = true;
      if (dup) continue;
      set.points.push_back(ProbabilityMeasure::normalized(p));
      set.residuals.push_back(res);
      set.fisher_values.push_back(fi);
      set.free_energies.push_back(free_energy(triple, p));
    }
  if (set.points.empty()) throw NumericalError("find_stationary: no start converged");
  set.global_minimizer = static_cast<std::size_t>(
      std::min_element(set.free_energies.begin(), set.free_energies.end()) - set.free_energies.begin());
  return set;
}

/// ℱ_*(μ) = ℱ(μ) − min ℱ, the minimum taken over the stationary set.
inline double free_energy_gap(const NonlinearMarkovTriple& triple, const Vector& mu, const StationarySet& set) {
  return std::max(0.0, free_energy(triple, mu) - set.min_free_energy());
}

inline double free_energy_gap(const NonlinearMarkovTriple& triple, const ProbabilityMeasure& mu,
                              const StationarySet& set) {
  return free_energy_gap(triple, mu.weights(), set);
}

// ── integration ─────────────────────────────────────────────────────────────

/// Accepted states of an integration run, with slopes for cubic Hermite dense output.
struct Trajectory {
  std::vector<double> times;
  std::vector<ProbabilityMeasure> states;
  std::vector<Vector> slopes;
  std::string model_id;

  std::size_t size() const { return times.size(); }

  /// Dense output at t ∈ [times.front(), times.back()].
  Vector state_at(double t) const {
    if (times.empty()) throw Error("empty trajectory");
    if (t <= times.front()) return states.front().weights();
    if (t >= times.back()) return states.back().weights();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto i = static_cast<std::size_t>(it - times.begin()) - 1;
    return hermite(i, t);
  }

  Vector hermite(std::size_t i, double t) const {
    const double h = times[i + 1] - times[i];
    const double s = (t - times[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * states[i].weights() + h10 * h * slopes[i] + h01 * states[i + 1].weights() + h11 * h * slopes[i + 1];
  }
};

/// Integration failure; carries the last accepted state.
struct IntegrationError : NumericalError {
  IntegrationError(const std::string& what, double t, Vector state)
      : NumericalError(what), time(t), last_state(std::move(state)) {}
  double time;
  Vector last_state;
};

struct IntegrateOptions {
  double tol = defaults::integrator_tol;
  double stationarity_tol = 1e-12;  // stop early once ‖μQ(μ)‖∞ falls below this
  std::size_t max_steps = 2000000;
  double max_step = std::numeric_limits<double>::infinity();
};

/// Dormand–Prince 5(4) with rejection of any stage that leaves the simplex
/// and renormalization of the mass after every accepted step.
inline Trajectory integrate(const NonlinearMarkovTriple& triple, const ProbabilityMeasure& mu0, double t_max,
                            const IntegrateOptions& opts = {}, std::string model_id = {}) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2, (void)c3, (void)c4, (void)c5;

  if (!(t_max >= 0.0)) throw DomainError("integrate: t_max must be nonnegative");
  if (mu0.size() != triple.size()) throw SpecError("integrate: initial measure has the wrong dimension");
  Trajectory traj;
  traj.model_id = std::move(model_id);
  Vector y = mu0.weights();
  double t = 0.0;
  Vector k1 = rhs_vector(triple, y);
  traj.times.push_back(t);
  traj.states.push_back(mu0);
  traj.slopes.push_back(k1);

  auto finish_stationary = [&] {
    if (traj.times.back() < t_max) {
      traj.times.push_back(t_max);
      traj.states.push_back(traj.states.back());
      traj.slopes.push_back(Vector::Zero(y.size()));
    }
  };
  if (k1.cwiseAbs().maxCoeff() <= opts.stationarity_tol || t_max == 0.0) {
    finish_stationary();
    return traj;
  }

  double h = std::min({t_max, opts.max_step, 0.01 / std::max(1e-12, k1.cwiseAbs().maxCoeff())});
  const auto in_simplex = [](const Vector& v) { return v.minCoeff() > 0.0; };
  std::size_t steps = 0;
  while (t < t_max) {
    if (++steps > opts.max_steps) throw IntegrationError("integrate: step budget exhausted", t, y);
    if (h < 1e-14 * std::max(1.0, t)) throw IntegrationError("integrate: step size underflow", t, y);
    h = std::min(h, t_max - t);

    bool positive = true;
    auto stage = [&](const Vector& arg) -> Vector {
      if (!in_simplex(arg)) {
        positive = false;
        return Vector::Zero(arg.size());
      }
      return rhs_vector(triple, arg);
    };
    const Vector k2 = stage(y + h * (a21 * k1));
    const Vector k3 = positive ? stage(y + h * (a31 * k1 + a32 * k2)) : k2;
    const Vector k4 = positive ? stage(y + h * (a41 * k1 + a42 * k2 + a43 * k3)) : k2;
    const Vector k5 = positive ? stage(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)) : k2;
    const Vector k6 = positive ? stage(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)) : k2;
    Vector ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    if (!positive || !in_simplex(ynew)) {
      h *= 0.5;
      continue;
    }
    const Vector k7 = rhs_vector(triple, ynew);
    const Vector err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double norm = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = opts.tol + opts.tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      norm += (err[i] / sc) * (err[i] / sc);
    }
    norm = std::sqrt(norm / static_cast<double>(y.size()));
    if (norm > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(norm, -0.2));
      continue;
    }
    ynew /= ynew.sum();
    t += h;
    y = ynew;
    k1 = rhs_vector(triple, y);
    traj.times.push_back(t);
    traj.states.emplace_back(y);
    traj.slopes.push_back(k1);
    if (k1.cwiseAbs().maxCoeff() <= opts.stationarity_tol) {
      finish_stationary();
      break;
    }
    const double grow = norm == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(norm, -0.2)));
    h = std::min(h * grow, opts.max_step);
  }
  return traj;
}

/// max over accepted states of |ℱ(μ_t) − ℱ(μ₀) + ∫₀ᵗ ℐ(μ_s) ds|; the integral
/// is adaptive Gauss–Kronrod over the Hermite dense output.
inline double dissipation_residual(const NonlinearMarkovTriple& triple, const Trajectory& traj) {
  for (const auto& s : traj.states)
    if (!s.is_interior()) throw DomainError("dissipation_residual: trajectory touches the boundary");
  if (traj.size() < 2) return 0.0;
  const double f0 = free_energy(triple, traj.states.front());
  double integral = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    if (traj.times[i + 1] > traj.times[i]) {
      auto f = [&](double t) { return fisher_info(triple, traj.hermite(i, t)); };
      integral += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, traj.times[i], traj.times[i + 1],
                                                                               10, 1e-13);
    }
    worst = std::max(worst, std::abs(free_energy(triple, traj.states[i + 1]) - f0 + integral));
  }
  return worst;
}

/// CSV `t,mu_0,...,mu_{n-1},F,I` with 17 significant digits.
inline void write_trajectory_csv(std::ostream& out, const NonlinearMarkovTriple& triple, const Trajectory& traj) {
  const std::size_t n = triple.size();
  out << "t";
  for (std::size_t i = 0; i < n; ++i) out << ",mu_" << i;
  out << ",F,I\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << traj.times[k];
    for (std::size_t i = 0; i < n; ++i) out << ',' << traj.states[k][i];
    out << ',' << free_energy(triple, traj.states[k]) << ',' << fisher_info(triple, traj.states[k]) << '\n';
  }
}

}  // namespace mfcurv
