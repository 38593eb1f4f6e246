#pragma once

// Transport geometry on the simplex: edge weights Λ(μ), the action 𝒜, the
// continuity-equation solver, the distance 𝒲 by discrete path optimization,
// and geodesics.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "mfcurv/config.hpp"
#include "mfcurv/errors.hpp"
#include "mfcurv/logmean.hpp"
#include "mfcurv/models.hpp"
#include "mfcurv/optim.hpp"
#include "mfcurv/parallel.hpp"
#include "mfcurv/simplex.hpp"

namespace mfcurv {

/// Λ_xy(μ) = Λ(μ_x Q_xy(μ), μ_y Q_yx(μ)), zero on the diagonal.
inline Matrix edge_weight_matrix(const NonlinearMarkovTriple& triple, const Vector& mu) {
  const auto n = mu.size();
  const Matrix q = triple.Q(mu);
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = x + 1; y < n; ++y) {
      const double a = mu[x] * q(x, y), b = mu[y] * q(y, x);
      l(x, y) = l(y, x) = (a > 0.0 && b > 0.0) ? logmean::lambda(a, b) : 0.0;
    }
  return l;
}

inline EdgeField edge_weights(const NonlinearMarkovTriple& triple, const ProbabilityMeasure& mu) {
  return EdgeField(edge_weight_matrix(triple, mu.weights()), Symmetry::symmetric, 1e-12);
}

/// jac[z](x,y) = ∂Λ_xy/∂μ_z along the model's rate extension. Only tangent
/// (zero-sum) contractions of this are intrinsic.
inline std::vector<Matrix> edge_weight_jacobian(const NonlinearMarkovTriple& triple, const Vector& mu) {
  const auto n = mu.size();
  const Matrix q = triple.Q(mu);
  const auto dq = triple.dQ(mu);
  std::vector<Matrix> jac(static_cast<std::size_t>(n), Matrix::Zero(n, n));
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = x + 1; y < n; ++y) {
      const double a = mu[x] * q(x, y), b = mu[y] * q(y, x);
      if (!(a > 0.0 && b > 0.0)) continue;
      const auto [d1, d2] = logmean::dlambda(a, b);
      for (Eigen::Index z = 0; z < n; ++z) {
        const Matrix& dz = dq[static_cast<std::size_t>(z)];
        double v = d1 * (mu[x] * dz(x, y)) + d2 * (mu[y] * dz(y, x));
        if (z == x) v += d1 * q(x, y);
        if (z == y) v += d2 * q(y, x);
        jac[static_cast<std::size_t>(z)](x, y) = jac[static_cast<std::size_t>(z)](y, x) = v;
      }
    }
  return jac;
}

/// 𝒜(μ,ψ) = ½ Σ (ψ_y − ψ_x)² Λ_xy(μ).
inline double action_with_weights(const Matrix& weights, const Vector& psi) {
  return psi.dot(laplacian(weights) * psi);
}

inline double action(const NonlinearMarkovTriple& triple, const Vector& mu, const Vector& psi) {
  return action_with_weights(edge_weight_matrix(triple, mu), psi);
}

inline double action(const NonlinearMarkovTriple& triple, const ProbabilityMeasure& mu, const Potential& psi) {
  return action(triple, mu.weights(), psi.values());
}

/// Mean-zero ψ with Lap(W)ψ = σ, i.e. σ = −∇·(W∇ψ).
inline Vector solve_laplacian(const Matrix& weights, const Vector& sigma) {
  const auto n = weights.rows();
  if (std::abs(sigma.sum()) > 1e-9 * std::max(1.0, sigma.lpNorm<1>()))
    throw DomainError("solve_continuity: sigma must have zero sum");
  const Matrix p = mean_zero_basis(n);
  const Matrix red = p.transpose() * laplacian(weights) * p;
  Eigen::SelfAdjointEigenSolver<Matrix> es(red, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(lo > 1e-14 * std::max(hi, 1e-300)) || !(hi > 0.0))
    throw NumericalError("solve_continuity: weighted Laplacian is singular (disconnected support)");
  Eigen::LDLT<Matrix> ldlt(red);
  return p * ldlt.solve(Vector(p.transpose() * sigma));
}

inline Potential solve_continuity(const NonlinearMarkovTriple& triple, const ProbabilityMeasure& mu,
                                  const TangentVector& sigma) {
  if (!mu.is_interior()) throw DomainError("solve_continuity: mu must be interior");
  return Potential(solve_laplacian(edge_weight_matrix(triple, mu.weights()), sigma.values()));
}

// ── discrete paths ──────────────────────────────────────────────────────────

/// Knots μ₀…μ_K with step potentials ψ₀…ψ_{K−1}. Step k moves with the
/// edgewise harmonic mean of Λ(μ_k) and Λ(μ_{k+1}) and satisfies
/// μ_{k+1} − μ_k = dt·Lap(Λ̃_k)ψ_k exactly (up to the linear solve).
struct TransportPath {
  std::vector<ProbabilityMeasure> steps;
  std::vector<Potential> potentials;
  std::vector<double> step_actions;
  double dt = 0.0;
  double action_value = 0.0;

  std::size_t K() const { return potentials.size(); }
};

namespace detail {

inline double harmonic(double p, double q) { return p + q > 0.0 ? 2.0 * p * q / (p + q) : 0.0; }

inline Matrix step_weights(const Matrix& a, const Matrix& b) {
  return a.binaryExpr(b, [](double p, double q) { return harmonic(p, q); });
}

inline Vector softmax_last_zero(const Vector& theta, Eigen::Index n) {
  Vector z(n);
  z.head(n - 1) = theta;
  z[n - 1] = 0.0;
  const double m = z.maxCoeff();
  Vector e = (z.array() - m).exp().matrix();
  return e / e.sum();
}

inline Vector logits(const Vector& mu) {
  const auto n = mu.size();
  return (mu.head(n - 1).array().log() - std::log(mu[n - 1])).matrix();
}

struct PathEvaluation {
  double value = 0.0;
  std::vector<Vector> knots;
  std::vector<Vector> psi;
  std::vector<Matrix> weights;
  std::vector<double> step_actions;
};

// S = Σ_k dt σ_kᵀ Lap(Λ̃_k)⁺ σ_k, σ_k = (μ_{k+1} − μ_k)/dt.
inline PathEvaluation evaluate_path(const NonlinearMarkovTriple& triple, const std::vector<Vector>& knots,
                                    const std::vector<Matrix>& lam) {
  PathEvaluation ev;
  const std::size_t k_steps = knots.size() - 1;
  const double dt = 1.0 / static_cast<double>(k_steps);
  ev.knots = knots;
  for (std::size_t k = 0; k < k_steps; ++k) {
    const Matrix w = step_weights(lam[k], lam[k + 1]);
    const Vector sigma = (knots[k + 1] - knots[k]) / dt;
    const Vector psi = solve_laplacian(w, sigma);
    const double a = sigma.dot(psi);
    ev.value += dt * a;
    ev.psi.push_back(psi);
    ev.weights.push_back(w);
    ev.step_actions.push_back(a);
  }
  (void)triple;
  return ev;
}

}  // namespace detail

struct DistanceOptions {
  std::size_t K = defaults::distance_steps;
  double gradient_tol = 1e-8;
  std::size_t max_iterations = 5000;
  double boundary_clamp = defaults::boundary_clamp;
  bool require_convergence = true;
};

struct DistanceResult {
  double W = 0.0;
  TransportPath path;
  bool converged = false;
  bool certified = false;  // true only when the optimizer met its gradient tolerance
  bool clamped = false;    // an endpoint was moved off the boundary
  double min_knot_mass = 0.0;
  double gradient_norm = 0.0;
  std::size_t K = 0;
};

/// Thrown when the path optimizer misses its tolerance; carries the best path.
struct DistanceError : NumericalError {
  DistanceError(const std::string& what, DistanceResult best) : NumericalError(what), result(std::move(best)) {}
  DistanceResult result;
};

inline DistanceResult distance(const NonlinearMarkovTriple& triple, const ProbabilityMeasure& mu0,
                               const ProbabilityMeasure& mu1, const DistanceOptions& opts = {}) {
  const auto n = static_cast<Eigen::Index>(triple.size());
  if (mu0.size() != triple.size() || mu1.size() != triple.size())
    throw DomainError("distance: measure size does not match the model");
  if (opts.K < 1) throw SpecError("distance: K must be >= 1");
  const std::size_t K = opts.K;
  const double dt = 1.0 / static_cast<double>(K);

  DistanceResult res;
  res.K = K;
  auto clamp = [&](const ProbabilityMeasure& m) {
    if (m.is_interior()) return m.weights();
    res.clamped = true;
    const double d = opts.boundary_clamp;
    return Vector((1.0 - d) * m.weights() + Vector::Constant(n, d / static_cast<double>(n)));
  };
  const Vector a = clamp(mu0), b = clamp(mu1);

  if ((a - b).cwiseAbs().maxCoeff() == 0.0) {
    res.path.dt = dt;
    for (std::size_t k = 0; k <= K; ++k) res.path.steps.emplace_back(a, 1e-9);
    for (std::size_t k = 0; k < K; ++k) {
      res.path.potentials.push_back(Potential::zero(triple.size()));
      res.path.step_actions.push_back(0.0);
    }
    res.converged = res.certified = true;
    res.min_knot_mass = a.minCoeff();
    return res;
  }

  const Eigen::Index m = n - 1;
  const auto inner = static_cast<Eigen::Index>(K - 1);
  const Matrix lam_a = edge_weight_matrix(triple, a), lam_b = edge_weight_matrix(triple, b);

  auto unpack = [&](const Vector& theta) {
    std::vector<Vector> knots;
    knots.reserve(K + 1);
    knots.push_back(a);
    for (Eigen::Index j = 0; j < inner; ++j) knots.push_back(detail::softmax_last_zero(theta.segment(j * m, m), n));
    knots.push_back(b);
    return knots;
  };

  const optim::Objective objective = [&](const Vector& theta, Vector* grad) -> double {
    const auto knots = unpack(theta);
    std::vector<Matrix> lam(K + 1);
    lam[0] = lam_a;
    lam[K] = lam_b;
    for (std::size_t k = 1; k < K; ++k) lam[k] = edge_weight_matrix(triple, knots[k]);
    detail::PathEvaluation ev;
    try {
      ev = detail::evaluate_path(triple, knots, lam);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
    if (grad) {
      grad->resize(theta.size());
      for (std::size_t j = 1; j < K; ++j) {
        Vector g = 2.0 * ev.psi[j - 1] - 2.0 * ev.psi[j];
        const auto jac = edge_weight_jacobian(triple, knots[j]);
        // weight sensitivity: step j−1 (knot j is its right end) and step j (left end)
        Matrix coef = Matrix::Zero(n, n);
        for (Eigen::Index x = 0; x < n; ++x)
          for (Eigen::Index y = x + 1; y < n; ++y) {
            const double gl = ev.psi[j - 1][y] - ev.psi[j - 1][x];
            const double gr = ev.psi[j][y] - ev.psi[j][x];
            const double pl = lam[j - 1](x, y), ql = lam[j](x, y), pr = lam[j + 1](x, y);
            double c = 0.0;
            if (pl + ql > 0.0) c -= dt * gl * gl * 2.0 * pl * pl / ((pl + ql) * (pl + ql));
            if (ql + pr > 0.0) c -= dt * gr * gr * 2.0 * pr * pr / ((ql + pr) * (ql + pr));
            coef(x, y) = c;
          }
        for (Eigen::Index z = 0; z < n; ++z)
          g[z] += coef.cwiseProduct(jac[static_cast<std::size_t>(z)]).sum();
        const Vector& mu = knots[j];
        const double gm = g.dot(mu);
        grad->segment(static_cast<Eigen::Index>(j - 1) * m, m) =
            (mu.head(m).array() * (g.head(m).array() - gm)).matrix();
      }
    }
    return ev.value;
  };

  // starts: linear interpolation and normalized geometric interpolation
  std::vector<Vector> starts;
  {
    Vector lin(inner * m), geo(inner * m);
    for (Eigen::Index j = 0; j < inner; ++j) {
      const double t = static_cast<double>(j + 1) * dt;
      lin.segment(j * m, m) = detail::logits((1.0 - t) * a + t * b);
      Vector g = ((1.0 - t) * a.array().log() + t * b.array().log()).exp().matrix();
      geo.segment(j * m, m) = detail::logits(g / g.sum());
    }
    starts.push_back(lin);
    starts.push_back(geo);
  }

  optim::BfgsOptions bo;
  bo.gradient_tol = opts.gradient_tol;
  bo.max_iterations = opts.max_iterations;
  std::optional<optim::Result> best;
  for (const Vector& s : starts) {
    if (inner == 0) {
      optim::Result r;
      r.x = s;
      r.value = objective(s, nullptr);
      r.gradient_norm = 0.0;
      r.converged = true;
      best = r;
      break;
    }
    optim::Result r = optim::bfgs(objective, s, bo);
    if (!best || r.value < best->value) best = r;
  }

  const auto knots = unpack(best->x);
  std::vector<Matrix> lam(K + 1);
  for (std::size_t k = 0; k <= K; ++k) lam[k] = edge_weight_matrix(triple, knots[k]);
  const auto ev = detail::evaluate_path(triple, knots, lam);
  res.W = std::sqrt(std::max(0.0, ev.value));
  res.path.dt = dt;
  res.path.action_value = ev.value;
  res.path.step_actions = ev.step_actions;
  double minmass = 1.0;
  for (const auto& k : knots) {
    res.path.steps.emplace_back(k, 1e-9);
    minmass = std::min(minmass, k.minCoeff());
  }
  for (const auto& p : ev.psi) res.path.potentials.emplace_back(p);
  res.min_knot_mass = minmass;
  res.gradient_norm = best->gradient_norm;
  res.converged = best->converged;
  res.certified = best->converged;
  if (!res.converged && opts.require_convergence)
    throw DistanceError("distance: optimizer did not reach gradient tolerance", res);
  return res;
}

/// Worst per-step residual of μ_{k+1} − μ_k = dt·Lap(Λ̃_k)ψ_k.
inline double continuity_residual(const NonlinearMarkovTriple& triple, const TransportPath& path) {
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < path.steps.size(); ++k) {
    const Matrix w = detail::step_weights(edge_weight_matrix(triple, path.steps[k].weights()),
                                          edge_weight_matrix(triple, path.steps[k + 1].weights()));
    const Vector r = path.steps[k + 1].weights() - path.steps[k].weights() -
                     path.dt * laplacian(w) * path.potentials[k].values();
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

/// Zero-sum part of z ↦ ∂_{μ_z}𝒜(μ,ψ) = ½ Σ_xy (ψ_y − ψ_x)² ∂_zΛ_xy.
inline Vector action_gradient(const NonlinearMarkovTriple& triple, const Vector& mu, const Vector& psi) {
  const auto n = mu.size();
  const auto jac = edge_weight_jacobian(triple, mu);
  const Matrix g = gradient_matrix(psi);
  const Matrix g2 = g.cwiseProduct(g);
  Vector d(n);
  for (Eigen::Index z = 0; z < n; ++z) d[z] = 0.5 * g2.cwiseProduct(jac[static_cast<std::size_t>(z)]).sum();
  return (d.array() - d.mean()).matrix();
}

struct GeodesicResult {
  DistanceResult distance;
  double residual = 0.0;  // max over interior knots of the discrete geodesic-equation residual
};

/// Residual of ψ̇ + ½∂_μ𝒜 = 0 at interior knots j:
/// P[ψ_j − ψ_{j−1}] + (dt/2)·½(D𝒜(μ_j,ψ_{j−1}) + D𝒜(μ_j,ψ_j)).
inline double geodesic_residual(const NonlinearMarkovTriple& triple, const TransportPath& path) {
  double worst = 0.0;
  for (std::size_t j = 1; j < path.K(); ++j) {
    const Vector& mu = path.steps[j].weights();
    const Vector& pl = path.potentials[j - 1].values();
    const Vector& pr = path.potentials[j].values();
    Vector diff = pr - pl;
    diff.array() -= diff.mean();
    const Vector r = diff + 0.25 * path.dt * (action_gradient(triple, mu, pl) + action_gradient(triple, mu, pr));
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

inline GeodesicResult geodesic(const NonlinearMarkovTriple& triple, const ProbabilityMeasure& mu0,
                               const ProbabilityMeasure& mu1, const DistanceOptions& opts = {}) {
  if (!mu0.is_interior() || !mu1.is_interior()) throw DomainError("geodesic: endpoints must be interior");
  GeodesicResult g;
  g.distance = distance(triple, mu0, mu1, opts);
  g.residual = geodesic_residual(triple, g.distance.path);
  return g;
}

/// Independent distance jobs over endpoint pairs.
inline std::vector<DistanceResult> distances(const NonlinearMarkovTriple& triple,
                                             const std::vector<std::pair<ProbabilityMeasure, ProbabilityMeasure>>& pairs,
                                             const DistanceOptions& opts = {}) {
  std::vector<std::optional<DistanceResult>> out(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) { out[i] = distance(triple, pairs[i].first, pairs[i].second, opts); });
  std::vector<DistanceResult> r;
  r.reserve(out.size());
  for (auto& o : out) r.push_back(std::move(*o));
  return r;
}

/// CSV `k,t,mu_0..mu_{n-1},psi_0..psi_{n-1},step_action`; the last knot has no step.
inline void write_path_csv(std::ostream& out, const TransportPath& path) {
  if (path.steps.empty()) return;
  const std::size_t n = path.steps.front().size();
  out << "k,t";
  for (std::size_t i = 0; i < n; ++i) out << ",mu_" << i;
  for (std::size_t i = 0; i < n; ++i) out << ",psi_" << i;
  out << ",step_action\n" << std::setprecision(17);
  for (std::size_t k = 0; k < path.steps.size(); ++k) {
    out << k << ',' << static_cast<double>(k) * path.dt;
    for (std::size_t i = 0; i < n; ++i) out << ',' << path.steps[k][i];
    for (std::size_t i = 0; i < n; ++i) {
      out << ',';
      if (k < path.K()) out << path.potentials[k][i];
    }
    out << ',';
    if (k < path.K()) out << path.step_actions[k];
    out << '\n';
  }
}

}  // namespace mfcurv
