#pragma once

// Curvature quadratic forms 𝒜 and ℬ, the pointwise bound
// κ(μ) = min_ψ ℬ(μ,ψ)/𝒜(μ,ψ), its infimum over the simplex, and two
// closed-form bounds (two-point spaces, separable rates).

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <iomanip>
#include <random>
#include <tuple>
#include <string>
#include <vector>

#include "mfcurv/config.hpp"
#include "mfcurv/errors.hpp"
#include "mfcurv/logmean.hpp"
#include "mfcurv/metric.hpp"
#include "mfcurv/models.hpp"
#include "mfcurv/optim.hpp"
#include "mfcurv/parallel.hpp"
#include "mfcurv/polynomial.hpp"
#include "mfcurv/random.hpp"
#include "mfcurv/simplex.hpp"

namespace mfcurv {

/// Symmetric matrix of a quadratic form in ψ. Constants lie in the kernel.
struct QuadraticForm {
  Matrix matrix;
  bool connected = true;  // Λ-support graph connected (meaningful for 𝒜)
  static constexpr const char* kernel_note = "contains constants";

  QuadraticForm() = default;
  explicit QuadraticForm(const Matrix& m, bool conn = true) : matrix(0.5 * (m + m.transpose())), connected(conn) {}

  double operator()(const Vector& psi) const { return psi.dot(matrix * psi); }
  double operator()(const Potential& psi) const { return (*this)(psi.values()); }
  std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
};

inline QuadraticForm assemble_A(const NonlinearMarkovTriple& triple, const Vector& mu) {
  const Matrix l = edge_weight_matrix(triple, mu);
  return QuadraticForm(laplacian(l), support_connected(l));
}

inline QuadraticForm assemble_A(const NonlinearMarkovTriple& triple, const ProbabilityMeasure& mu) {
  return assemble_A(triple, mu.weights());
}

/// The four pieces of ℬ as n×n matrices (each unsymmetrized contribution to ψᵀ·ψ):
/// lhat = ½Lap(L̂Λ), transport = −A·Q, r = ½Lap(RΛ), m = −A·N.
struct BTerms {
  Matrix lhat, transport, r, m;
};

inline BTerms b_terms(const NonlinearMarkovTriple& triple, const Vector& mu) {
  const auto n = mu.size();
  const Matrix q = triple.Q(mu);
  const auto dq = triple.dQ(mu);
  const Matrix A = laplacian(edge_weight_matrix(triple, mu));
  const Vector lmu = q.transpose() * mu;  // L̂_μ μ = μQ(μ)

  // DQ(σ; x, y) = Σ_z ∂_zQ_xy σ_z
  Matrix dqs = Matrix::Zero(n, n);
  for (Eigen::Index z = 0; z < n; ++z) dqs += lmu[z] * dq[static_cast<std::size_t>(z)];

  Matrix lhat = Matrix::Zero(n, n), rl = Matrix::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) {
      if (x == y) continue;
      const double a = mu[x] * q(x, y), b = mu[y] * q(y, x);
      if (!(a > 0.0 && b > 0.0)) continue;
      const auto [d1, d2] = logmean::dlambda(a, b);
      lhat(x, y) = d1 * lmu[x] * q(x, y) + d2 * lmu[y] * q(y, x);
      rl(x, y) = d1 * mu[x] * dqs(x, y) + d2 * mu[y] * dqs(y, x);
    }

  // N(z, j) = Σ_x μ_x ∂_zQ_xj − μ_j Σ_y ∂_zQ_jy over off-diagonal entries, so that
  // Σ_xy μ_x ∂_zQ_xy (ψ_y − ψ_x) = (Nψ)_z.
  Matrix N = Matrix::Zero(n, n);
  for (Eigen::Index z = 0; z < n; ++z) {
    Matrix d = dq[static_cast<std::size_t>(z)];
    d.diagonal().setZero();
    const Vector col = d.transpose() * mu;
    const Vector row = d.rowwise().sum();
    N.row(z) = (col - mu.cwiseProduct(row)).transpose();
  }

  BTerms t;
  t.lhat = 0.5 * laplacian(lhat);
  t.transport = -A * q;
  t.r = 0.5 * laplacian(rl);
  t.m = -A * N;
  return t;
}

/// ℬ(μ,·) = ½⟨∇ψ, L̂Λ∇ψ⟩ − ⟨∇ψ, Λ∇Lψ⟩ + ½⟨∇ψ, RΛ∇ψ⟩ + ⟨∇ψ, M∇ψ⟩.
inline QuadraticForm assemble_B(const NonlinearMarkovTriple& triple, const Vector& mu, bool include_r = true,
                                bool include_m = true) {
  const BTerms t = b_terms(triple, mu);
  Matrix b = t.lhat + t.transport;
  if (include_r) b += t.r;
  if (include_m) b += t.m;
  return QuadraticForm(b);
}

inline QuadraticForm assemble_B(const NonlinearMarkovTriple& triple, const ProbabilityMeasure& mu) {
  return assemble_B(triple, mu.weights());
}

struct KappaAt {
  double kappa = 0.0;
  Potential psi;
  double residual = 0.0;  // |ℬ(ψ*) − κ𝒜(ψ*)| / 𝒜(ψ*)
};

/// Smallest generalized eigenvalue of (B, A) on mean-zero potentials.
inline KappaAt kappa_from_forms(const QuadraticForm& A, const QuadraticForm& B) {
  const auto n = A.matrix.rows();
  const Matrix P = mean_zero_basis(n);
  const Matrix a = P.transpose() * A.matrix * P;
  const Matrix b = P.transpose() * B.matrix * P;
  Eigen::SelfAdjointEigenSolver<Matrix> ea(a);
  const Vector d = ea.eigenvalues();
  if (!(d.minCoeff() > 0.0) || d.maxCoeff() / d.minCoeff() > 1e12)
    throw NumericalError("kappa_at: action form is singular on mean-zero potentials");
  const Matrix s = ea.eigenvectors() * d.cwiseInverse().cwiseSqrt().asDiagonal();
  Matrix c = s.transpose() * b * s;
  c = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> ec(c);
  KappaAt out;
  out.kappa = ec.eigenvalues()[0];
  Vector psi = P * (s * ec.eigenvectors().col(0));
  psi /= psi.norm();
  const double av = A(psi), bv = B(psi);
  out.residual = std::abs(bv - out.kappa * av) / av;
  out.psi = Potential(psi);
  return out;
}

inline KappaAt kappa_at(const NonlinearMarkovTriple& triple, const Vector& mu) {
  if (!(mu.minCoeff() > 0.0)) throw DomainError("kappa_at: mu must be interior");
  return kappa_from_forms(assemble_A(triple, mu), assemble_B(triple, mu));
}

inline KappaAt kappa_at(const NonlinearMarkovTriple& triple, const ProbabilityMeasure& mu) {
  return kappa_at(triple, mu.weights());
}

// ── infimum over the simplex ────────────────────────────────────────────────

struct KappaOptions {
  std::vector<double> margins{1e-2, 1e-3, 1e-4};
  std::size_t starts = defaults::kappa_starts;
  std::uint64_t seed = defaults::seed;
  std::size_t max_evaluations = 4000;
};

struct MarginEntry {
  double epsilon;
  double kappa_inf;
  ProbabilityMeasure argmin_mu;
  Potential argmin_psi;
};

struct CurvatureReport {
  double kappa_opt = std::numeric_limits<double>::infinity();
  std::optional<ProbabilityMeasure> argmin_mu;
  Potential argmin_psi;
  std::vector<MarginEntry> margin_profile;
  bool certified = false;          // numerical estimate, never a proof
  bool still_decreasing = false;   // profile has not levelled off at the smallest margin
  bool extrapolated = false;       // mean-field model with β > 1
};

namespace detail {

inline Vector margin_map(const Vector& theta, double eps) {
  const auto n = theta.size() + 1;
  return (Vector::Constant(n, eps) + (1.0 - static_cast<double>(n) * eps) * softmax_last_zero(theta, n));
}

// Start points in softmax coordinates: barycenter, shrunk vertices, latin hypercube.
inline std::vector<Vector> kappa_starts(Eigen::Index n, std::size_t count, std::uint64_t seed) {
  std::vector<Vector> s;
  s.push_back(Vector::Zero(n - 1));
  for (Eigen::Index v = 0; v < n; ++v) {
    Vector mu = Vector::Constant(n, 0.1 / static_cast<double>(n));
    mu[v] += 0.9;
    s.push_back(logits(mu));
  }
  const std::size_t lhs = count > s.size() ? count - s.size() : 0;
  if (lhs > 0) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<std::size_t>> perm(static_cast<std::size_t>(n - 1));
    for (auto& p : perm) {
      p.resize(lhs);
      for (std::size_t i = 0; i < lhs; ++i) p[i] = i;
      std::shuffle(p.begin(), p.end(), rng);
    }
    for (std::size_t i = 0; i < lhs; ++i) {
      Vector th(n - 1);
      for (Eigen::Index l = 0; l < n - 1; ++l) {
        const double u = (static_cast<double>(perm[static_cast<std::size_t>(l)][i]) + unit(rng)) / static_cast<double>(lhs);
        th[l] = -4.0 + 8.0 * u;
      }
      s.push_back(th);
    }
  }
  return s;
}

}  // namespace detail

/// Multistart Nelder–Mead minimization of κ(μ) over {μ : min_x μ_x ≥ ε} for each margin ε.
inline CurvatureReport kappa_opt(const NonlinearMarkovTriple& triple, const KappaOptions& opts = {}) {
  const auto n = static_cast<Eigen::Index>(triple.size());
  if (opts.margins.empty()) throw SpecError("kappa_opt: at least one margin is required");
  CurvatureReport rep;
  const auto starts = detail::kappa_starts(n, std::max<std::size_t>(opts.starts, 1), opts.seed);
  for (double eps : opts.margins) {
    if (!(eps > 0.0) || eps * static_cast<double>(n) >= 1.0) throw SpecError("kappa_opt: margin out of range");
    auto f = [&](const Vector& th) {
      try {
        return kappa_at(triple, detail::margin_map(th, eps)).kappa;
      } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    std::vector<optim::Result> runs(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) {
      optim::NelderMeadOptions no;
      no.max_evaluations = opts.max_evaluations;
      no.initial_step = 0.5;
      no.x_tol = 1e-8;
      no.f_tol = 1e-12;
      runs[i] = optim::nelder_mead(f, starts[i], no);
    });
    const auto best = std::min_element(runs.begin(), runs.end(),
                                       [](const auto& a, const auto& b) { return a.value < b.value; });
    const Vector mu = detail::margin_map(best->x, eps);
    const KappaAt k = kappa_at(triple, mu);
    rep.margin_profile.push_back({eps, k.kappa, ProbabilityMeasure::normalized(mu), k.psi});
  }
  for (const auto& e : rep.margin_profile)
    if (e.kappa_inf < rep.kappa_opt) {
      rep.kappa_opt = e.kappa_inf;
      rep.argmin_mu = e.argmin_mu;
      rep.argmin_psi = e.argmin_psi;
    }
  auto sorted = rep.margin_profile;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.epsilon > b.epsilon; });
  if (sorted.size() >= 2) {
    const double last = sorted.back().kappa_inf, prev = sorted[sorted.size() - 2].kappa_inf;
    rep.still_decreasing = last < prev - 1e-6 * std::max(1.0, std::abs(prev));
  }
  const auto& spec = triple.spec();
  rep.extrapolated = triple.family() == ModelFamily::mean_field_pair && spec && spec->beta > 1.0;
  return rep;
}

/// CSV `epsilon,kappa_inf,argmin_mu_0,...` followed by a `# kappa_opt=` summary line.
inline void write_curvature_csv(std::ostream& out, const CurvatureReport& rep) {
  if (rep.margin_profile.empty()) return;
  const std::size_t n = rep.margin_profile.front().argmin_mu.size();
  out << "epsilon,kappa_inf";
  for (std::size_t i = 0; i < n; ++i) out << ",argmin_mu_" << i;
  out << '\n' << std::setprecision(17);
  for (const auto& e : rep.margin_profile) {
    out << e.epsilon << ',' << e.kappa_inf;
    for (std::size_t i = 0; i < n; ++i) out << ',' << e.argmin_mu[i];
    out << '\n';
  }
  out << "# kappa_opt=" << rep.kappa_opt << " certified=false still_decreasing=" << (rep.still_decreasing ? 1 : 0)
      << " extrapolated=" << (rep.extrapolated ? 1 : 0) << '\n';
}

// ── closed forms ────────────────────────────────────────────────────────────

/// Integrand of the two-point formula at μ = (u, 1−u).
inline double two_point_integrand(const NonlinearMarkovTriple& triple, double u) {
  Vector mu(2);
  mu << u, 1.0 - u;
  const Matrix q = triple.Q(mu);
  const auto dq = triple.dQ(mu);
  const double p = q(0, 1), r = q(1, 0);
  const double dp = dq[0](0, 1) - dq[1](0, 1);
  const double dr = dq[1](1, 0) - dq[0](1, 0);
  const double lam = logmean::lambda(u * p, (1.0 - u) * r);
  return 0.5 * (p + r) + 0.5 * (u * dp + (1.0 - u) * dr) + 0.5 * lam * (1.0 / (u * (1.0 - u)) + dp / p + dr / r);
}

/// Infimum of the two-point integrand over μ₀ ∈ (0,1): 10⁴-point grid, then golden section.
inline double two_point_kappa(const NonlinearMarkovTriple& triple) {
  if (triple.size() != 2) throw SpecError("two_point_kappa: model must have exactly 2 states");
  const std::size_t pts = 10000;
  const double lo = 0.5 / static_cast<double>(pts), hi = 1.0 - lo;
  return optim::grid_then_golden([&](double u) { return two_point_integrand(triple, u); }, lo, hi, pts).value;
}

struct SeparableBound {
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double kappa_bound = std::numeric_limits<double>::quiet_NaN();
  bool applicable = false;
  std::string diagnostic;
  double a_min = 0, a_max = 0, b_min = 0, b_max = 0, lip_a = 0, lip_b = 0;
  std::size_t d = 0;
};

/// Curvature bound for Q(μ;x,y) = b(μ_x)a(μ_y) on the complete graph with d = n.
inline SeparableBound separable_bound(const Polynomial& a, const Polynomial& b, std::size_t n) {
  SeparableBound s;
  s.d = n;
  std::tie(s.a_min, s.a_max) = a.extrema();
  std::tie(s.b_min, s.b_max) = b.extrema();
  s.lip_a = a.lipschitz();
  s.lip_b = b.lipschitz();
  const double zero_tol = 1e-12;
  if (s.a_min < -zero_tol || s.b_min < -zero_tol) throw SpecError("separable_bound: a and b must be nonnegative on [0,1]");
  if (s.a_max <= zero_tol || s.b_max <= zero_tol) throw SpecError("separable_bound: a and b must be positive");
  if (s.a_min <= zero_tol || s.b_min <= zero_tol) {
    s.diagnostic = "min a or min b vanishes on [0,1]; lambda is undefined";
    return s;
  }
  s.lambda = (2.0 * s.a_max * s.lip_b + s.a_max * s.lip_a) / (2.0 * s.a_min * s.b_min);
  s.kappa_bound = static_cast<double>(n) *
                  (s.a_min * s.b_min - (1.0 + s.lambda) * s.a_max * s.b_max / 2.0 -
                   (s.a_max / 2.0) * (2.0 + s.b_max / s.b_min) * s.lip_b -
                   (s.b_max / 2.0) * (1.0 + s.a_max / s.a_min) * s.lip_a);
  s.applicable = s.lambda <= 1.0;
  if (!s.applicable) s.diagnostic = "lambda > 1";
  return s;
}

}  // namespace mfcurv
