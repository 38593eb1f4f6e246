#pragma once

// Nonlinear Markov triples (X, Q, π): a measure-dependent rate matrix Q(μ)
// reversible with respect to the local Gibbs measure π(μ) ∝ exp(−H(μ)),
// where H = ∂U/∂μ and U(μ) = Σ_x μ_x K_x(μ).
//
// Partial derivatives ∂_{μ_z}Q are taken in one fixed linear extension off
// the simplex. Consumers only ever contract them against zero-sum vectors
// or use differences ∂_{μ_z} − ∂_{μ_w}, so the choice of extension never
// leaks into results.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "mfcurv/errors.hpp"
#include "mfcurv/polynomial.hpp"
#include "mfcurv/random.hpp"
#include "mfcurv/simplex.hpp"

namespace mfcurv {

enum class ModelFamily { mean_field_pair, separable, linear, tabulated };
enum class RateRule { glauber_sqrt, metropolis };

/// Serializable description of a model (see model_spec.hpp for the file format).
struct ModelSpec {
  std::vector<std::string> states;
  ModelFamily family = ModelFamily::mean_field_pair;
  // mean_field_pair
  Vector V;
  Matrix W;
  double beta = 0.0;
  Matrix base_weights;
  RateRule rate_rule = RateRule::glauber_sqrt;
  // separable
  Polynomial a_poly;
  Polynomial b_poly;
  // linear
  Matrix Q;
  Vector pi;
};

/// Evaluators behind a triple. Implementations are immutable.
class RateModel {
 public:
  virtual ~RateModel() = default;
  virtual Vector potential(const Vector& mu) const = 0;    // K_x(μ)
  virtual double energy(const Vector& mu) const = 0;       // U(μ)
  virtual Vector hamiltonian(const Vector& mu) const = 0;  // H_x(μ) = ∂U/∂μ_x
  virtual Matrix rates(const Vector& mu) const = 0;        // Q(μ)
  /// dQ[z](x,y) = ∂_{μ_z} Q_xy(μ).
  virtual std::vector<Matrix> rate_derivatives(const Vector& mu) const = 0;
  virtual bool is_linear() const { return false; }
};

class NonlinearMarkovTriple {
 public:
  NonlinearMarkovTriple(StateSpace space, ModelFamily family, std::shared_ptr<const RateModel> model,
                        std::optional<ModelSpec> spec = std::nullopt)
      : space_(std::move(space)), family_(family), model_(std::move(model)), spec_(std::move(spec)) {}

  std::size_t size() const { return space_.size(); }
  const StateSpace& state_space() const { return space_; }
  ModelFamily family() const { return family_; }
  const std::optional<ModelSpec>& spec() const { return spec_; }
  bool is_linear() const { return model_->is_linear(); }

  Vector K(const Vector& mu) const { return model_->potential(mu); }
  double U(const Vector& mu) const { return model_->energy(mu); }
  Vector H(const Vector& mu) const { return model_->hamiltonian(mu); }
  double Z(const Vector& mu) const { return (-H(mu)).array().exp().sum(); }
  Vector pi(const Vector& mu) const {
    const Vector h = H(mu);
    Vector e = (-(h.array() - h.minCoeff())).exp().matrix();
    return e / e.sum();
  }
  Matrix Q(const Vector& mu) const { return model_->rates(mu); }
  std::vector<Matrix> dQ(const Vector& mu) const { return model_->rate_derivatives(mu); }

  Vector K(const ProbabilityMeasure& mu) const { return K(mu.weights()); }
  double U(const ProbabilityMeasure& mu) const { return U(mu.weights()); }
  Vector H(const ProbabilityMeasure& mu) const { return H(mu.weights()); }
  double Z(const ProbabilityMeasure& mu) const { return Z(mu.weights()); }
  Vector pi(const ProbabilityMeasure& mu) const { return pi(mu.weights()); }
  Matrix Q(const ProbabilityMeasure& mu) const { return Q(mu.weights()); }
  std::vector<Matrix> dQ(const ProbabilityMeasure& mu) const { return dQ(mu.weights()); }

 private:
  StateSpace space_;
  ModelFamily family_;
  std::shared_ptr<const RateModel> model_;
  std::optional<ModelSpec> spec_;
};

// ── helpers ─────────────────────────────────────────────────────────────────

namespace detail {

inline void fill_diagonal(Matrix& q) {
  for (Eigen::Index x = 0; x < q.rows(); ++x) {
    q(x, x) = 0.0;
    q(x, x) = -q.row(x).sum();
  }
}

inline bool is_symmetric(const Matrix& m, double tolerance) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tolerance;
}

}  // namespace detail

/// Whether the graph with edges {x,y : support(x,y) > 0 or support(y,x) > 0} is connected.
inline bool support_connected(const Matrix& support) {
  const auto n = support.rows();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::queue<Eigen::Index> todo;
  todo.push(0);
  seen[0] = true;
  Eigen::Index count = 1;
  while (!todo.empty()) {
    const auto x = todo.front();
    todo.pop();
    for (Eigen::Index y = 0; y < n; ++y) {
      if (y == x || seen[static_cast<std::size_t>(y)]) continue;
      if (support(x, y) > 0.0 || support(y, x) > 0.0) {
        seen[static_cast<std::size_t>(y)] = true;
        ++count;
        todo.push(y);
      }
    }
  }
  return count == n;
}

// ── mean-field pair interaction ─────────────────────────────────────────────

namespace detail {

// K_x(ν) = V_x + β Σ_y W_xy ν_y with Glauber or Metropolis rates over a base graph.
class MeanFieldPairModel final : public RateModel {
 public:
  MeanFieldPairModel(Vector v, Matrix w, double beta, Matrix base, RateRule rule)
      : v_(std::move(v)), w_(std::move(w)), beta_(beta), base_(std::move(base)), rule_(rule) {}

  Vector potential(const Vector& mu) const override { return v_ + beta_ * w_ * mu; }
  double energy(const Vector& mu) const override { return mu.dot(v_) + beta_ * mu.dot(w_ * mu); }
  Vector hamiltonian(const Vector& mu) const override { return v_ + 2.0 * beta_ * w_ * mu; }

  Matrix rates(const Vector& mu) const override {
    const Vector h = hamiltonian(mu);
    const auto n = h.size();
    Matrix q = Matrix::Zero(n, n);
    for (Eigen::Index x = 0; x < n; ++x)
      for (Eigen::Index y = 0; y < n; ++y) {
        if (x == y || base_(x, y) == 0.0) continue;
        q(x, y) = base_(x, y) * factor(h[x] - h[y]);
      }
    fill_diagonal(q);
    return q;
  }

  std::vector<Matrix> rate_derivatives(const Vector& mu) const override {
    const Vector h = hamiltonian(mu);
    const auto n = h.size();
    std::vector<Matrix> dq(static_cast<std::size_t>(n), Matrix::Zero(n, n));
    for (Eigen::Index x = 0; x < n; ++x)
      for (Eigen::Index y = 0; y < n; ++y) {
        if (x == y || base_(x, y) == 0.0) continue;
        const double d = h[x] - h[y];
        const double slope = base_(x, y) * dfactor(d);
        if (slope == 0.0) continue;
        // ∂_z (H_x − H_y) = 2β (W_xz − W_yz)
        for (Eigen::Index z = 0; z < n; ++z)
          dq[static_cast<std::size_t>(z)](x, y) = slope * 2.0 * beta_ * (w_(x, z) - w_(y, z));
      }
    for (auto& m : dq) fill_diagonal(m);
    return dq;
  }

 private:
  // Rate multiplier as a function of H_x − H_y: √(π_y/π_x) or min(1, π_y/π_x).
  double factor(double d) const {
    if (rule_ == RateRule::glauber_sqrt) return std::exp(0.5 * d);
    return d < 0.0 ? std::exp(d) : 1.0;
  }
  double dfactor(double d) const {
    if (rule_ == RateRule::glauber_sqrt) return 0.5 * std::exp(0.5 * d);
    return d < 0.0 ? std::exp(d) : 0.0;
  }

  Vector v_;
  Matrix w_;
  double beta_;
  Matrix base_;
  RateRule rule_;
};

// Q(μ; x,y) = b(μ_x) a(μ_y) on the complete graph.
class SeparableModel final : public RateModel {
 public:
  SeparableModel(Polynomial a, Polynomial b) : a_(std::move(a)), b_(std::move(b)), da_(a_.derivative()), db_(b_.derivative()) {}

  /// u(r) = ∫_r^1 log(a(s)/b(s)) ds.
  double u(double r) const {
    if (r == 1.0) return 0.0;
    auto f = [this](double s) { return std::log(a_(s) / b_(s)); };
    double err = 0.0;
    const double val = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, r, 1.0, 30, 1e-12, &err);
    return val;
  }

  Vector potential(const Vector& mu) const override {
    Vector k(mu.size());
    for (Eigen::Index x = 0; x < mu.size(); ++x) k[x] = u(mu[x]) / mu[x];
    return k;
  }
  double energy(const Vector& mu) const override {
    double s = 0.0;
    for (Eigen::Index x = 0; x < mu.size(); ++x) s += u(mu[x]);
    return s;
  }
  Vector hamiltonian(const Vector& mu) const override {
    Vector h(mu.size());
    for (Eigen::Index x = 0; x < mu.size(); ++x) h[x] = -std::log(a_(mu[x]) / b_(mu[x]));
    return h;
  }
  Matrix rates(const Vector& mu) const override {
    const auto n = mu.size();
    Matrix q(n, n);
    for (Eigen::Index x = 0; x < n; ++x)
      for (Eigen::Index y = 0; y < n; ++y) q(x, y) = x == y ? 0.0 : b_(mu[x]) * a_(mu[y]);
    fill_diagonal(q);
    return q;
  }
  std::vector<Matrix> rate_derivatives(const Vector& mu) const override {
    const auto n = mu.size();
    std::vector<Matrix> dq(static_cast<std::size_t>(n), Matrix::Zero(n, n));
    for (Eigen::Index x = 0; x < n; ++x)
      for (Eigen::Index y = 0; y < n; ++y) {
        if (x == y) continue;
        dq[static_cast<std::size_t>(x)](x, y) += db_(mu[x]) * a_(mu[y]);
        dq[static_cast<std::size_t>(y)](x, y) += b_(mu[x]) * da_(mu[y]);
      }
    for (auto& m : dq) fill_diagonal(m);
    return dq;
  }

 private:
  Polynomial a_, b_, da_, db_;
};

class LinearModel final : public RateModel {
 public:
  LinearModel(Matrix q, Vector pi) : q_(std::move(q)), pi_(std::move(pi)), logpi_(pi_.array().log().matrix()) {}

  Vector potential(const Vector&) const override { return -logpi_; }
  double energy(const Vector& mu) const override { return -mu.dot(logpi_); }
  Vector hamiltonian(const Vector&) const override { return -logpi_; }
  Matrix rates(const Vector&) const override { return q_; }
  std::vector<Matrix> rate_derivatives(const Vector& mu) const override {
    return std::vector<Matrix>(static_cast<std::size_t>(mu.size()), Matrix::Zero(mu.size(), mu.size()));
  }
  bool is_linear() const override { return true; }

 private:
  Matrix q_;
  Vector pi_;
  Vector logpi_;
};

}  // namespace detail

/// Callbacks for the test-only tabulated family. `rate_derivatives` is mandatory.
struct TabulatedModel {
  std::function<double(const Vector&)> energy;
  std::function<Vector(const Vector&)> hamiltonian;
  std::function<Matrix(const Vector&)> rates;
  std::function<std::vector<Matrix>(const Vector&)> rate_derivatives;
  /// Optional; defaults to K_x = U(μ), which reproduces U = Σ μ_x K_x on the simplex.
  std::function<Vector(const Vector&)> potential;
  bool linear = false;
};

namespace detail {

class TabulatedRateModel final : public RateModel {
 public:
  explicit TabulatedRateModel(TabulatedModel m) : m_(std::move(m)) {}
  Vector potential(const Vector& mu) const override {
    if (m_.potential) return m_.potential(mu);
    return Vector::Constant(mu.size(), m_.energy(mu));
  }
  double energy(const Vector& mu) const override { return m_.energy(mu); }
  Vector hamiltonian(const Vector& mu) const override { return m_.hamiltonian(mu); }
  Matrix rates(const Vector& mu) const override { return m_.rates(mu); }
  std::vector<Matrix> rate_derivatives(const Vector& mu) const override { return m_.rate_derivatives(mu); }
  bool is_linear() const override { return m_.linear; }

 private:
  TabulatedModel m_;
};

}  // namespace detail

// ── builders ────────────────────────────────────────────────────────────────

inline NonlinearMarkovTriple build_mean_field_pair(const Vector& V, const Matrix& W, double beta,
                                                   const Matrix& base_weights,
                                                   RateRule rule = RateRule::glauber_sqrt,
                                                   std::vector<std::string> labels = {}) {
  const auto n = V.size();
  if (n < 2) throw SpecError("mean_field_pair: need at least 2 states");
  if (W.rows() != n || W.cols() != n) throw SpecError("mean_field_pair: W must be n x n");
  if (base_weights.rows() != n || base_weights.cols() != n)
    throw SpecError("mean_field_pair: base_weights must be n x n");
  if (!std::isfinite(beta) || beta < 0.0) throw SpecError("mean_field_pair: beta must be a nonnegative real");
  if (!detail::is_symmetric(W, 1e-12)) throw SpecError("mean_field_pair: W must be symmetric");
  if (!detail::is_symmetric(base_weights, 1e-12)) throw SpecError("mean_field_pair: base_weights must be symmetric");
  if (base_weights.minCoeff() < 0.0) throw SpecError("mean_field_pair: base_weights must be nonnegative");
  for (Eigen::Index i = 0; i < n; ++i)
    if (base_weights(i, i) != 0.0) throw SpecError("mean_field_pair: base_weights must have zero diagonal");
  if (!support_connected(base_weights)) throw SpecError("mean_field_pair: base graph is disconnected");

  if (labels.empty()) labels = StateSpace(static_cast<std::size_t>(n)).labels();
  StateSpace space(labels);
  if (space.size() != static_cast<std::size_t>(n)) throw SpecError("mean_field_pair: label count mismatch");

  ModelSpec spec;
  spec.states = space.labels();
  spec.family = ModelFamily::mean_field_pair;
  spec.V = V;
  spec.W = W;
  spec.beta = beta;
  spec.base_weights = base_weights;
  spec.rate_rule = rule;
  auto model = std::make_shared<detail::MeanFieldPairModel>(V, W, beta, base_weights, rule);
  return NonlinearMarkovTriple(std::move(space), ModelFamily::mean_field_pair, std::move(model), std::move(spec));
}

inline NonlinearMarkovTriple build_separable(const Polynomial& a, const Polynomial& b, std::size_t n,
                                             std::vector<std::string> labels = {}) {
  if (n < 2) throw SpecError("separable: need at least 2 states");
  if (a.extrema().first <= 0.0) throw SpecError("separable: a must be strictly positive on [0,1]");
  if (b.extrema().first <= 0.0) throw SpecError("separable: b must be strictly positive on [0,1]");
  if (labels.empty()) labels = StateSpace(n).labels();
  StateSpace space(labels);
  if (space.size() != n) throw SpecError("separable: label count mismatch");

  ModelSpec spec;
  spec.states = space.labels();
  spec.family = ModelFamily::separable;
  spec.a_poly = a;
  spec.b_poly = b;
  auto model = std::make_shared<detail::SeparableModel>(a, b);
  return NonlinearMarkovTriple(std::move(space), ModelFamily::separable, std::move(model), std::move(spec));
}

/// Constant-rate chain. The diagonal of Q is recomputed from the off-diagonal rates.
inline NonlinearMarkovTriple build_linear(const Matrix& Q, const Vector& pi, std::vector<std::string> labels = {}) {
  const auto n = pi.size();
  if (n < 2) throw SpecError("linear: need at least 2 states");
  if (Q.rows() != n || Q.cols() != n) throw SpecError("linear: Q must be n x n");
  if (pi.minCoeff() <= 0.0 || std::abs(pi.sum() - 1.0) > 1e-10)
    throw SpecError("linear: pi must be a strictly positive probability vector");
  Matrix q = Q;
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y)
      if (x != y && q(x, y) < 0.0) throw SpecError("linear: off-diagonal rates must be nonnegative");
  detail::fill_diagonal(q);
  if (!support_connected(q)) throw SpecError("linear: Q is not irreducible");
  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = x + 1; y < n; ++y)
      if (std::abs(pi[x] * q(x, y) - pi[y] * q(y, x)) > 1e-10 * scale)
        throw SpecError("linear: Q is not reversible with respect to pi");

  if (labels.empty()) labels = StateSpace(static_cast<std::size_t>(n)).labels();
  StateSpace space(labels);
  if (space.size() != static_cast<std::size_t>(n)) throw SpecError("linear: label count mismatch");
  ModelSpec spec;
  spec.states = space.labels();
  spec.family = ModelFamily::linear;
  spec.Q = q;
  spec.pi = pi;
  auto model = std::make_shared<detail::LinearModel>(q, pi);
  return NonlinearMarkovTriple(std::move(space), ModelFamily::linear, std::move(model), std::move(spec));
}

inline NonlinearMarkovTriple build_tabulated(StateSpace space, TabulatedModel callbacks) {
  if (!callbacks.energy || !callbacks.hamiltonian || !callbacks.rates || !callbacks.rate_derivatives)
    throw SpecError("tabulated: energy, hamiltonian, rates and rate_derivatives callbacks are required");
  auto model = std::make_shared<detail::TabulatedRateModel>(std::move(callbacks));
  return NonlinearMarkovTriple(std::move(space), ModelFamily::tabulated, std::move(model));
}

/// Builds a triple from a parsed specification.
inline NonlinearMarkovTriple build(const ModelSpec& spec) {
  switch (spec.family) {
    case ModelFamily::mean_field_pair:
      return build_mean_field_pair(spec.V, spec.W, spec.beta, spec.base_weights, spec.rate_rule, spec.states);
    case ModelFamily::separable:
      return build_separable(spec.a_poly, spec.b_poly, spec.states.size(), spec.states);
    case ModelFamily::linear:
      return build_linear(spec.Q, spec.pi, spec.states);
    case ModelFamily::tabulated:
      break;
  }
  throw SpecError("tabulated models cannot be built from a specification");
}

// ── zoo ─────────────────────────────────────────────────────────────────────

/// Two-state Curie–Weiss model: V = 0, W = [[0,1],[1,0]], unit base weights.
inline NonlinearMarkovTriple curie_weiss(double beta, RateRule rule = RateRule::glauber_sqrt) {
  Matrix w(2, 2);
  w << 0.0, 1.0, 1.0, 0.0;
  return build_mean_field_pair(Vector::Zero(2), w, beta, w, rule);
}

/// Two-state chain with Q_01 = p, Q_10 = q.
inline NonlinearMarkovTriple two_point_linear(double p, double q) {
  if (!(p > 0.0) || !(q > 0.0)) throw SpecError("two-point chain: rates must be positive");
  Matrix m(2, 2);
  m << -p, p, q, -q;
  Vector pi(2);
  pi << q / (p + q), p / (p + q);
  return build_linear(m, pi);
}

/// Complete graph with identical rates and uniform equilibrium.
inline NonlinearMarkovTriple complete_graph_linear(std::size_t n, double rate = 1.0) {
  Matrix q = Matrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), rate);
  return build_linear(q, Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
}

// ── validation ──────────────────────────────────────────────────────────────

struct ValidationReport {
  std::size_t samples = 0;
  double max_detailed_balance = 0.0;
  double max_row_sum = 0.0;
  double min_off_diagonal = 0.0;
  bool irreducible = true;
  double max_dq_error = 0.0;
  double max_h_error = 0.0;

  double algebraic_tol = tol::identity;
  double fd_tol = tol::finite_difference;

  bool detailed_balance_ok() const { return max_detailed_balance <= algebraic_tol; }
  bool row_sums_ok() const { return max_row_sum <= algebraic_tol && min_off_diagonal >= 0.0; }
  bool dq_ok() const { return max_dq_error <= fd_tol; }
  bool h_ok() const { return max_h_error <= fd_tol; }
  bool passed() const { return detailed_balance_ok() && row_sums_ok() && irreducible && dq_ok() && h_ok(); }
};

/// Samples interior measures and checks the defining properties of a triple:
/// rate-matrix structure, irreducibility, detailed balance w.r.t. π(μ), and
/// consistency of dQ and H with central finite differences of Q and U along
/// zero-sum directions e_x − e_y.
inline ValidationReport validate(const NonlinearMarkovTriple& triple, std::size_t n_samples,
                                 std::uint64_t seed = defaults::seed) {
  ValidationReport rep;
  rep.samples = n_samples;
  rep.min_off_diagonal = std::numeric_limits<double>::infinity();
  const auto n = static_cast<Eigen::Index>(triple.size());
  Rng rng(seed);
  const double h = tol::fd_step;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Vector mu = sample_dirichlet(rng, triple.size(), 1.0, 1e-3).weights();
    const Matrix q = triple.Q(mu);
    const Vector pi = triple.pi(mu);
    const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
    for (Eigen::Index x = 0; x < n; ++x) {
      rep.max_row_sum = std::max(rep.max_row_sum, std::abs(q.row(x).sum()) / scale);
      for (Eigen::Index y = 0; y < n; ++y) {
        if (x == y) continue;
        rep.min_off_diagonal = std::min(rep.min_off_diagonal, q(x, y));
        rep.max_detailed_balance =
            std::max(rep.max_detailed_balance, std::abs(pi[x] * q(x, y) - pi[y] * q(y, x)) / scale);
      }
    }
    if (!support_connected(q - Matrix(q.diagonal().asDiagonal()))) rep.irreducible = false;

    const auto dq = triple.dQ(mu);
    const Vector hx = triple.H(mu);
    for (Eigen::Index x = 0; x < n; ++x)
      for (Eigen::Index y = x + 1; y < n; ++y) {
        Vector sigma = Vector::Zero(n);
        sigma[x] = 1.0;
        sigma[y] = -1.0;
        const Matrix fd = (triple.Q(Vector(mu + h * sigma)) - triple.Q(Vector(mu - h * sigma))) / (2.0 * h);
        Matrix an = Matrix::Zero(n, n);
        for (Eigen::Index z = 0; z < n; ++z) an += sigma[z] * dq[static_cast<std::size_t>(z)];
        Matrix diff = fd - an;
        diff.diagonal().setZero();
        rep.max_dq_error = std::max(rep.max_dq_error, diff.cwiseAbs().maxCoeff() / scale);

        const double fdu = (triple.U(Vector(mu + h * sigma)) - triple.U(Vector(mu - h * sigma))) / (2.0 * h);
        rep.max_h_error = std::max(rep.max_h_error, std::abs(fdu - (hx[x] - hx[y])));
      }
  }
  if (n_samples == 0) rep.min_off_diagonal = 0.0;
  return rep;
}

}  // namespace mfcurv
