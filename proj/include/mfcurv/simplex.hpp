#pragma once

// Calculus on a finite state space: probability measures, potentials,
// discrete gradient/divergence and the vertex/edge inner products.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mfcurv/config.hpp"
#include "mfcurv/errors.hpp"

namespace mfcurv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class StateSpace {
 public:
  explicit StateSpace(std::size_t n) : StateSpace(default_labels(n)) {}

  explicit StateSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.size() < 2) throw SpecError("state space needs at least 2 states");
    std::set<std::string> seen(labels_.begin(), labels_.end());
    if (seen.size() != labels_.size()) throw SpecError("state labels must be unique");
  }

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  bool operator==(const StateSpace&) const = default;

 private:
  static std::vector<std::string> default_labels(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
    return out;
  }

  std::vector<std::string> labels_;
};

/// A point of the probability simplex.
class ProbabilityMeasure {
 public:
  explicit ProbabilityMeasure(Vector weights, double tolerance = tol::construction)
      : w_(std::move(weights)) {
    if (w_.size() < 2) throw SpecError("measure needs at least 2 states");
    for (Eigen::Index i = 0; i < w_.size(); ++i) {
      if (!std::isfinite(w_[i]) || w_[i] < 0.0)
        throw DomainError("measure weights must be finite and nonnegative");
    }
    if (std::abs(w_.sum() - 1.0) > tolerance) throw DomainError("measure weights must sum to 1");
  }

  ProbabilityMeasure(std::initializer_list<double> w)
      : ProbabilityMeasure(Eigen::Map<const Vector>(w.begin(), static_cast<Eigen::Index>(w.size()))) {}

  /// Normalizes a nonnegative, non-zero vector onto the simplex.
  static ProbabilityMeasure normalized(const Vector& v) {
    const double s = v.sum();
    if (!(s > 0.0)) throw DomainError("cannot normalize a vector with nonpositive mass");
    return ProbabilityMeasure(v / s);
  }

  static ProbabilityMeasure uniform(std::size_t n) {
    return ProbabilityMeasure(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
  }

  /// Membership in the interior with the given margin (all weights >= margin > 0).
  bool is_interior(double margin = 0.0) const {
    if (margin <= 0.0) return w_.minCoeff() > 0.0;
    return w_.minCoeff() >= margin;
  }

  std::size_t size() const { return static_cast<std::size_t>(w_.size()); }
  double operator[](std::size_t i) const { return w_[static_cast<Eigen::Index>(i)]; }
  const Vector& weights() const { return w_; }

 private:
  Vector w_;
};

/// Function on the state space; meaningful only up to additive constants.
class Potential {
 public:
  Potential() = default;
  explicit Potential(Vector values) : v_(std::move(values)) {}
  Potential(std::initializer_list<double> v)
      : v_(Eigen::Map<const Vector>(v.begin(), static_cast<Eigen::Index>(v.size()))) {}

  static Potential zero(std::size_t n) { return Potential(Vector::Zero(static_cast<Eigen::Index>(n))); }

  /// Representative with zero mean.
  Potential canonical() const { return Potential((v_.array() - v_.mean()).matrix()); }

  bool equivalent(const Potential& other, double tolerance = tol::construction) const {
    if (other.v_.size() != v_.size()) return false;
    return (canonical().v_ - other.canonical().v_).cwiseAbs().maxCoeff() <= tolerance;
  }

  std::size_t size() const { return static_cast<std::size_t>(v_.size()); }
  double operator[](std::size_t i) const { return v_[static_cast<Eigen::Index>(i)]; }
  const Vector& values() const { return v_; }

 private:
  Vector v_;
};

/// Direction along the simplex (zero total mass).
class TangentVector {
 public:
  explicit TangentVector(Vector values, double tolerance = tol::construction) : v_(std::move(values)) {
    const double scale = std::max(1.0, v_.cwiseAbs().sum());
    if (std::abs(v_.sum()) > tolerance * scale) throw DomainError("tangent vector must sum to zero");
  }
  TangentVector(std::initializer_list<double> v)
      : TangentVector(Eigen::Map<const Vector>(v.begin(), static_cast<Eigen::Index>(v.size()))) {}

  std::size_t size() const { return static_cast<std::size_t>(v_.size()); }
  double operator[](std::size_t i) const { return v_[static_cast<Eigen::Index>(i)]; }
  const Vector& values() const { return v_; }

 private:
  Vector v_;
};

enum class Symmetry { symmetric, antisymmetric, none };

/// Function on ordered pairs of states with zero diagonal.
class EdgeField {
 public:
  explicit EdgeField(Matrix values, Symmetry tag = Symmetry::none, double tolerance = tol::construction)
      : m_(std::move(values)), tag_(tag) {
    if (m_.rows() != m_.cols()) throw SpecError("edge field must be square");
    for (Eigen::Index i = 0; i < m_.rows(); ++i) {
      if (std::abs(m_(i, i)) > tolerance) throw DomainError("edge field diagonal must vanish");
      m_(i, i) = 0.0;
    }
    const double sign = tag == Symmetry::symmetric ? 1.0 : -1.0;
    if (tag != Symmetry::none) {
      for (Eigen::Index i = 0; i < m_.rows(); ++i)
        for (Eigen::Index j = i + 1; j < m_.cols(); ++j)
          if (std::abs(m_(i, j) - sign * m_(j, i)) > tolerance)
            throw DomainError(tag == Symmetry::symmetric ? "edge field is not symmetric"
                                                         : "edge field is not antisymmetric");
    }
  }

  std::size_t size() const { return static_cast<std::size_t>(m_.rows()); }
  double operator()(std::size_t x, std::size_t y) const {
    return m_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
  }
  const Matrix& values() const { return m_; }
  Symmetry symmetry() const { return tag_; }

 private:
  Matrix m_;
  Symmetry tag_;
};

// ── discrete calculus ───────────────────────────────────────────────────────

/// ∇ψ_xy = ψ_y − ψ_x.
inline Matrix gradient_matrix(const Vector& psi) {
  const auto n = psi.size();
  Matrix g(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) g(x, y) = psi[y] - psi[x];
  return g;
}

inline EdgeField gradient(const Potential& psi) {
  return EdgeField(gradient_matrix(psi.values()), Symmetry::antisymmetric);
}

/// (∇·Ψ)_x = ½ Σ_y (Ψ_xy − Ψ_yx).
inline Vector divergence_vector(const Matrix& field) {
  return 0.5 * (field - field.transpose()).rowwise().sum();
}

inline TangentVector divergence(const EdgeField& field) {
  return TangentVector(divergence_vector(field.values()));
}

inline double vertex_inner(const Vector& phi, const Vector& psi) {
  if (phi.size() != psi.size()) throw SpecError("vertex_inner: dimension mismatch");
  return phi.dot(psi);
}

inline double vertex_inner(const Potential& phi, const Potential& psi) {
  return vertex_inner(phi.values(), psi.values());
}

/// ⟨Ψ,Φ⟩ = ½ Σ_{x,y} Ψ_xy Φ_xy.
inline double edge_inner(const Matrix& phi, const Matrix& psi) {
  if (phi.rows() != psi.rows() || phi.cols() != psi.cols()) throw SpecError("edge_inner: dimension mismatch");
  return 0.5 * phi.cwiseProduct(psi).sum();
}

inline double edge_inner(const EdgeField& phi, const EdgeField& psi) {
  return edge_inner(phi.values(), psi.values());
}

/// Graph Laplacian of a symmetric weight matrix: ψᵀ L ψ = ½ Σ_{x,y} W_xy (ψ_y − ψ_x)².
inline Matrix laplacian(const Matrix& weights) {
  Matrix w = weights;
  w.diagonal().setZero();
  Matrix lap = -w;
  lap.diagonal() = w.rowwise().sum();
  return lap;
}

/// Orthonormal basis of the mean-zero subspace of R^n (columns).
inline Matrix mean_zero_basis(Eigen::Index n) {
  // Householder-free construction: QR of [1 | I] and drop the first column.
  Matrix m(n, n);
  m.col(0).setOnes();
  for (Eigen::Index j = 1; j < n; ++j) {
    m.col(j).setZero();
    m(j - 1, j) = 1.0;
  }
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ();
  return q.rightCols(n - 1);
}

}  // namespace mfcurv
