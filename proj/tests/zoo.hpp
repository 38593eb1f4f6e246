#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mfcurv/models.hpp"

namespace zoo {

using namespace mfcurv;

inline Matrix random_symmetric(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(lo, hi);
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = i; j < w.cols(); ++j) w(i, j) = w(j, i) = U(rng);
  return w;
}

inline NonlinearMarkovTriple random_mean_field(std::size_t n, std::uint64_t seed, double beta = 0.7,
                                               RateRule rule = RateRule::glauber_sqrt) {
  Matrix base = random_symmetric(n, seed + 100, 0.5, 2.0);
  base.diagonal().setZero();
  std::mt19937_64 rng(seed + 7);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = U(rng);
  return build_mean_field_pair(v, random_symmetric(n, seed), beta, base, rule);
}

/// Random reversible chain from a random π and symmetric conductances.
inline NonlinearMarkovTriple random_linear(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.2, 1.0);
  Vector pi(static_cast<Eigen::Index>(n));
  for (auto& x : pi) x = U(rng);
  pi /= pi.sum();
  const Matrix c = random_symmetric(n, seed + 1, 0.1, 1.0);
  Matrix q(pi.size(), pi.size());
  for (Eigen::Index x = 0; x < q.rows(); ++x)
    for (Eigen::Index y = 0; y < q.cols(); ++y) q(x, y) = x == y ? 0.0 : c(x, y) / pi[x];
  return build_linear(q, pi);
}

inline std::vector<std::pair<std::string, NonlinearMarkovTriple>> all() {
  std::vector<std::pair<std::string, NonlinearMarkovTriple>> z;
  z.emplace_back("curie-weiss-0.5", curie_weiss(0.5));
  z.emplace_back("curie-weiss-1.5", curie_weiss(1.5));
  z.emplace_back("curie-weiss-metropolis-0.3", curie_weiss(0.3, RateRule::metropolis));
  z.emplace_back("mean-field-4", random_mean_field(4, 11));
  z.emplace_back("mean-field-metropolis-5", random_mean_field(5, 12, 0.4, RateRule::metropolis));
  z.emplace_back("separable-3", build_separable(Polynomial{20.0, 1.0}, Polynomial{1.0}, 3));
  z.emplace_back("zero-range-5", build_separable(Polynomial{1.0}, Polynomial{1.0, 0.5}, 5));
  z.emplace_back("two-point-linear", two_point_linear(1.0, 2.0));
  z.emplace_back("linear-4", random_linear(4, 13));
  z.emplace_back("complete-graph-3", complete_graph_linear(3));
  return z;
}

}  // namespace zoo
