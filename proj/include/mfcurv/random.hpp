#pragma once

// Seeded samplers on the simplex. Every sampler is a pure function of its
// seed so that batch work can be split across threads deterministically.

#include <cstdint>
#include <random>

#include "mfcurv/simplex.hpp"

namespace mfcurv {

using Rng = std::mt19937_64;

/// Independent per-item seed derived from a base seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Dirichlet(alpha,...,alpha) sample; rejection-truncated to min weight >= floor.
inline ProbabilityMeasure sample_dirichlet(Rng& rng, std::size_t n, double alpha, double floor = 0.0) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  Vector v(static_cast<Eigen::Index>(n));
  for (int attempt = 0; attempt < 100000; ++attempt) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gamma(rng);
    const double s = v.sum();
    if (!(s > 0.0)) continue;
    v /= s;
    if (v.minCoeff() >= floor) {
      v /= v.sum();
      return ProbabilityMeasure(v);
    }
  }
  throw NumericalError("dirichlet sampler: truncation floor rejects every sample");
}

/// Sampler configuration: Dirichlet(alpha) truncated to min weight >= floor.
struct DirichletSampler {
  double alpha = 1.0;
  double floor = 1e-4;

  ProbabilityMeasure operator()(Rng& rng, std::size_t n) const { return sample_dirichlet(rng, n, alpha, floor); }
};

}  // namespace mfcurv
