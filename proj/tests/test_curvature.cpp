#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mfcurv/curvature.hpp"
#include "mfcurv/dynamics.hpp"
#include "oracles.hpp"
#include "zoo.hpp"

using namespace mfcurv;

namespace {

Vector random_psi(std::mt19937_64& g, Eigen::Index n) {
  std::normal_distribution<double> N;
  Vector v(n);
  for (auto& x : v) x = N(g);
  return v;
}

// same model, with an arbitrary c(x,y) added to every derivative slice
NonlinearMarkovTriple gauge_shifted(const NonlinearMarkovTriple& t, const Matrix& c) {
  TabulatedModel tm;
  tm.energy = [t](const Vector& mu) { return t.U(mu); };
  tm.hamiltonian = [t](const Vector& mu) { return t.H(mu); };
  tm.potential = [t](const Vector& mu) { return t.K(mu); };
  tm.rates = [t](const Vector& mu) { return t.Q(mu); };
  tm.rate_derivatives = [t, c](const Vector& mu) {
    auto dq = t.dQ(mu);
    for (auto& m : dq) {
      m += c;
      for (Eigen::Index x = 0; x < m.rows(); ++x) {
        m(x, x) = 0.0;
        m(x, x) = -m.row(x).sum();
      }
    }
    return dq;
  };
  return build_tabulated(t.state_space(), tm);
}

}  // namespace

TEST(FormA, MatchesAction) {
  std::mt19937_64 g(1);
  for (const auto& [name, t] : zoo::all()) {
    Rng rng(2);
    for (int i = 0; i < 20; ++i) {
      const Vector mu = sample_dirichlet(rng, t.size(), 1.0, 1e-3).weights();
      const Vector psi = random_psi(g, mu.size());
      const auto A = assemble_A(t, mu);
      EXPECT_NEAR(A(psi), action(t, mu, psi), 1e-12 * std::max(1.0, A(psi))) << name;
      EXPECT_LE((A.matrix * Vector::Ones(mu.size())).cwiseAbs().maxCoeff(), 1e-12) << name;
      EXPECT_TRUE(A.connected) << name;
    }
  }
}

TEST(FormB, AgreesWithLiteralSums) {
  std::mt19937_64 g(3);
  for (const auto& [name, t] : zoo::all()) {
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
      const Vector mu = sample_dirichlet(rng, t.size(), 1.0, 1e-3).weights();
      const Vector psi = random_psi(g, mu.size());
      const auto lit = oracle::literal_B(t, mu, psi);
      const auto terms = b_terms(t, mu);
      const double scale = std::max(1.0, std::abs(lit.lhat) + std::abs(lit.transport) + std::abs(lit.r) + std::abs(lit.m));
      EXPECT_NEAR(psi.dot(terms.lhat * psi), lit.lhat, 1e-10 * scale) << name;
      EXPECT_NEAR(psi.dot(terms.transport * psi), lit.transport, 1e-10 * scale) << name;
      EXPECT_NEAR(psi.dot(terms.r * psi), lit.r, 1e-10 * scale) << name;
      EXPECT_NEAR(psi.dot(terms.m * psi), lit.m, 1e-10 * scale) << name;
      EXPECT_NEAR(assemble_B(t, mu)(psi), lit.total(), 1e-10 * scale) << name;
    }
  }
}

TEST(FormB, ConstantsInKernel) {
  for (const auto& [name, t] : zoo::all()) {
    Rng rng(5);
    const Vector mu = sample_dirichlet(rng, t.size(), 1.0, 1e-3).weights();
    const auto B = assemble_B(t, mu);
    EXPECT_LE((B.matrix * Vector::Ones(mu.size())).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, B.matrix.norm()))
        << name;
  }
}

TEST(FormB, LinearModelsHaveNoRateDerivativeTerms) {
  const auto t = zoo::random_linear(5, 3);
  Rng rng(6);
  const Vector mu = sample_dirichlet(rng, 5, 1.0).weights();
  const auto terms = b_terms(t, mu);
  EXPECT_EQ(terms.r.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(terms.m.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((assemble_B(t, mu).matrix - assemble_B(t, mu, false, false).matrix).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(FormB, TwoPointExpansion) {
  for (const auto& t : {curie_weiss(0.5), curie_weiss(1.5), curie_weiss(0.3, RateRule::metropolis),
                        two_point_linear(1.0, 2.0)}) {
    for (double u : {0.05, 0.3, 0.5, 0.71, 0.98}) {
      const Vector mu = (Vector(2) << u, 1.0 - u).finished();
      const Vector psi = (Vector(2) << 1.0, 0.0).finished();
      const double ratio = oracle::two_point_B_ratio(t, u);
      EXPECT_NEAR(assemble_B(t, mu)(psi), ratio, 1e-10 * std::max(1.0, std::abs(ratio))) << u;
      const double lam = edge_weight_matrix(t, mu)(0, 1);
      EXPECT_NEAR(kappa_at(t, mu).kappa, ratio / lam, 1e-9 * std::max(1.0, std::abs(ratio / lam))) << u;
      EXPECT_NEAR(kappa_at(t, mu).kappa, two_point_integrand(t, u), 1e-9 * std::max(1.0, std::abs(ratio / lam)))
          << u;
    }
  }
}

TEST(FormB, GaugeInvariance) {
  const auto c = zoo::random_symmetric(4, 77, -3.0, 3.0);
  for (const auto& t : {zoo::random_mean_field(4, 30), build_separable(Polynomial{2.0, 1.0, -0.5}, Polynomial{1.0, 0.3}, 4)}) {
    const auto s = gauge_shifted(t, c);
    Rng rng(7);
    for (int i = 0; i < 10; ++i) {
      const Vector mu = sample_dirichlet(rng, 4, 1.0, 1e-3).weights();
      const Matrix b0 = assemble_B(t, mu).matrix, b1 = assemble_B(s, mu).matrix;
      EXPECT_LE((b0 - b1).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, b0.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(Kappa, EigenpairResidual) {
  for (const auto& [name, t] : zoo::all()) {
    Rng rng(8);
    for (int i = 0; i < 10; ++i) {
      const Vector mu = sample_dirichlet(rng, t.size(), 1.0, 1e-3).weights();
      const auto k = kappa_at(t, mu);
      EXPECT_LE(k.residual, 1e-10) << name;
      // κ is the minimum of the ratio
      std::mt19937_64 g(static_cast<std::uint64_t>(i));
      const auto A = assemble_A(t, mu);
      const auto B = assemble_B(t, mu);
      for (int j = 0; j < 20; ++j) {
        const Vector psi = random_psi(g, mu.size());
        EXPECT_GE(B(psi) / A(psi), k.kappa - 1e-9 * std::max(1.0, std::abs(k.kappa))) << name;
      }
    }
  }
  EXPECT_THROW(kappa_at(curie_weiss(0.5), (Vector(2) << 1.0, 0.0).finished()), DomainError);
}

TEST(Kappa, CurieWeissClosedForm) {
  for (double beta : {0.0, 0.25, 0.5, 0.9}) {
    const auto t = curie_weiss(beta);
    const auto rep = kappa_opt(t);
    EXPECT_NEAR(rep.kappa_opt, 2.0 * (1.0 - beta), 1e-6) << beta;
    EXPECT_NEAR(rep.kappa_opt, two_point_kappa(t), 1e-6) << beta;
    EXPECT_FALSE(rep.certified);
    EXPECT_FALSE(rep.extrapolated);
    ASSERT_TRUE(rep.argmin_mu.has_value());
    EXPECT_NEAR((*rep.argmin_mu)[0], 0.5, 1e-3);
  }
  EXPECT_TRUE(kappa_opt(curie_weiss(1.2)).extrapolated);
  EXPECT_LT(kappa_opt(curie_weiss(1.2)).kappa_opt, 0.0);
}

TEST(Kappa, LinearChains) {
  EXPECT_NEAR(kappa_opt(two_point_linear(1.0, 1.0)).kappa_opt, 2.0, 1e-6);
  EXPECT_NEAR(two_point_kappa(two_point_linear(1.0, 1.0)), 2.0, 1e-8);
  const auto rep = kappa_opt(complete_graph_linear(3));
  EXPECT_GE(rep.kappa_opt, 0.0);
  EXPECT_THROW(two_point_kappa(complete_graph_linear(3)), SpecError);
}

TEST(Kappa, MarginProfile) {
  KappaOptions o;
  o.margins = {1e-2, 1e-3};
  o.starts = 6;
  const auto rep = kappa_opt(zoo::random_mean_field(3, 40, 0.8), o);
  ASSERT_EQ(rep.margin_profile.size(), 2u);
  for (const auto& e : rep.margin_profile) EXPECT_GE(e.argmin_mu.weights().minCoeff(), e.epsilon - 1e-12);
  EXPECT_LE(rep.kappa_opt, rep.margin_profile[0].kappa_inf);
  EXPECT_LE(rep.kappa_opt, rep.margin_profile[1].kappa_inf);
  std::ostringstream os;
  write_curvature_csv(os, rep);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "epsilon,kappa_inf,argmin_mu_0,argmin_mu_1,argmin_mu_2");
  EXPECT_NE(os.str().find("# kappa_opt="), std::string::npos);
  o.margins = {0.5};
  EXPECT_THROW(kappa_opt(zoo::random_mean_field(3, 40), o), SpecError);
}

TEST(SeparableBoundTest, Examples) {
  const auto flat = separable_bound(Polynomial{1.0}, Polynomial{1.0}, 6);
  EXPECT_TRUE(flat.applicable);
  EXPECT_DOUBLE_EQ(flat.lambda, 0.0);
  EXPECT_DOUBLE_EQ(flat.kappa_bound, 3.0);
  const auto s = separable_bound(Polynomial{20.0, 1.0}, Polynomial{1.0}, 3);
  EXPECT_NEAR(s.lambda, 0.525, 1e-14);
  EXPECT_NEAR(s.kappa_bound, 8.8875, 1e-12);
  EXPECT_TRUE(s.applicable);
  const auto v = separable_bound(Polynomial{0.0, 1.0}, Polynomial{1.0}, 3);
  EXPECT_FALSE(v.applicable);
  EXPECT_FALSE(v.diagnostic.empty());
  EXPECT_THROW(separable_bound(Polynomial{-0.5, 1.0}, Polynomial{1.0}, 3), SpecError);
  const auto big = separable_bound(Polynomial{1.0, 1.0}, Polynomial{1.0, 1.0}, 3);
  EXPECT_FALSE(big.applicable);
}

TEST(SeparableBoundTest, BoundIsBelowNumericalCurvature) {
  for (std::size_t n : {3u, 4u}) {
    const Polynomial a{20.0, 1.0}, b{1.0};
    const auto s = separable_bound(a, b, n);
    KappaOptions o;
    o.starts = 6;
    o.margins = {1e-2, 1e-3};
    EXPECT_GE(kappa_opt(build_separable(a, b, n), o).kappa_opt, s.kappa_bound - 1e-6) << n;
  }
}

TEST(Convexity, FreeEnergyAlongGeodesic) {
  const auto t = curie_weiss(0.5);
  const double kappa = 1.0;
  DistanceOptions o;
  o.K = 32;
  for (auto [a, b] : {std::pair{0.9, 0.2}, std::pair{0.6, 0.05}, std::pair{0.35, 0.7}}) {
    const auto r = distance(t, ProbabilityMeasure{a, 1 - a}, ProbabilityMeasure{b, 1 - b}, o);
    const double f0 = free_energy(t, r.path.steps.front()), f1 = free_energy(t, r.path.steps.back());
    const double w2 = r.W * r.W;
    double worst = 0.0;
    for (std::size_t k = 0; k < r.path.steps.size(); ++k) {
      const double s = static_cast<double>(k) * r.path.dt;
      const double slack = (1 - s) * f0 + s * f1 - 0.5 * kappa * s * (1 - s) * w2 - free_energy(t, r.path.steps[k]);
      worst = std::min(worst, slack);
    }
    EXPECT_GE(worst, -1e-3);
  }
}
