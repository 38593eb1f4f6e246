#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mfcurv/dynamics.hpp"
#include "mfcurv/metric.hpp"
#include "oracles.hpp"
#include "zoo.hpp"

using namespace mfcurv;

TEST(Rhs, CurieWeissExample) {
  const auto cw = curie_weiss(0.5);
  const TangentVector v = rhs(cw, ProbabilityMeasure{0.9, 0.1});
  EXPECT_NEAR(v[0], -0.9 * std::exp(-0.4) + 0.1 * std::exp(0.4), 1e-14);
  EXPECT_NEAR(v[0], -0.4541, 1e-4);
  EXPECT_NEAR(v[0] + v[1], 0.0, 1e-15);
}

TEST(Rhs, GradientFlowForm) {
  // μQ(μ) equals the weighted Laplacian applied to −log ρ
  for (const auto& [name, t] : zoo::all()) {
    Rng rng(3);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Vector mu = sample_dirichlet(rng, t.size(), 1.0, 1e-3).weights();
      const Vector lhs = rhs_vector(t, mu);
      const Vector r = laplacian(edge_weight_matrix(t, mu)) * (-log_density(t, mu));
      worst = std::max(worst, (lhs - r).cwiseAbs().maxCoeff() / std::max(1.0, lhs.cwiseAbs().maxCoeff()));
    }
    EXPECT_LE(worst, 1e-10) << name;
  }
}

TEST(FreeEnergy, Examples) {
  EXPECT_NEAR(free_energy(curie_weiss(1.0), ProbabilityMeasure{0.5, 0.5}), -std::log(2.0) + 0.5, 1e-14);
  const auto flat = build_mean_field_pair(Vector::Zero(4), zoo::random_symmetric(4, 1), 0.0,
                                          Matrix::Ones(4, 4) - Matrix::Identity(4, 4));
  EXPECT_NEAR(free_energy(flat, ProbabilityMeasure::uniform(4)), -std::log(4.0), 1e-14);
  const auto lin = zoo::random_linear(5, 2);
  const Vector pi = lin.pi(ProbabilityMeasure::uniform(5));
  EXPECT_NEAR(free_energy(lin, ProbabilityMeasure(pi)), 0.0, 1e-14);
  // boundary values are finite
  EXPECT_TRUE(std::isfinite(free_energy(curie_weiss(0.5), ProbabilityMeasure{1.0, 0.0})));
}

TEST(FreeEnergy, FirstVariationIsLogDensity) {
  for (const auto& [name, t] : zoo::all()) {
    Rng rng(8);
    for (int i = 0; i < 10; ++i) {
      const Vector mu = sample_dirichlet(rng, t.size(), 1.0, 0.02).weights();
      const Vector lr = log_density(t, mu);
      for (Eigen::Index x = 0; x + 1 < mu.size(); ++x) {
        Vector e = Vector::Zero(mu.size());
        e[x] = 1.0;
        e[x + 1] = -1.0;
        const double h = 1e-6;
        const double fd = (free_energy(t, Vector(mu + h * e)) - free_energy(t, Vector(mu - h * e))) / (2 * h);
        EXPECT_NEAR(fd, lr.dot(e), 1e-6) << name;
      }
    }
  }
}

TEST(Fisher, Examples) {
  const auto tp = two_point_linear(1.0, 1.0);
  EXPECT_NEAR(fisher_info(tp, ProbabilityMeasure{0.75, 0.25}), 0.5 * std::log(3.0), 1e-14);
  EXPECT_EQ(fisher_info(tp, ProbabilityMeasure{1.0, 0.0}), std::numeric_limits<double>::infinity());
  EXPECT_NEAR(fisher_info(tp, ProbabilityMeasure{0.5, 0.5}), 0.0, 1e-16);
}

TEST(Fisher, EqualsActionOfLogDensity) {
  for (const auto& [name, t] : zoo::all()) {
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
      const Vector mu = sample_dirichlet(rng, t.size(), 1.0, 1e-3).weights();
      const double lhs = fisher_info(t, mu);
      const double a = action(t, mu, Vector(-log_density(t, mu)));
      EXPECT_NEAR(lhs, a, 1e-10 * std::max(1.0, lhs)) << name;
      EXPECT_GE(lhs, 0.0);
    }
  }
}

TEST(Integrate, StationaryStartStaysPut) {
  const auto cw = curie_weiss(0.5);
  const auto tr = integrate(cw, ProbabilityMeasure{0.5, 0.5}, 5.0);
  EXPECT_NEAR(tr.states.back()[0], 0.5, 1e-14);
  const auto lin = zoo::random_linear(4, 6);
  const ProbabilityMeasure pi(lin.pi(ProbabilityMeasure::uniform(4)));
  const auto t2 = integrate(lin, pi, 5.0);
  EXPECT_LE((t2.states.back().weights() - pi.weights()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Integrate, CurieWeissConverges) {
  const auto hi = integrate(curie_weiss(0.5), ProbabilityMeasure{0.9, 0.1}, 40.0);
  EXPECT_NEAR(hi.states.back()[0], 0.5, 1e-8);
  const double m = oracle::magnetization(1.5);
  const auto lo = integrate(curie_weiss(1.5), ProbabilityMeasure{0.9, 0.1}, 60.0);
  EXPECT_NEAR(lo.states.back()[0], 0.5 * (1.0 + m), 1e-8);
  const auto neg = integrate(curie_weiss(1.5), ProbabilityMeasure{0.2, 0.8}, 60.0);
  EXPECT_NEAR(neg.states.back()[0], 0.5 * (1.0 - m), 1e-8);
}

TEST(Integrate, ExponentialRateTwoPoint) {
  // u̇ = 1 − 2u for the unit two-point chain
  const auto tr = integrate(two_point_linear(1.0, 1.0), ProbabilityMeasure{0.9, 0.1}, 3.0);
  for (double t : {0.3, 1.0, 2.2, 3.0})
    EXPECT_NEAR(tr.state_at(t)[0], 0.5 + 0.4 * std::exp(-2.0 * t), 1e-7) << t;
}

TEST(Integrate, MassAndLyapunov) {
  for (const auto& [name, t] : zoo::all()) {
    Rng rng(12);
    const auto mu0 = sample_dirichlet(rng, t.size(), 1.0, 1e-3);
    const auto tr = integrate(t, mu0, 5.0);
    double prev = free_energy(t, tr.states.front());
    for (const auto& s : tr.states) {
      EXPECT_NEAR(s.weights().sum(), 1.0, 1e-12) << name;
      EXPECT_GE(s.weights().minCoeff(), 0.0) << name;
      const double f = free_energy(t, s);
      EXPECT_LE(f, prev + 1e-12) << name;
      prev = f;
    }
  }
}

TEST(Integrate, DissipationIdentity) {
  const auto cw = curie_weiss(0.5);
  EXPECT_LE(dissipation_residual(cw, integrate(cw, ProbabilityMeasure{0.9, 0.1}, 5.0)), 1e-6);
  const auto sep = build_separable(Polynomial{1.0, 1.0}, Polynomial{1.0}, 5);
  const ProbabilityMeasure mu0{0.5, 0.2, 0.15, 0.1, 0.05};
  EXPECT_LE(dissipation_residual(sep, integrate(sep, mu0, 5.0)), 1e-6);
}

TEST(Integrate, RejectsBadInput) {
  EXPECT_THROW(integrate(curie_weiss(0.5), ProbabilityMeasure{0.5, 0.5}, -1.0), DomainError);
  EXPECT_THROW(integrate(curie_weiss(0.5), ProbabilityMeasure{0.2, 0.3, 0.5}, 1.0), SpecError);
}

TEST(Integrate, TrajectoryCsv) {
  const auto cw = curie_weiss(0.5);
  const auto tr = integrate(cw, ProbabilityMeasure{0.9, 0.1}, 1.0);
  std::ostringstream os;
  write_trajectory_csv(os, cw, tr);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "t,mu_0,mu_1,F,I");
  EXPECT_EQ(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')), tr.size() + 1);
}

TEST(Stationary, CurieWeissHighTemperature) {
  const auto set = find_stationary(curie_weiss(0.5), 8);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_NEAR(set.points[0][0], 0.5, 1e-12);
  EXPECT_LE(set.residuals[0], 1e-10);
}

TEST(Stationary, CurieWeissLowTemperature) {
  const auto set = find_stationary(curie_weiss(1.5), 16);
  ASSERT_EQ(set.size(), 3u);
  const double m = oracle::magnetization(1.5);
  std::vector<double> u;
  for (const auto& p : set.points) u.push_back(p[0]);
  std::sort(u.begin(), u.end());
  EXPECT_NEAR(u[0], 0.5 * (1 - m), 1e-10);
  EXPECT_NEAR(u[1], 0.5, 1e-10);
  EXPECT_NEAR(u[2], 0.5 * (1 + m), 1e-10);
  const double um = set.minimizer()[0];
  EXPECT_NEAR(std::abs(um - 0.5), 0.5 * m, 1e-10);
  for (std::size_t i = 0; i < set.size(); ++i) EXPECT_GE(set.free_energies[i], set.min_free_energy());
  EXPECT_NEAR(free_energy_gap(curie_weiss(1.5), set.minimizer(), set), 0.0, 1e-15);
}

TEST(Stationary, LinearAndSeparable) {
  const auto lin = zoo::random_linear(4, 19);
  const auto set = find_stationary(lin, 6);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_LE((set.points[0].weights() - lin.pi(ProbabilityMeasure::uniform(4))).cwiseAbs().maxCoeff(), 1e-10);
  const auto sep = build_separable(Polynomial{20.0, 1.0}, Polynomial{1.0}, 3);
  const auto s2 = find_stationary(sep, 8);
  ASSERT_GE(s2.size(), 1u);
  EXPECT_NEAR(s2.minimizer()[0], 1.0 / 3.0, 1e-10);
}

TEST(Stationary, EmptySetAccessThrows) {
  StationarySet empty;
  EXPECT_THROW(empty.min_free_energy(), Error);
  EXPECT_THROW(find_stationary(curie_weiss(0.5), 0), SpecError);
}
