#include <gtest/gtest.h>

#include <sstream>

#include "mfcurv/inequalities.hpp"
#include "zoo.hpp"

using namespace mfcurv;

namespace {

MeasureSampler constant(const ProbabilityMeasure& m) {
  return [m](Rng&, std::size_t) { return m; };
}

PairSampler constant_pair(const ProbabilityMeasure& a, const ProbabilityMeasure& b) {
  return [a, b](Rng&, std::size_t) { return std::make_pair(a, b); };
}

const NonlinearMarkovTriple& cw05() {
  static const auto t = curie_weiss(0.5);
  return t;
}

const StationarySet& cw05_set() {
  static const auto s = find_stationary(cw05(), 8);
  return s;
}

}  // namespace

TEST(Checks, EquilibriumSamplesAreTrivial) {
  const ProbabilityMeasure pi{0.5, 0.5};
  const auto s = constant(pi);
  const auto p = constant_pair(pi, pi);
  for (const auto& rep : {check_mlsi(cw05(), 1.0, cw05_set(), s, 3), check_et(cw05(), 1.0, cw05_set(), s, 3),
                          check_decay(cw05(), 1.0, cw05_set(), s, 3), check_fwi(cw05(), 1.0, p, 3),
                          check_contraction(cw05(), 1.0, p, 2), check_evi(cw05(), 1.0, p, 2)}) {
    EXPECT_TRUE(rep.passed) << rep.name;
    EXPECT_NEAR(rep.worst_slack, 0.0, 1e-9) << rep.name;
    EXPECT_EQ(rep.n_samples, rep.rows.size());
  }
}

TEST(Checks, CurieWeissMlsiPasses) {
  const auto rep = check_mlsi(cw05(), 1.0, cw05_set(), default_sampler(), 2000);
  EXPECT_TRUE(rep.passed);
  EXPECT_GE(rep.worst_slack, -1e-9);
  EXPECT_EQ(rep.tol, 1e-9);
}

TEST(Checks, MlsiMonotoneInLambda) {
  bool previous = true;
  for (double lam : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    const auto rep = check_mlsi(cw05(), lam, cw05_set(), default_sampler(), 500);
    if (!previous) EXPECT_FALSE(rep.passed) << lam;
    previous = rep.passed;
  }
  EXPECT_TRUE(check_mlsi(cw05(), 0.25, cw05_set(), default_sampler(), 500).passed);
  EXPECT_FALSE(check_mlsi(cw05(), 8.0, cw05_set(), default_sampler(), 500).passed);
}

TEST(Checks, MlsiWitnessBelowCriticalTemperature) {
  const auto t = curie_weiss(1.5);
  const auto set = find_stationary(t, 16);
  const auto rep = check_mlsi(t, 0.5, set, default_sampler(), 2000);
  EXPECT_FALSE(rep.passed);
  ASSERT_EQ(rep.worst_case_input.size(), 1u);
  EXPECT_LT(rep.worst_slack, -1e-9);
  // the witness violates the inequality when re-evaluated directly
  const Vector w = rep.worst_case_input[0];
  EXPECT_GT(free_energy(t, w) - set.min_free_energy(), fisher_info(t, w) / (2 * 0.5));
}

TEST(Checks, Determinism) {
  CheckOptions o;
  o.seed = 99;
  const auto a = check_mlsi(cw05(), 1.0, cw05_set(), default_sampler(), 300, o);
  const auto limit = thread_limit();
  set_thread_limit(1);
  const auto b = check_mlsi(cw05(), 1.0, cw05_set(), default_sampler(), 300, o);
  set_thread_limit(limit);
  std::ostringstream sa, sb;
  write_check_csv(sa, a);
  write_check_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  o.seed = 100;
  std::ostringstream sc;
  write_check_csv(sc, check_mlsi(cw05(), 1.0, cw05_set(), default_sampler(), 300, o));
  EXPECT_NE(sa.str(), sc.str());
}

TEST(Checks, MlsiImpliesDecay) {
  CheckOptions o;
  o.seed = 5;
  const auto m = check_mlsi(cw05(), 1.0, cw05_set(), default_sampler(), 30, o);
  const auto d = check_decay(cw05(), 1.0, cw05_set(), default_sampler(), 30, o);
  ASSERT_TRUE(m.passed);
  EXPECT_TRUE(d.passed);
  EXPECT_GE(d.secondary, 2.0 - 1e-3);
}

TEST(Checks, DomainErrors) {
  EXPECT_THROW(check_mlsi(cw05(), 0.0, cw05_set(), default_sampler(), 1), DomainError);
  EXPECT_THROW(check_decay(cw05(), -1.0, cw05_set(), default_sampler(), 1), DomainError);
  const auto t = curie_weiss(1.5);
  EXPECT_THROW(check_et(t, 0.5, find_stationary(t, 16), default_sampler(), 1), DomainError);
}

TEST(Checks, TransportEntropyLinearChain) {
  const auto t = two_point_linear(1.0, 1.0);
  const auto set = find_stationary(t, 4);
  const auto rep = check_et(t, 2.0, set, default_sampler(), 10);
  EXPECT_TRUE(rep.passed) << rep.worst_slack;
  EXPECT_EQ(rep.K, defaults::distance_steps);
}

TEST(Checks, FwiLinearChainAndCurieWeiss) {
  const auto t = two_point_linear(1.0, 1.0);
  EXPECT_TRUE(check_fwi(t, 2.0, independent_pairs(), 8).passed);
  const auto rep = check_fwi(cw05(), 1.0, independent_pairs(), 8);
  EXPECT_TRUE(rep.passed) << rep.worst_slack;
  ASSERT_EQ(rep.worst_case_input.size(), 2u);
  // nonpositive κ is allowed and uses the exact-conservative tolerance
  const auto neg = check_fwi(cw05(), -1.0, independent_pairs(), 4);
  EXPECT_EQ(neg.tol, 1e-9);
  EXPECT_TRUE(neg.passed);
}

TEST(Checks, ContractionLinearChain) {
  const auto rep = check_contraction(two_point_linear(1.0, 1.0), 2.0, independent_pairs(), 4);
  EXPECT_TRUE(rep.passed) << rep.worst_slack;
  EXPECT_FALSE(rep.notes.empty());
}

TEST(Checks, EviSoftPassAndInflatedKappa) {
  const auto ok = check_evi(cw05(), 1.0, independent_pairs(), 6);
  EXPECT_TRUE(ok.passed) << ok.worst_slack;
  EXPECT_FALSE(std::isnan(ok.secondary));
  const auto bad = check_evi(cw05(), 10.0, independent_pairs(), 6);
  EXPECT_FALSE(bad.passed);
  EXPECT_EQ(bad.worst_case_input.size(), 2u);
}

TEST(Checks, Dissipation) {
  const auto sep = build_separable(Polynomial{1.0, 1.0}, Polynomial{1.0}, 5);
  EXPECT_TRUE(check_dissipation(sep, default_sampler(), 5).passed);
  EXPECT_TRUE(check_dissipation(cw05(), DirichletSampler{0.2, 1e-4}, 5).passed);
}

TEST(Checks, Reporting) {
  const auto rep = check_mlsi(cw05(), 1.0, cw05_set(), default_sampler(), 4);
  std::ostringstream os;
  write_check_csv(os, rep);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "sample_id,lhs,rhs,slack,passed");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 5);
  const auto j = check_summary(rep);
  EXPECT_EQ(j["name"], "mlsi");
  EXPECT_EQ(j["n_samples"], 4);
  EXPECT_EQ(j["passed"], true);
  EXPECT_EQ(j["worst_case_input"].size(), 1u);
  EXPECT_EQ(rep.passed, rep.worst_slack >= -rep.tol);
}
