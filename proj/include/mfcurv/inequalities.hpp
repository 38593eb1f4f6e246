#pragma once

// Sampling verifiers for the functional inequalities implied by a curvature
// bound: MLSI, transport-entropy, FWI, free-energy decay, contraction and EVI,
// plus the free-energy dissipation balance.

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mfcurv/config.hpp"
#include "mfcurv/dynamics.hpp"
#include "mfcurv/errors.hpp"
#include "mfcurv/metric.hpp"
#include "mfcurv/models.hpp"
#include "mfcurv/parallel.hpp"
#include "mfcurv/random.hpp"

namespace mfcurv {

using MeasureSampler = std::function<ProbabilityMeasure(Rng&, std::size_t)>;
using PairSampler = std::function<std::pair<ProbabilityMeasure, ProbabilityMeasure>(Rng&, std::size_t)>;

inline MeasureSampler default_sampler() { return DirichletSampler{1.0, defaults::sampler_floor}; }

inline PairSampler independent_pairs(MeasureSampler s = default_sampler()) {
  return [s](Rng& rng, std::size_t n) {
    auto a = s(rng, n);
    auto b = s(rng, n);
    return std::make_pair(std::move(a), std::move(b));
  };
}

struct SampleRow {
  std::size_t sample_id = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs − lhs
  bool passed = true;
};

struct CheckReport {
  std::string name;
  std::size_t n_samples = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  std::vector<Vector> worst_case_input;  // one or two measures
  bool passed = true;
  double tol = 0.0;
  std::size_t K = 0;  // distance discretization used, 0 if none
  std::vector<SampleRow> rows;
  std::vector<std::string> notes;
  double secondary = std::numeric_limits<double>::quiet_NaN();  // empirical rate (decay), worst slack at larger h (evi)
};

struct CheckOptions {
  std::uint64_t seed = defaults::seed;
  std::size_t K = defaults::distance_steps;
  std::size_t fine_K = 4 * defaults::distance_steps;
  double T = 2.0;
};

namespace detail {

// Per-sample inputs drawn from independent seeded streams, so results do not
// depend on thread scheduling.
template <class Draw>
auto draw_samples(std::size_t count, std::uint64_t seed, Draw draw) {
  using T = decltype(draw(std::declval<Rng&>()));
  std::vector<T> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    out.push_back(draw(rng));
  }
  return out;
}

inline void finalize(CheckReport& rep, const std::vector<std::vector<Vector>>& inputs) {
  rep.n_samples = rep.rows.size();
  rep.worst_slack = std::numeric_limits<double>::infinity();
  rep.passed = true;
  for (auto& r : rep.rows) {
    r.passed = r.slack >= -rep.tol;
    if (!r.passed) rep.passed = false;
    if (r.slack < rep.worst_slack) {
      rep.worst_slack = r.slack;
      rep.worst_case_input = inputs[r.sample_id];
    }
  }
  if (rep.rows.empty()) rep.worst_slack = 0.0;
}

inline DistanceOptions loose(std::size_t K) {
  DistanceOptions o;
  o.K = K;
  o.require_convergence = false;
  return o;
}

}  // namespace detail

/// ℱ_*(μ) ≤ ℐ(μ)/(2λ).
inline CheckReport check_mlsi(const NonlinearMarkovTriple& triple, double lambda, const StationarySet& set,
                              const MeasureSampler& sampler, std::size_t n, const CheckOptions& opts = {}) {
  if (!(lambda > 0.0)) throw DomainError("check_mlsi: lambda must be positive");
  const double fmin = set.min_free_energy();
  const auto mus = detail::draw_samples(n, opts.seed, [&](Rng& r) { return sampler(r, triple.size()); });
  CheckReport rep;
  rep.name = "mlsi";
  rep.tol = 1e-9;
  rep.rows.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const double lhs = std::max(0.0, free_energy(triple, mus[i]) - fmin);
    const double rhs = fisher_info(triple, mus[i]) / (2.0 * lambda);
    rep.rows[i] = {i, lhs, rhs, rhs - lhs, true};
  });
  std::vector<std::vector<Vector>> in;
  for (const auto& m : mus) in.push_back({m.weights()});
  detail::finalize(rep, in);
  return rep;
}

/// 𝒲(μ, π*) ≤ √(2ℱ_*(μ)/λ), with 𝒲 replaced by its discrete upper bound.
inline CheckReport check_et(const NonlinearMarkovTriple& triple, double lambda, const StationarySet& set,
                            const MeasureSampler& sampler, std::size_t n, const CheckOptions& opts = {}) {
  if (!(lambda > 0.0)) throw DomainError("check_et: lambda must be positive");
  if (set.size() != 1) throw DomainError("check_et: requires a unique stationary point");
  const ProbabilityMeasure& pis = set.minimizer();
  const double fmin = set.min_free_energy();
  const auto mus = detail::draw_samples(n, opts.seed, [&](Rng& r) { return sampler(r, triple.size()); });
  CheckReport rep;
  rep.name = "et";
  rep.tol = 5e-3;
  rep.K = opts.K;
  rep.rows.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const double w = distance(triple, mus[i], pis, detail::loose(opts.K)).W;
    const double rhs = std::sqrt(2.0 * std::max(0.0, free_energy(triple, mus[i]) - fmin) / lambda);
    rep.rows[i] = {i, w, rhs, rhs - w, true};
  });
  std::vector<std::vector<Vector>> in;
  for (const auto& m : mus) in.push_back({m.weights()});
  detail::finalize(rep, in);
  rep.notes.push_back("distance is a discrete upper bound; a pass is conservative");
  return rep;
}

/// ℱ(μ) ≤ ℱ(ν) + 𝒲√ℐ(μ) − (κ/2)𝒲².
inline CheckReport check_fwi(const NonlinearMarkovTriple& triple, double kappa, const PairSampler& sampler,
                             std::size_t n, const CheckOptions& opts = {}) {
  const auto pairs = detail::draw_samples(n, opts.seed, [&](Rng& r) { return sampler(r, triple.size()); });
  CheckReport rep;
  rep.name = "fwi";
  rep.tol = kappa > 0.0 ? 1e-2 : 1e-9;
  rep.K = opts.K;
  rep.rows.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const auto& [mu, nu] = pairs[i];
    const double w = distance(triple, mu, nu, detail::loose(opts.K)).W;
    const double wq = kappa > 0.0 ? distance(triple, mu, nu, detail::loose(opts.fine_K)).W : w;
    const double lhs = free_energy(triple, mu);
    const double rhs = free_energy(triple, nu) + w * std::sqrt(fisher_info(triple, mu)) - 0.5 * kappa * wq * wq;
    rep.rows[i] = {i, lhs, rhs, rhs - lhs, true};
  });
  std::vector<std::vector<Vector>> in;
  for (const auto& [a, b] : pairs) in.push_back({a.weights(), b.weights()});
  detail::finalize(rep, in);
  if (kappa > 0.0) rep.notes.push_back("quadratic term uses fine_K=" + std::to_string(opts.fine_K));
  return rep;
}

/// ℱ_*(μ_t) ≤ e^{−2λt}ℱ_*(μ₀) at 20 checkpoints in (0, T], plus the empirical rate.
inline CheckReport check_decay(const NonlinearMarkovTriple& triple, double lambda, const StationarySet& set,
                               const MeasureSampler& sampler, std::size_t n, const CheckOptions& opts = {}) {
  if (!(lambda > 0.0)) throw DomainError("check_decay: lambda must be positive");
  const double fmin = set.min_free_energy();
  const double rate_tol = 1e-3;
  const auto mus = detail::draw_samples(n, opts.seed, [&](Rng& r) { return sampler(r, triple.size()); });
  CheckReport rep;
  rep.name = "decay";
  rep.tol = 1e-8;
  rep.rows.resize(n);
  std::vector<double> rates(n, std::numeric_limits<double>::infinity());
  parallel_for(n, [&](std::size_t i) {
    const Trajectory tr = integrate(triple, mus[i], opts.T);
    const double f0 = std::max(0.0, free_energy(triple, mus[i]) - fmin);
    double worst = std::numeric_limits<double>::infinity();
    SampleRow row{i, 0, 0, 0, true};
    for (int c = 1; c <= 20; ++c) {
      const double t = opts.T * c / 20.0;
      const double ft = std::max(0.0, free_energy(triple, tr.state_at(t)) - fmin);
      const double bound = std::exp(-2.0 * lambda * t) * f0;
      if (bound - ft < worst) {
        worst = bound - ft;
        row = {i, ft, bound, bound - ft, true};
      }
    }
    const double fT = std::max(0.0, free_energy(triple, tr.state_at(opts.T)) - fmin);
    if (f0 > 1e-6 && fT > 1e-12) {
      rates[i] = -std::log(fT / f0) / opts.T;
      // a rate shortfall counts as a violation of the same size in the bound at T
      if (rates[i] < 2.0 * lambda - rate_tol) row.slack = std::min(row.slack, rates[i] - 2.0 * lambda);
    }
    rep.rows[i] = row;
  });
  std::vector<std::vector<Vector>> in;
  for (const auto& m : mus) in.push_back({m.weights()});
  detail::finalize(rep, in);
  rep.secondary = n ? *std::min_element(rates.begin(), rates.end()) : std::numeric_limits<double>::quiet_NaN();
  rep.notes.push_back("secondary = minimum empirical rate -log(F*(T)/F*(0))/T; required >= 2*lambda - 1e-3");
  return rep;
}

/// 𝒲(μ¹_t, μ²_t) ≤ e^{−κt}𝒲(μ¹₀, μ²₀) at t ∈ {T/4, T/2, T}.
inline CheckReport check_contraction(const NonlinearMarkovTriple& triple, double kappa, const PairSampler& sampler,
                                     std::size_t n, const CheckOptions& opts = {}) {
  const auto pairs = detail::draw_samples(n, opts.seed, [&](Rng& r) { return sampler(r, triple.size()); });
  CheckReport rep;
  rep.name = "contraction";
  rep.tol = 1e-2;
  rep.K = opts.K;
  rep.rows.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const auto& [a, b] = pairs[i];
    const Trajectory ta = integrate(triple, a, opts.T), tb = integrate(triple, b, opts.T);
    const double w0 = distance(triple, a, b, detail::loose(opts.fine_K)).W;
    SampleRow row{i, 0, 0, std::numeric_limits<double>::infinity(), true};
    for (double frac : {0.25, 0.5, 1.0}) {
      const double t = frac * opts.T;
      const ProbabilityMeasure at = ProbabilityMeasure::normalized(ta.state_at(t));
      const ProbabilityMeasure bt = ProbabilityMeasure::normalized(tb.state_at(t));
      const double wt = distance(triple, at, bt, detail::loose(opts.K)).W;
      const double rhs = std::exp(-kappa * t) * w0;
      if (rhs - wt < row.slack) row = {i, wt, rhs, rhs - wt, true};
    }
    rep.rows[i] = row;
  });
  std::vector<std::vector<Vector>> in;
  for (const auto& [a, b] : pairs) in.push_back({a.weights(), b.weights()});
  detail::finalize(rep, in);
  rep.notes.push_back("W at t>0 uses K=" + std::to_string(opts.K) + " (upper bound), W at 0 uses fine_K=" +
                      std::to_string(opts.fine_K) + "; the comparison is biased against passing");
  return rep;
}

/// ½ d⁺/dt 𝒲(μ_t,ν)² + (κ/2)𝒲(μ_t,ν)² ≤ ℱ(ν) − ℱ(μ_t) at t = 0, by forward
/// differences at h = 1e-2 and 1e-3; the verdict uses h = 1e-3.
inline CheckReport check_evi(const NonlinearMarkovTriple& triple, double kappa, const PairSampler& sampler,
                             std::size_t n, const CheckOptions& opts = {}) {
  const auto pairs = detail::draw_samples(n, opts.seed, [&](Rng& r) { return sampler(r, triple.size()); });
  CheckReport rep;
  rep.name = "evi";
  rep.tol = 5e-2;
  rep.K = opts.K;
  rep.rows.resize(n);
  std::vector<double> coarse(n);
  parallel_for(n, [&](std::size_t i) {
    const auto& [mu, nu] = pairs[i];
    const Trajectory tr = integrate(triple, mu, 1e-2);
    const double w0 = distance(triple, mu, nu, detail::loose(opts.K)).W;
    const double rhs = free_energy(triple, nu) - free_energy(triple, mu);
    double s[2];
    double lhs_fine = 0.0;
    int k = 0;
    for (double h : {1e-2, 1e-3}) {
      const double wh = distance(triple, ProbabilityMeasure::normalized(tr.state_at(h)), nu, detail::loose(opts.K)).W;
      const double lhs = (wh * wh - w0 * w0) / (2.0 * h) + 0.5 * kappa * w0 * w0;
      s[k++] = rhs - lhs;
      lhs_fine = lhs;
    }
    coarse[i] = s[0];
    rep.rows[i] = {i, lhs_fine, rhs, s[1], true};
  });
  std::vector<std::vector<Vector>> in;
  for (const auto& [a, b] : pairs) in.push_back({a.weights(), b.weights()});
  detail::finalize(rep, in);
  rep.secondary = n ? *std::min_element(coarse.begin(), coarse.end()) : std::numeric_limits<double>::quiet_NaN();
  rep.notes.push_back("rows use h=1e-3; secondary = worst slack at h=1e-2");
  return rep;
}

/// |ℱ(μ_t) − ℱ(μ₀) + ∫ℐ| along trajectories from sampled starts.
inline CheckReport check_dissipation(const NonlinearMarkovTriple& triple, const MeasureSampler& sampler, std::size_t n,
                                     const CheckOptions& opts = {}, double tol = 1e-6) {
  const auto mus = detail::draw_samples(n, opts.seed, [&](Rng& r) { return sampler(r, triple.size()); });
  CheckReport rep;
  rep.name = "dissipation";
  rep.tol = tol;
  rep.rows.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const double r = dissipation_residual(triple, integrate(triple, mus[i], opts.T));
    rep.rows[i] = {i, r, 0.0, -r, true};
  });
  std::vector<std::vector<Vector>> in;
  for (const auto& m : mus) in.push_back({m.weights()});
  detail::finalize(rep, in);
  return rep;
}

/// CSV `sample_id,lhs,rhs,slack,passed`.
inline void write_check_csv(std::ostream& out, const CheckReport& rep) {
  out << "sample_id,lhs,rhs,slack,passed\n" << std::setprecision(17);
  for (const auto& r : rep.rows)
    out << r.sample_id << ',' << r.lhs << ',' << r.rhs << ',' << r.slack << ',' << (r.passed ? 1 : 0) << '\n';
}

inline nlohmann::json check_summary(const CheckReport& rep) {
  nlohmann::json j;
  j["name"] = rep.name;
  j["n_samples"] = rep.n_samples;
  j["worst_slack"] = rep.worst_slack;
  j["tol"] = rep.tol;
  j["passed"] = rep.passed;
  if (rep.K) j["K"] = rep.K;
  auto wc = nlohmann::json::array();
  for (const auto& v : rep.worst_case_input) wc.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  j["worst_case_input"] = wc;
  if (!std::isnan(rep.secondary)) j["secondary"] = rep.secondary;
  j["notes"] = rep.notes;
  return j;
}

}  // namespace mfcurv
