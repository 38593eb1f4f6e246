// mfcurv: command-line front end.
// Exit codes: 0 success/pass, 1 check failure or numerical failure, 2 usage or spec error.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mfcurv/mfcurv.hpp"

namespace {

using namespace mfcurv;

struct ModelArgs {
  std::string builtin;
  std::string model_file;
  double beta = 0.5;
  std::string rule = "glauber";
  double p = 1.0;
  double q = 1.0;
  std::size_t states = 3;
  double rate = 1.0;
  std::vector<double> a{20.0, 1.0};
  std::vector<double> b{1.0};
};

struct Common {
  std::size_t threads = 0;
  std::uint64_t seed = defaults::seed;
  std::string out;
};

void add_model_options(CLI::App* app, ModelArgs& m) {
  app->add_option("--builtin", m.builtin, "Builtin model: curie-weiss, two-point, separable, complete-graph")
      ->check(CLI::IsMember({"curie-weiss", "two-point", "separable", "complete-graph"}));
  app->add_option("--model", m.model_file, "Model spec file (JSON)");
  app->add_option("--beta", m.beta, "Curie-Weiss interaction strength")->capture_default_str();
  app->add_option("--rule", m.rule, "Curie-Weiss rate rule")
      ->check(CLI::IsMember({"glauber", "metropolis"}))
      ->capture_default_str();
  app->add_option("--p", m.p, "two-point rate 0->1")->capture_default_str();
  app->add_option("--q", m.q, "two-point rate 1->0")->capture_default_str();
  app->add_option("--states", m.states, "state count for separable / complete-graph")->capture_default_str();
  app->add_option("--rate", m.rate, "complete-graph edge rate")->capture_default_str();
  app->add_option("--a", m.a, "separable a(r) coefficients, constant first")->delimiter(',')->capture_default_str();
  app->add_option("--b", m.b, "separable b(r) coefficients, constant first")->delimiter(',')->capture_default_str();
}

void add_common_options(CLI::App* app, Common& c) {
  app->add_option("--threads", c.threads, "worker cap (default: MFCURV_THREADS or hardware concurrency)");
  app->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
  app->add_option("--out", c.out, "CSV output path (default: none)");
}

NonlinearMarkovTriple make_model(const ModelArgs& m) {
  if (!m.model_file.empty() && !m.builtin.empty()) throw SpecError("use either --model or --builtin, not both");
  if (!m.model_file.empty()) return build(load_model_spec(m.model_file));
  if (m.builtin == "curie-weiss")
    return curie_weiss(m.beta, m.rule == "metropolis" ? RateRule::metropolis : RateRule::glauber_sqrt);
  if (m.builtin == "two-point") return two_point_linear(m.p, m.q);
  if (m.builtin == "separable") return build_separable(Polynomial(m.a), Polynomial(m.b), m.states);
  if (m.builtin == "complete-graph") return complete_graph_linear(m.states, m.rate);
  throw SpecError("a model is required: pass --builtin or --model");
}

ProbabilityMeasure measure_arg(const std::vector<double>& v, std::size_t n, const char* name) {
  if (v.size() != n) throw SpecError(std::string(name) + " must have " + std::to_string(n) + " entries");
  Vector w(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) w[static_cast<Eigen::Index>(i)] = v[i];
  try {
    return ProbabilityMeasure(w, 1e-9);
  } catch (const Error& e) {
    throw SpecError(std::string(name) + ": " + e.what());
  }
}

std::string fmt_vec(const Vector& v) {
  std::ostringstream s;
  s << std::setprecision(10) << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
  s << ')';
  return s.str();
}

template <class Writer>
void write_out(const std::string& path, Writer w) {
  if (path.empty()) return;
  std::ofstream f(path);
  if (!f) throw SpecError("cannot open output file " + path);
  w(f);
}

// ── subcommands ─────────────────────────────────────────────────────────────

int run_validate(const ModelArgs& m, const Common& c, std::size_t samples) {
  const auto triple = make_model(m);
  const auto r = validate(triple, samples, c.seed);
  std::cout << std::setprecision(6) << "samples             " << r.samples << '\n'
            << "row sums            " << (r.row_sums_ok() ? "ok" : "FAIL") << "  max " << r.max_row_sum << '\n'
            << "detailed balance    " << (r.detailed_balance_ok() ? "ok" : "FAIL") << "  max "
            << r.max_detailed_balance << '\n'
            << "irreducible         " << (r.irreducible ? "ok" : "FAIL") << '\n'
            << "dQ finite diff      " << (r.dq_ok() ? "ok" : "FAIL") << "  max " << r.max_dq_error << '\n'
            << "H = dU finite diff  " << (r.h_ok() ? "ok" : "FAIL") << "  max " << r.max_h_error << '\n'
            << (r.passed() ? "valid" : "INVALID") << '\n';
  return r.passed() ? 0 : 1;
}

int run_simulate(const ModelArgs& m, const Common& c, const std::vector<double>& mu0, double t_max, double tol) {
  const auto triple = make_model(m);
  const auto start = measure_arg(mu0, triple.size(), "--mu0");
  IntegrateOptions io;
  io.tol = tol;
  const Trajectory tr = integrate(triple, start, t_max, io);
  const Vector& last = tr.states.back().weights();
  std::cout << std::setprecision(12) << "steps " << tr.size() - 1 << "\nt_final " << tr.times.back() << "\nmu_final "
            << fmt_vec(last) << "\nF_final " << free_energy(triple, last) << "\nI_final " << fisher_info(triple, last)
            << '\n';
  write_out(c.out, [&](std::ostream& f) { write_trajectory_csv(f, triple, tr); });
  if (c.out.empty()) write_trajectory_csv(std::cout, triple, tr);
  return 0;
}

int run_stationary(const ModelArgs& m, const Common& c, std::size_t starts) {
  const auto triple = make_model(m);
  StationaryOptions so;
  so.seed = c.seed;
  const auto set = find_stationary(triple, starts, so);
  std::cout << "points " << set.size() << '\n' << std::setprecision(12);
  for (std::size_t i = 0; i < set.size(); ++i)
    std::cout << "pi_" << i << ' ' << fmt_vec(set.points[i].weights()) << " residual " << set.residuals[i] << " F "
              << set.free_energies[i] << (i == set.global_minimizer ? "  [global minimizer]" : "") << '\n';
  return 0;
}

int run_curvature(const ModelArgs& m, const Common& c, std::size_t starts, const std::vector<double>& margins) {
  const auto triple = make_model(m);
  KappaOptions ko;
  ko.starts = starts;
  ko.margins = margins;
  ko.seed = c.seed;
  const auto rep = kappa_opt(triple, ko);
  std::cout << std::fixed << std::setprecision(6) << "kappa_opt = " << rep.kappa_opt << '\n'
            << "argmin_mu = " << fmt_vec(rep.argmin_mu->weights()) << '\n';
  for (const auto& e : rep.margin_profile)
    std::cout << "  margin " << std::scientific << std::setprecision(1) << e.epsilon << std::fixed
              << std::setprecision(6) << "  kappa_inf " << e.kappa_inf << '\n';
  std::cout << "certified = false (numerical estimate)\n";
  if (rep.still_decreasing) std::cout << "caveat: profile still decreasing at the smallest margin\n";
  if (rep.extrapolated) std::cout << "note: beta > 1, negative-curvature regime (extrapolated)\n";
  if (triple.size() == 2) std::cout << "two-point closed form = " << two_point_kappa(triple) << '\n';
  if (triple.family() == ModelFamily::separable && triple.spec()) {
    const auto sb = separable_bound(triple.spec()->a_poly, triple.spec()->b_poly, triple.size());
    std::cout << "separable bound: lambda = " << sb.lambda << " kappa_bound = " << sb.kappa_bound
              << " applicable = " << (sb.applicable ? "yes" : "no");
    if (!sb.diagnostic.empty()) std::cout << " (" << sb.diagnostic << ')';
    std::cout << '\n';
  }
  write_out(c.out, [&](std::ostream& f) { write_curvature_csv(f, rep); });
  return 0;
}

int run_two_point(const ModelArgs& m) {
  const auto triple = make_model(m);
  std::cout << std::setprecision(10) << "kappa_two_point = " << two_point_kappa(triple) << '\n';
  if (triple.family() == ModelFamily::mean_field_pair && triple.spec() && triple.spec()->beta > 1.0)
    std::cout << "note: beta > 1, formula evaluated outside the stated regime\n";
  return 0;
}

int run_separable_bound(const ModelArgs& m) {
  const auto sb = separable_bound(Polynomial(m.a), Polynomial(m.b), m.states);
  std::cout << std::setprecision(10) << "a in [" << sb.a_min << ", " << sb.a_max << "]  Lip a = " << sb.lip_a << '\n'
            << "b in [" << sb.b_min << ", " << sb.b_max << "]  Lip b = " << sb.lip_b << '\n'
            << "lambda = " << sb.lambda << '\n'
            << "kappa_bound = " << sb.kappa_bound << '\n'
            << "applicable = " << (sb.applicable ? "true" : "false") << '\n';
  if (!sb.diagnostic.empty()) std::cout << "diagnostic: " << sb.diagnostic << '\n';
  return 0;
}

int run_distance(const ModelArgs& m, const Common& c, const std::vector<double>& a, const std::vector<double>& b,
                 std::size_t K, bool geo) {
  const auto triple = make_model(m);
  const auto mu0 = measure_arg(a, triple.size(), "--mu0"), mu1 = measure_arg(b, triple.size(), "--mu1");
  DistanceOptions o;
  o.K = K;
  o.require_convergence = false;
  DistanceResult d;
  double residual = 0.0;
  if (geo) {
    auto g = geodesic(triple, mu0, mu1, o);
    d = std::move(g.distance);
    residual = g.residual;
  } else {
    d = distance(triple, mu0, mu1, o);
  }
  std::cout << std::setprecision(12) << "W = " << d.W << "\nK = " << d.K << "\nconverged = " << (d.converged ? 1 : 0)
            << "\ngradient_norm = " << d.gradient_norm << "\nmin_knot_mass = " << d.min_knot_mass << '\n';
  if (d.clamped) std::cout << "note: boundary endpoint clamped by " << o.boundary_clamp << '\n';
  if (geo) std::cout << "geodesic_residual = " << residual << '\n';
  write_out(c.out, [&](std::ostream& f) { write_path_csv(f, d.path); });
  return d.converged ? 0 : 1;
}

struct VerifyArgs {
  std::string kind;
  double lambda = 1.0;
  double kappa = 1.0;
  std::size_t samples = 100;
  double T = 2.0;
  std::size_t K = defaults::distance_steps;
  std::size_t fine_K = 4 * defaults::distance_steps;
  double alpha = 1.0;
};

CheckReport verify(const NonlinearMarkovTriple& triple, const VerifyArgs& v, std::uint64_t seed) {
  CheckOptions o;
  o.seed = seed;
  o.K = v.K;
  o.fine_K = v.fine_K;
  o.T = v.T;
  const MeasureSampler s = DirichletSampler{v.alpha, defaults::sampler_floor};
  auto stationary = [&] {
    StationaryOptions so;
    so.seed = seed;
    return find_stationary(triple, 16, so);
  };
  if (v.kind == "mlsi") return check_mlsi(triple, v.lambda, stationary(), s, v.samples, o);
  if (v.kind == "et") return check_et(triple, v.lambda, stationary(), s, v.samples, o);
  if (v.kind == "decay") return check_decay(triple, v.lambda, stationary(), s, v.samples, o);
  if (v.kind == "fwi") return check_fwi(triple, v.kappa, independent_pairs(s), v.samples, o);
  if (v.kind == "contraction") return check_contraction(triple, v.kappa, independent_pairs(s), v.samples, o);
  if (v.kind == "evi") return check_evi(triple, v.kappa, independent_pairs(s), v.samples, o);
  return check_dissipation(triple, s, v.samples, o);
}

int run_verify(const ModelArgs& m, const Common& c, const VerifyArgs& v) {
  const auto triple = make_model(m);
  const auto rep = verify(triple, v, c.seed);
  std::cout << check_summary(rep).dump(2) << '\n';
  write_out(c.out, [&](std::ostream& f) { write_check_csv(f, rep); });
  return rep.passed ? 0 : 1;
}

// Full reproduction suite with default settings.
int run_report(const Common& c) {
  bool ok = true;
  std::cout << std::fixed << std::setprecision(6);
  std::cout << "== Curie-Weiss curvature sweep (glauber) ==\n"
            << "beta      kappa_opt   two_point   2(1-beta)\n";
  for (double beta : {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5}) {
    const auto cw = curie_weiss(beta);
    KappaOptions ko;
    ko.seed = c.seed;
    const double k = kappa_opt(cw, ko).kappa_opt, tp = two_point_kappa(cw);
    std::cout << beta << "  " << std::setw(10) << k << "  " << std::setw(10) << tp << "  " << std::setw(10)
              << 2 * (1 - beta) << (beta > 1 ? "  (beta > 1: extrapolated)" : "") << '\n';
    if (beta <= 1.0 && std::abs(k - 2 * (1 - beta)) > 0.02) ok = false;
  }
  std::cout << "\n== Separable rates a(r) = 20 + r, b = 1 ==\n"
            << "n   lambda     kappa_bound   kappa_opt\n";
  for (std::size_t n : {3u, 5u}) {
    const Polynomial a{20.0, 1.0}, b{1.0};
    const auto sb = separable_bound(a, b, n);
    KappaOptions ko;
    ko.seed = c.seed;
    const double k = kappa_opt(build_separable(a, b, n), ko).kappa_opt;
    std::cout << n << "   " << sb.lambda << "   " << std::setw(10) << sb.kappa_bound << "   " << std::setw(10) << k
              << '\n';
    if (!sb.applicable || k < sb.kappa_bound - 1e-6) ok = false;
  }
  std::cout << "\n== Inequalities, Curie-Weiss beta = 0.5, lambda = kappa = 1 ==\n";
  const auto cw = curie_weiss(0.5);
  const auto set = find_stationary(cw, 16);
  CheckOptions o;
  o.seed = c.seed;
  const auto s = default_sampler();
  std::vector<CheckReport> reps;
  reps.push_back(check_mlsi(cw, 1.0, set, s, 10000, o));
  reps.push_back(check_et(cw, 1.0, set, s, 50, o));
  reps.push_back(check_decay(cw, 1.0, set, s, 50, o));
  reps.push_back(check_fwi(cw, 1.0, independent_pairs(s), 20, o));
  o.T = 1.0;
  reps.push_back(check_contraction(cw, 1.0, independent_pairs(s), 10, o));
  reps.push_back(check_evi(cw, 1.0, independent_pairs(s), 20, o));
  o.T = 5.0;
  reps.push_back(check_dissipation(cw, s, 20, o));
  for (const auto& r : reps) {
    std::cout << std::left << std::setw(12) << r.name << std::right << " samples " << std::setw(5) << r.n_samples
              << "  worst_slack " << std::scientific << std::setprecision(3) << r.worst_slack << std::fixed
              << std::setprecision(6) << "  " << (r.passed ? "pass" : "FAIL") << '\n';
    ok = ok && r.passed;
  }
  std::cout << "\n== Curie-Weiss beta = 1.5 ==\n";
  const auto cw15 = curie_weiss(1.5);
  const auto set15 = find_stationary(cw15, 16);
  std::cout << "stationary points: " << set15.size() << '\n';
  for (const auto& p : set15.points) std::cout << "  " << fmt_vec(p.weights()) << '\n';
  const auto m15 = check_mlsi(cw15, 0.5, set15, s, 10000, o);
  std::cout << "MLSI at lambda = 0.5: " << (m15.passed ? "pass (unexpected)" : "violated")
            << ", witness " << fmt_vec(m15.worst_case_input.front()) << ", slack " << m15.worst_slack << '\n';
  if (set15.size() != 3 || m15.passed) ok = false;
  std::cout << '\n' << (ok ? "report: all checks consistent" : "report: some checks FAILED") << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfcurv: curvature and functional inequalities for mean-field Markov chains"};
  app.require_subcommand(1);
  ModelArgs model;
  Common common;

  auto* validate_cmd = app.add_subcommand("validate", "check rate structure, detailed balance and derivatives");
  std::size_t val_samples = 100;
  validate_cmd->add_option("--samples", val_samples, "interior sample count")->capture_default_str();

  auto* simulate_cmd = app.add_subcommand("simulate", "integrate the master equation");
  std::vector<double> mu0, mu1;
  double t_max = 10.0, int_tol = defaults::integrator_tol;
  simulate_cmd->add_option("--mu0", mu0, "initial measure, comma separated")->delimiter(',')->required();
  simulate_cmd->add_option("--t-max", t_max, "final time")->capture_default_str();
  simulate_cmd->add_option("--tol", int_tol, "integrator tolerance")->capture_default_str();

  auto* stationary_cmd = app.add_subcommand("stationary", "find stationary points");
  std::size_t starts = defaults::kappa_starts;
  stationary_cmd->add_option("--starts", starts, "number of starting measures")->capture_default_str();

  auto* curvature_cmd = app.add_subcommand("curvature", "estimate kappa_opt = inf_mu kappa(mu)");
  std::vector<double> margins{1e-2, 1e-3, 1e-4};
  curvature_cmd->add_option("--starts", starts, "multistart count")->capture_default_str();
  curvature_cmd->add_option("--margins", margins, "interior margins")->delimiter(',')->capture_default_str();

  auto* two_point_cmd = app.add_subcommand("two-point", "closed-form curvature on two-point spaces");
  auto* sep_cmd = app.add_subcommand("separable-bound", "analytic curvature bound for separable rates");

  std::size_t K = defaults::distance_steps;
  auto* distance_cmd = app.add_subcommand("distance", "transport distance between two measures");
  auto* geodesic_cmd = app.add_subcommand("geodesic", "geodesic between two interior measures");
  for (auto* cmd : {distance_cmd, geodesic_cmd}) {
    cmd->add_option("--mu0", mu0, "first measure")->delimiter(',')->required();
    cmd->add_option("--mu1", mu1, "second measure")->delimiter(',')->required();
    cmd->add_option("--K", K, "time steps")->capture_default_str();
  }

  VerifyArgs va;
  auto* verify_cmd = app.add_subcommand("verify", "sample-based check of an inequality");
  verify_cmd->add_option("kind", va.kind, "mlsi | et | fwi | decay | contraction | evi | dissipation")
      ->required()
      ->check(CLI::IsMember({"mlsi", "et", "fwi", "decay", "contraction", "evi", "dissipation"}));
  verify_cmd->add_option("--lambda", va.lambda, "rate for mlsi / et / decay")->capture_default_str();
  verify_cmd->add_option("--kappa", va.kappa, "curvature for fwi / contraction / evi")->capture_default_str();
  verify_cmd->add_option("--samples", va.samples, "sample count")->capture_default_str();
  verify_cmd->add_option("--T", va.T, "time horizon for decay / contraction / dissipation")->capture_default_str();
  verify_cmd->add_option("--K", va.K, "distance time steps")->capture_default_str();
  verify_cmd->add_option("--fine-K", va.fine_K, "fine distance time steps")->capture_default_str();
  verify_cmd->add_option("--alpha", va.alpha, "Dirichlet concentration of the sampler")->capture_default_str();

  auto* report_cmd = app.add_subcommand("report", "run the full reproduction suite");

  for (auto* cmd : {validate_cmd, simulate_cmd, stationary_cmd, curvature_cmd, two_point_cmd, distance_cmd,
                    geodesic_cmd, verify_cmd})
    add_model_options(cmd, model);
  add_model_options(sep_cmd, model);
  for (auto* cmd : app.get_subcommands({})) add_common_options(cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (common.threads > 0) set_thread_limit(common.threads);
  try {
    if (*validate_cmd) return run_validate(model, common, val_samples);
    if (*simulate_cmd) return run_simulate(model, common, mu0, t_max, int_tol);
    if (*stationary_cmd) return run_stationary(model, common, starts);
    if (*curvature_cmd) return run_curvature(model, common, starts, margins);
    if (*two_point_cmd) return run_two_point(model);
    if (*sep_cmd) return run_separable_bound(model);
    if (*distance_cmd) return run_distance(model, common, mu0, mu1, K, false);
    if (*geodesic_cmd) return run_distance(model, common, mu0, mu1, K, true);
    if (*verify_cmd) return run_verify(model, common, va);
    if (*report_cmd) return run_report(common);
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
