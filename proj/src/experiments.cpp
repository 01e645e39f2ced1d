#include "lagrq/experiments.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

namespace lagrq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vec random_unit(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v / v.norm();
}

CVec random_unit_complex(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  CVec z(n);
  for (int i = 0; i < n; ++i) z(i) = Complex(normal(rng), normal(rng));
  return z / z.norm();
}

Mat random_matrix(int n, std::uint64_t seed, bool symmetric) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat A(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) A(i, j) = normal(rng);
  if (symmetric) A = ((A + A.transpose()) / 2.0).eval();
  return A;
}

double try_order(const std::vector<double>& residuals) {
  try {
    return convergence_order(residuals);
  } catch (const InsufficientHistoryError&) {
    return kNaN;
  }
}

SolverConfig make_config(const ExperimentSpec& spec) {
  SolverConfig cfg;
  cfg.max_iter = spec.max_iter;
  cfg.tol_residual = spec.tol;
  cfg.seed = spec.seed;
  return cfg;
}

SolveResult dispatch(const Problem& prob, SolverKind kind, const Vec& x0,
                     const SolverConfig& cfg) {
  switch (kind) {
    case SolverKind::NewtonRaphson:
      return newton_raphson_constrained(prob.lag, prob.constraint, x0,
                                        prob.lag.rayleigh.value(x0), cfg);
    case SolverKind::Chebyshev:
      return chebyshev_constrained(prob.lag, prob.constraint, x0,
                                   prob.lag.rayleigh.value(x0), cfg);
    case SolverKind::RqiSchur:
      return rqi_schur(prob, x0, cfg);
    case SolverKind::RqiTangent:
      return rqi_tangent(prob, x0, cfg);
    case SolverKind::RcSchur:
      return rayleigh_chebyshev_schur(prob, x0, cfg);
  }
  throw std::logic_error("dispatch: unknown solver");
}

RunRecord record_from(const SolveResult& sol, int trial, bool keep_history) {
  RunRecord r;
  r.trial = trial;
  r.converged = sol.converged;
  r.iterations = sol.iterations;
  r.final_residual =
      sol.residual_history.empty() ? kNaN : sol.residual_history.back();
  r.estimated_order = try_order(sol.residual_history);
  if (keep_history) {
    r.residuals = sol.residual_history;
    r.steps = sol.step_history;
  }
  return r;
}

std::string timestamp_now() {
  const std::time_t t = std::time(nullptr);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
  return buf;
}

}  // namespace

SolverKind solver_kind_from_string(const std::string& s) {
  if (s == "nr") return SolverKind::NewtonRaphson;
  if (s == "chebyshev") return SolverKind::Chebyshev;
  if (s == "rqi-schur") return SolverKind::RqiSchur;
  if (s == "rqi-tangent") return SolverKind::RqiTangent;
  if (s == "rc-schur") return SolverKind::RcSchur;
  throw std::invalid_argument("unknown solver: " + s);
}

const char* to_string(SolverKind k) {
  switch (k) {
    case SolverKind::NewtonRaphson: return "nr";
    case SolverKind::Chebyshev: return "chebyshev";
    case SolverKind::RqiSchur: return "rqi-schur";
    case SolverKind::RqiTangent: return "rqi-tangent";
    case SolverKind::RcSchur: return "rc-schur";
  }
  return "?";
}

const char* to_string(Command c) {
  switch (c) {
    case Command::Eig: return "eig";
    case Command::TensorReal: return "tensor-real";
    case Command::TensorComplex: return "tensor-complex";
    case Command::Nlep: return "nlep";
    case Command::Stiefel: return "stiefel";
    case Command::Grassmann: return "grassmann";
    case Command::Graph: return "graph";
  }
  return "?";
}

namespace {

RunRecord run_trial(const ExperimentSpec& spec, int trial) {
  const std::uint64_t tseed =
      spec.seed + 0x100000001ull * static_cast<std::uint64_t>(trial);
  SolverConfig cfg = make_config(spec);
  const bool keep = spec.trace;
  std::vector<Vec> lambda_trace;
  if (keep)
    cfg.observer = [&lambda_trace](const IterationRecord& rec) {
      lambda_trace.push_back(rec.lambda);
    };
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;

  switch (spec.command) {
    case Command::Eig: {
      const Mat A = random_matrix(spec.n, tseed, spec.symmetric);
      Problem prob = matrix_eigen(A, EigenConstraint::Sphere,
                                  EigenLeftInverse::Gram);
      rec = record_from(dispatch(prob, spec.solver, random_unit(spec.n, tseed ^ 1), cfg),
                        trial, keep);
      break;
    }
    case Command::TensorReal: {
      const SymmetricTensor T =
          spec.tensor_file.empty()
              ? SymmetricTensor::random(spec.m, spec.n, tseed)
              : tensor_from_json_file(spec.tensor_file);
      Problem prob = tensor_eigen_real(T);
      rec = record_from(
          dispatch(prob, spec.solver, random_unit(T.dim(), tseed ^ 1), cfg),
          trial, keep);
      break;
    }
    case Command::TensorComplex: {
      const SymmetricTensor T =
          spec.tensor_file.empty()
              ? SymmetricTensor::random(spec.m, spec.n, tseed)
              : tensor_from_json_file(spec.tensor_file);
      const long long budget =
          spec.heavy ? 1000 * cartwright_count(T.order(), T.dim()) : 0;
      EnumerationOutcome eo =
          enumerate_complex(T, cfg, budget, tseed ^ 2, spec.workers);
      if (!spec.table_output.empty()) {
        std::string path = spec.table_output;
        if (trial > 0) path += ".trial" + std::to_string(trial);
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot write " + path);
        f << (spec.format == OutputFormat::Csv ? table_to_csv(eo.table)
                                               : table_to_json(eo.table));
      }
      rec.trial = trial;
      rec.converged = eo.complete();
      rec.n_trys = eo.restarts;
      rec.n_pairs = eo.table.class_count();
      for (const auto& r : eo.table.records)
        if (r.is_real && !r.zero_eigenvalue) ++rec.n_real_pairs;
      rec.n_multiple_eigen = eo.n_multiple_eigen;
      rec.restarts_90 = eo.restarts_to_90;
      rec.restarts_all = eo.restarts_to_all;
      double worst = 0;
      for (const auto& r : eo.table.records) worst = std::max(worst, r.residual);
      rec.final_residual = worst;
      rec.estimated_order = kNaN;
      break;
    }
    case Command::Nlep: {
      const PolynomialMatrix P =
          PolynomialMatrix::random(spec.n, spec.degree, tseed, false);
      const CVec z0 = random_unit_complex(spec.n, tseed ^ 1);
      Problem one = nlep_complex_linear(P, z0);
      SolveResult sol;
      if (spec.solver == SolverKind::RcSchur)
        sol = rayleigh_chebyshev_schur(one, realify(z0), cfg);
      else if (spec.solver == SolverKind::RqiTangent)
        sol = rqi_tangent(one, realify(z0), cfg);
      else
        sol = rqi_schur(one, realify(z0), cfg);
      rec = record_from(sol, trial, keep);
      {
        Problem two = nlep_two_sided(P);
        Vec s0(4 * spec.n);
        s0.head(2 * spec.n) = realify(z0);
        s0.tail(2 * spec.n) = realify(random_unit_complex(spec.n, tseed ^ 3));
        SolveResult ts = rqi_schur(two, s0, cfg);
        rec.iterations_two_sided = ts.converged ? ts.iterations : -1;
      }
      {
        Problem rcp = nlep_complex_linear(P, z0);
        SolveResult rc = rayleigh_chebyshev_schur(rcp, realify(z0), cfg);
        rec.iterations_rc = rc.converged ? rc.iterations : -1;
      }
      break;
    }
    case Command::Stiefel: {
      Problem prob = stiefel_random(spec.n, spec.p, tseed);
      // random feasible start: thin-QR frame of a Gaussian matrix
      std::mt19937_64 rng(tseed ^ 1);
      std::normal_distribution<double> normal(0.0, 1.0);
      Mat G(spec.n, spec.p);
      for (int j = 0; j < spec.p; ++j)
        for (int i = 0; i < spec.n; ++i) G(i, j) = normal(rng);
      Eigen::HouseholderQR<Mat> qr(G);
      Mat Q = Mat(qr.householderQ()).leftCols(spec.p);
      Vec x0 = Eigen::Map<const Vec>(Q.data(), spec.n * spec.p);
      rec = record_from(dispatch(prob, spec.solver, x0, cfg), trial, keep);
      break;
    }
    case Command::Grassmann: {
      const Mat A = random_matrix(spec.n, tseed, true);
      std::mt19937_64 rng(tseed ^ 1);
      std::normal_distribution<double> normal(0.0, 1.0);
      Mat G(spec.n, spec.p);
      for (int j = 0; j < spec.p; ++j)
        for (int i = 0; i < spec.n; ++i) G(i, j) = normal(rng);
      Eigen::HouseholderQR<Mat> qr(G);
      Mat x0 = Mat(qr.householderQ()).leftCols(spec.p);
      rec = record_from(grassmann_invariant_solve(A, spec.p, x0, cfg), trial, keep);
      break;
    }
    case Command::Graph: {
      auto [prob, xs, ls] = graph_problem_with_solution(
          spec.n, GraphF::LinearPlusSin, GraphH::Constant, tseed);
      const int dim = spec.n + 2;
      Vec delta = 0.05 * random_unit(dim, tseed ^ 1);
      Vec x0 = prob.constraint.retraction.apply(xs, delta);
      if (spec.solver == SolverKind::NewtonRaphson ||
          spec.solver == SolverKind::Chebyshev)
        rec = record_from(dispatch(prob, spec.solver, x0, cfg), trial, keep);
      else
        rec = record_from(rqi_schur(prob, x0, cfg), trial, keep);
      break;
    }
  }
  const auto t1 = std::chrono::steady_clock::now();
  rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  rec.trial = trial;
  if (keep) rec.lambdas = std::move(lambda_trace);
  return rec;
}

}  // namespace

std::string csv_header(const ExperimentSpec& spec) {
  if (spec.trace) return "i,residual,step_norm,lambda...";
  switch (spec.command) {
    case Command::TensorComplex:
      return "trial,n_trys,n_pairs,n_real_pairs,n_multiple_eigen,restarts_90,"
             "restarts_all,max_residual,complete";
    case Command::Nlep:
      return "trial,converged,iterations,final_residual,estimated_order,"
             "iterations_two_sided,iterations_rc";
    default:
      return "trial,converged,iterations,final_residual,estimated_order";
  }
}

std::string render_csv(const ExperimentResult& result, const std::string& stamp) {
  std::ostringstream os;
  os.precision(17);
  os << "# generated " << stamp << "\n";
  os << csv_header(result.spec) << "\n";
  if (result.spec.trace) {
    if (!result.runs.empty()) {
      const RunRecord& r = result.runs.front();
      for (std::size_t i = 0; i < r.residuals.size(); ++i) {
        os << i << "," << r.residuals[i] << ","
           << (i < r.steps.size() ? r.steps[i] : 0.0);
        const Vec* lam = i < r.lambdas.size()
                             ? &r.lambdas[i]
                             : (r.lambdas.empty() ? nullptr : &r.lambdas.back());
        if (lam)
          for (int k = 0; k < lam->size(); ++k) os << "," << (*lam)(k);
        os << "\n";
      }
    }
    return os.str();
  }
  for (const auto& r : result.runs) {
    switch (result.spec.command) {
      case Command::TensorComplex:
        os << r.trial << "," << r.n_trys << "," << r.n_pairs << ","
           << r.n_real_pairs << "," << r.n_multiple_eigen << "," << r.restarts_90
           << "," << r.restarts_all << "," << r.final_residual << ","
           << (r.converged ? 1 : 0) << "\n";
        break;
      case Command::Nlep:
        os << r.trial << "," << (r.converged ? 1 : 0) << "," << r.iterations
           << "," << r.final_residual << "," << r.estimated_order << ","
           << r.iterations_two_sided << "," << r.iterations_rc << "\n";
        break;
      default:
        os << r.trial << "," << (r.converged ? 1 : 0) << "," << r.iterations
           << "," << r.final_residual << "," << r.estimated_order << "\n";
        break;
    }
  }
  return os.str();
}

std::string render_json(const ExperimentResult& result, const std::string& stamp) {
  nlohmann::json j;
  j["generated"] = stamp;
  j["command"] = to_string(result.spec.command);
  j["solver"] = to_string(result.spec.solver);
  j["seed"] = result.spec.seed;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : result.runs) {
    nlohmann::json rec;
    rec["trial"] = r.trial;
    rec["converged"] = r.converged;
    rec["iterations"] = r.iterations;
    rec["final_residual"] = r.final_residual;
    if (std::isfinite(r.estimated_order)) rec["estimated_order"] = r.estimated_order;
    if (result.spec.command == Command::Nlep) {
      rec["iterations_two_sided"] = r.iterations_two_sided;
      rec["iterations_rc"] = r.iterations_rc;
    }
    if (result.spec.command == Command::TensorComplex) {
      rec["n_trys"] = r.n_trys;
      rec["n_pairs"] = r.n_pairs;
      rec["n_real_pairs"] = r.n_real_pairs;
      rec["n_multiple_eigen"] = r.n_multiple_eigen;
      rec["restarts_90"] = r.restarts_90;
      rec["restarts_all"] = r.restarts_all;
    }
    if (result.spec.trace) {
      rec["residuals"] = r.residuals;
      rec["steps"] = r.steps;
    }
    if (result.spec.wallclock) rec["wall_ms_non_normative"] = r.wall_ms;
    j["runs"].push_back(rec);
  }
  return j.dump(2);
}

namespace {

void validate_solver(const ExperimentSpec& spec) {
  switch (spec.command) {
    case Command::TensorComplex:
    case Command::Grassmann:
      if (spec.solver != SolverKind::RqiSchur)
        throw std::invalid_argument(std::string(to_string(spec.command)) +
                                    " only runs with rqi-schur");
      break;
    case Command::Nlep:
      if (spec.solver == SolverKind::NewtonRaphson ||
          spec.solver == SolverKind::Chebyshev)
        throw std::invalid_argument("nlep runs with the rqi-family solvers");
      break;
    default:
      break;
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, std::ostream& out) {
  if (spec.trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (spec.trace && spec.trials != 1)
    throw std::invalid_argument("--trace requires a single trial");
  validate_solver(spec);
  ExperimentResult result;
  result.spec = spec;
  for (int t = 0; t < spec.trials; ++t) result.runs.push_back(run_trial(spec, t));

  // summary
  int converged = 0;
  double iter_sum = 0;
  std::vector<double> orders;
  for (const auto& r : result.runs) {
    if (r.converged) {
      ++converged;
      iter_sum += r.iterations;
    }
    if (std::isfinite(r.estimated_order)) orders.push_back(r.estimated_order);
  }
  out << to_string(spec.command) << " solver=" << to_string(spec.solver)
      << " trials=" << spec.trials << " converged=" << converged;
  if (converged > 0) out << " avg_iterations=" << iter_sum / converged;
  if (!orders.empty()) {
    std::sort(orders.begin(), orders.end());
    out << " median_order=" << orders[orders.size() / 2];
  }
  if (spec.command == Command::TensorComplex) {
    long long pairs = 0, reals = 0;
    int complete = 0;
    for (const auto& r : result.runs) {
      pairs += r.n_pairs;
      reals += r.n_real_pairs;
      complete += r.converged ? 1 : 0;
    }
    out << " avg_pairs=" << static_cast<double>(pairs) / spec.trials
        << " avg_real_pairs=" << static_cast<double>(reals) / spec.trials
        << " complete_runs=" << complete;
    if (complete < spec.trials) result.exit_code = 1;
  }
  if (spec.wallclock) {
    double ms = 0;
    for (const auto& r : result.runs) ms += r.wall_ms;
    out << " avg_wall_ms(non-normative)=" << ms / spec.trials;
  }
  out << "\n";

  if (!spec.output_path.empty()) {
    std::ofstream f(spec.output_path);
    if (!f) throw std::runtime_error("cannot write " + spec.output_path);
    const std::string stamp = timestamp_now();
    f << (spec.format == OutputFormat::Csv ? render_csv(result, stamp)
                                           : render_json(result, stamp));
  }
  return result;
}

int verify_counts(int m_max, int n_max, int trials, std::uint64_t seed,
                  std::ostream& out, long long count_cap, int workers) {
  bool all_ok = true;
  for (int m = 3; m <= m_max; ++m) {
    for (int n = 2; n <= n_max; ++n) {
      const long long target = cartwright_count(m, n);
      if (target > count_cap) {
        out << "m=" << m << " n=" << n << " target=" << target
            << " SKIP (above cap " << count_cap << ")\n";
        continue;
      }
      for (int t = 0; t < trials; ++t) {
        const SymmetricTensor T = SymmetricTensor::random(
            m, n, seed + 1000003ull * static_cast<std::uint64_t>(t));
        SolverConfig cfg;
        EnumerationOutcome eo = enumerate_complex(T, cfg, 0, seed ^ (m * 131 + n),
                                                  workers);
        const bool ok = eo.complete();
        all_ok = all_ok && ok;
        out << "m=" << m << " n=" << n << " trial=" << t << " target=" << target
            << " found=" << eo.table.class_count() << " restarts=" << eo.restarts;
        if (!ok) out << " completeness=" << eo.completeness();
        out << (ok ? " OK" : " FAIL") << "\n";
      }
    }
  }
  return all_ok ? 0 : 1;
}

}  // namespace lagrq
