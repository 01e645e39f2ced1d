#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lagrq/eigenpairs.hpp"
#include "lagrq/instances.hpp"
#include "lagrq/solvers.hpp"

namespace lagrq {

enum class Command {
  Eig,
  TensorReal,
  TensorComplex,
  Nlep,
  Stiefel,
  Grassmann,
  Graph,
};

enum class SolverKind { NewtonRaphson, Chebyshev, RqiSchur, RqiTangent, RcSchur };

enum class OutputFormat { Csv, Json };

SolverKind solver_kind_from_string(const std::string& s);
const char* to_string(SolverKind k);
const char* to_string(Command c);

struct ExperimentSpec {
  Command command = Command::Eig;
  int m = 3;
  int n = 5;
  int p = 2;
  int degree = 2;
  int trials = 10;
  std::uint64_t seed = 0;
  SolverKind solver = SolverKind::RqiSchur;
  double tol = 1e-12;
  int max_iter = 100;
  std::string output_path;
  OutputFormat format = OutputFormat::Csv;
  bool trace = false;
  bool wallclock = false;
  bool heavy = false;
  bool symmetric = true;  // eig: symmetric test matrices
  int workers = 1;
  std::string tensor_file;   // optional input for the tensor commands
  std::string table_output;  // tensor-complex: export the eigenpair table
};

struct RunRecord {
  int trial = 0;
  bool converged = false;
  int iterations = 0;
  double final_residual = 0;
  double estimated_order = 0;  // NaN when the history does not qualify
  // nlep: iteration counts of the companion solvers on the same seed
  int iterations_two_sided = -1;
  int iterations_rc = -1;
  // tensor-complex: enumeration row
  long long n_trys = 0;
  long long n_pairs = 0;
  long long n_real_pairs = 0;
  int n_multiple_eigen = 0;
  long long restarts_90 = -1;
  long long restarts_all = -1;
  double wall_ms = 0;
  std::vector<double> residuals;  // filled in trace mode
  std::vector<double> steps;
  std::vector<Vec> lambdas;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<RunRecord> runs;
  int exit_code = 0;
};

/// Runs the experiment, prints a summary to `out`, optionally writes the
/// result file (CSV or JSON; first line/field is a timestamp which is the
/// only non-reproducible content for a fixed spec+seed).
ExperimentResult run_experiment(const ExperimentSpec& spec, std::ostream& out);

/// CSV header for a command (schema stability contract).
std::string csv_header(const ExperimentSpec& spec);

/// Serialized result file contents.
std::string render_csv(const ExperimentResult& result, const std::string& stamp);
std::string render_json(const ExperimentResult& result, const std::string& stamp);

/// Enumerates every (m, n) with 3 <= m <= m_max, 2 <= n <= n_max whose class
/// count stays within `count_cap`, over `trials` random tensors each, and
/// compares against the count formula. Returns 0 iff every run reached the
/// full count.
int verify_counts(int m_max, int n_max, int trials, std::uint64_t seed,
                  std::ostream& out, long long count_cap = 200, int workers = 1);

}  // namespace lagrq
