#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lagrq/instances.hpp"
#include "lagrq/multilinear.hpp"
#include "lagrq/solvers.hpp"

namespace lagrq {

/// Number of complex eigenpair classes of a symmetric order-m tensor on
/// C^n: ((m-1)^n - 1)/(m-2) for m > 2, n for m = 2. Exact integers.
long long cartwright_count(int m, int n);

/// One deduplicated eigenpair class. z is the unit representative with
/// real lambda; for odd m lambda >= 0, for even m a real-negative lambda
/// can survive normalization (the sign choice t^{m-2} = -1 needs m odd).
struct EigenpairRecord {
  CVec z;
  double lambda = 0;
  double residual = 0;
  bool is_real = false;
  bool self_conjugate = false;
  bool zero_eigenvalue = false;
  int hits = 1;
};

struct NormalizedPair {
  CVec z;
  double lambda = 0;
  bool zero = false;
};

/// Scales (lambda, z) by the phase t = exp(-i arg(lambda)/(m-2)) making
/// lambda real (nonnegative whenever a sign choice exists); |lambda| below
/// 1e-13 is flagged zero and left unnormalized.
NormalizedPair normalize_pair(const CVec& z, Complex lambda, int m);

/// True iff z2 = t z1 with |<z1,z2>| >= 1 - tol and t^{m-2} within tol of 1
/// (the lambda-preserving equivalence).
bool pairs_equivalent(const CVec& z1, const CVec& z2, int m, double tol);

/// Full class equivalence of two normalized records, allowing the
/// t^{m-2} = -1 branch that flips the sign of lambda (reachable for even m).
bool records_equivalent(const EigenpairRecord& a, const EigenpairRecord& b,
                        int m, double tol);

enum class ConjugateStatus { SelfConjugate, DistinctConjugate };

/// Self-conjugate iff (z^T z) conj(z) recovers z.
ConjugateStatus conjugate_status(const CVec& z, double tol = 1e-8);

/// True iff some unit phase makes z entrywise real; candidates are +/- the
/// phase of the largest-magnitude entry.
bool is_real_pair(const CVec& z, double tol = 1e-8);

/// The real vector t*z when is_real_pair holds.
std::optional<Vec> real_form(const CVec& z, double tol = 1e-8);

struct EigenpairTable {
  int order = 0;
  int dim = 0;
  long long target_count = 0;
  double dedup_tol = 1e-6;
  std::vector<EigenpairRecord> records;

  /// Classes counted against the target (zero-eigenvalue records excluded).
  long long class_count() const;

  /// Linearizable insert-if-new; bumps hits on an equivalent existing
  /// record. Returns true when a new record was added.
  bool insert(const NormalizedPair& np, double residual);
};

struct EnumerationOutcome {
  EigenpairTable table;
  long long restarts = 0;
  long long converged_runs = 0;
  long long restarts_to_90 = -1;  // restart count when 90% of target found
  long long restarts_to_all = -1;
  int n_multiple_eigen = 0;  // same lambda, inequivalent non-conjugate vectors
  bool complete() const { return table.class_count() >= table.target_count; }
  double completeness() const {
    return table.target_count > 0
               ? static_cast<double>(table.class_count()) / table.target_count
               : 1.0;
  }
};

/// Random-restart driver: unit complex Gaussian starts, Schur-form RQI,
/// normalize, dedup-insert (plus the conjugate when it is a distinct
/// class). Restart r draws from an independent substream of `seed`, so
/// results do not depend on the worker count; inserts are merged in
/// restart order. max_restarts <= 0 selects the default 200x target.
EnumerationOutcome enumerate_complex(const SymmetricTensor& T,
                                     const SolverConfig& cfg,
                                     long long max_restarts, std::uint64_t seed,
                                     int workers = 1);

std::string table_to_csv(const EigenpairTable& table);
std::string table_to_json(const EigenpairTable& table);

}  // namespace lagrq
