#pragma once

#include <tuple>
#include <vector>

#include "lagrq/multilinear.hpp"
#include "lagrq/problem.hpp"
#include "lagrq/solvers.hpp"

namespace lagrq {

// ---- real/complex vector identification -----------------------------------
// A complex n-vector is stored as [Re z; Im z]; a C-linear map realifies to
// [[Re M, -Im M], [Im M, Re M]].

Vec realify(const CVec& z);
CVec complexify(const Vec& s);
Mat realify_op(const CMat& M);

// ---- packed symmetric matrices (E_L of the Stiefel instance) --------------

int sym_pack_size(int p);
Vec sym_pack(const Mat& S);
Mat sym_unpack(const Vec& s, int p);

// ---- matrix eigenproblem ---------------------------------------------------

enum class EigenConstraint { Sphere, Linear };
enum class EigenLeftInverse { Gram, FixedVector };

/// F = Ax, H = x. Constraint is the unit sphere or u^T x = 1; the left
/// inverse (and with it the Rayleigh functional) is the Gram form or the
/// fixed-vector form z^T / (z^T x).
Problem matrix_eigen(const Mat& A, EigenConstraint constraint,
                     EigenLeftInverse left_inverse, const Vec& u = Vec(),
                     const Vec& z = Vec());

/// Stacked left/right eigenvector problem for a complex matrix; state is
/// [u; v] realified, lambda is a complex scalar realified to R^2. Cubic for
/// nonnormal A.
Problem two_sided_eigen(const CMat& A);

// ---- tensor eigenpairs -----------------------------------------------------

/// T(I,x,...,x) = lambda x on the unit sphere (real case).
Problem tensor_eigen_real(const SymmetricTensor& T);

/// Complex state z realified to R^{2n}, real lambda, unitary constraint
/// z^* z = 1. The Lx solves run in complex arithmetic on the n x n system.
Problem tensor_eigen_complex(const SymmetricTensor& T);

// ---- nonlinear eigenvalue problem ------------------------------------------

struct PolynomialMatrix {
  std::vector<CMat> coeffs;  // A_0 ... A_d

  int dim() const { return coeffs.empty() ? 0 : static_cast<int>(coeffs[0].rows()); }
  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  CMat eval(Complex lambda) const;
  CMat deriv(Complex lambda) const;
  CMat deriv2(Complex lambda) const;
  bool is_real() const;

  static PolynomialMatrix random(int n, int degree, std::uint64_t seed,
                                 bool real_coeffs = false);
};

/// Real symmetric-free NLEP on the unit sphere: real coefficients, real
/// lambda root of x^T P(lambda) x = 0 near the warm-started guess.
Problem nlep_real_sphere(const PolynomialMatrix& P, double lambda0 = 0.0);

/// Complex NLEP with the affine normalization u^* z = 1; lambda is a
/// complex scalar solved from z^* P(lambda) z = 0.
Problem nlep_complex_linear(const PolynomialMatrix& P, const CVec& u,
                            Complex lambda0 = Complex(0, 0));

/// Two-sided NLEP on the stacked state (u; v) with unit-norm constraints;
/// lambda solves v^* P(lambda) u = 0.
Problem nlep_two_sided(const PolynomialMatrix& P, Complex lambda0 = Complex(0, 0));

// ---- Stiefel ----------------------------------------------------------------

/// F(x) = Aten x + b on the Stiefel manifold St(n, p); H = jC^T and
/// lambda lives in packed symmetric p x p matrices. Aten is a flat
/// row-major (n, p, n, p) array.
Problem stiefel_quadratic(const std::vector<double>& Aten, int n, int p,
                          const Mat& b);

/// Deterministic random instance (entries N(0,1), symmetrized so that
/// the np x np operator matrix is symmetric).
Problem stiefel_random(int n, int p, std::uint64_t seed);

// ---- graph-form constraints -------------------------------------------------

enum class GraphF { Linear, LinearPlusSin };
enum class GraphH { Constant, Quadratic };

/// Constraint in solved form: two dependent coordinates
///   x[nf]   = sum_j (y_j + sin y_j)
///   x[nf+1] = sum_j (y_j + cos y_j)
/// over the free block y = x[0:nf], with the orthographic retraction.
Problem graph_problem(int n_f, GraphF f_kind, GraphH h_kind, std::uint64_t seed);

/// Same instance with F shifted by a constant so that a constructed
/// feasible pair (x*, lambda*) is an exact solution; returns it.
std::tuple<Problem, Vec, Vec> graph_problem_with_solution(int n_f, GraphF f_kind,
                                                          GraphH h_kind,
                                                          std::uint64_t seed);

// ---- Grassmann (quotient-gauge drivers) -------------------------------------

/// Invariant-subspace iteration A x = x R(x), R = x^T A x, using the
/// Sylvester-structured resolvent A zeta - zeta R = x; the update is the
/// ratio form zeta (x^T zeta)^{-1} - x followed by a polar retraction.
/// x enters and leaves vectorized (column-major n x p).
SolveResult grassmann_invariant_solve(const Mat& A, int p, const Mat& x0,
                                      const SolverConfig& cfg);

/// Critical points of 1/2 tr(x^T L x) + alpha/4 rho(x)^T L^{-1} rho(x),
/// rho = diag(x (x^T x)^{-1} x^T). Here the resolvent has no matrix form,
/// so zeta is assembled column by column on the full gauge system.
SolveResult grassmann_rho_solve(const Mat& L, double alpha, int p, const Mat& x0,
                                const SolverConfig& cfg);

/// Gradient and its directional derivative for the rho functional
/// (exposed for derivative checks).
Mat grassmann_rho_gradient(const Mat& L, double alpha, const Mat& x);
Mat grassmann_rho_jf(const Mat& L, double alpha, const Mat& x, const Mat& eta);

}  // namespace lagrq
