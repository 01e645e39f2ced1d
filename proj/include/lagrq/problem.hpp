#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "lagrq/multilinear.hpp"
#include "lagrq/retraction.hpp"

namespace lagrq {

/// Thrown when a solver needs callbacks (second derivatives, Rayleigh
/// jacobian) that the instance does not provide.
class CapabilityError : public std::logic_error {
 public:
  explicit CapabilityError(const std::string& what) : std::logic_error(what) {}
};

class SingularOperatorError : public std::runtime_error {
 public:
  SingularOperatorError(const std::string& what, double cond_estimate)
      : std::runtime_error(what + " (condition estimate " +
                           std::to_string(cond_estimate) + ")"),
        cond_estimate(cond_estimate) {}
  double cond_estimate;
};

/// Left inverse of H(x): a map w in E_out -> E_L with linv(x, H(x) mu) = mu.
/// Represented by its matrix at x (n_L x n_out).
struct LeftInverse {
  std::function<Mat(const Vec& x)> matrix;
  Vec apply(const Vec& x, const Vec& w) const { return matrix(x) * w; }
};

/// (dagger H)^{-1} dagger, the Gram-type left inverse. `dagger` defaults to
/// the transpose of H. Throws SingularOperatorError when dagger*H is
/// numerically singular.
LeftInverse gram_left_inverse(std::function<Mat(const Vec&)> H,
                              std::function<Mat(const Vec&)> dagger = {});

/// lambda-estimate R(x) plus (optionally) its directional derivative,
/// needed by the Chebyshev-corrected solvers.
struct RayleighFunctional {
  std::function<Vec(const Vec& x)> value;
  std::function<Vec(const Vec& x, const Vec& eta)> jacobian;  // J_R[eta], optional
};

/// Constraint C(x) = 0 with Jacobian, optional second derivative (as the
/// contracted bilinear j2C[eta,eta]) and the retraction used to stay
/// feasible.
struct ConstraintSpec {
  int n_L = 0;
  std::function<Vec(const Vec&)> C;
  std::function<Mat(const Vec&)> jC;
  std::function<Vec(const Vec&, const Vec&)> j2C;  // optional
  Retraction retraction;
};

/// Affine-in-lambda Lagrangian L(x, lambda) = F(x) - H(x) lambda.
/// Second derivatives are optional; only the Chebyshev-type solvers need
/// them. All derivative callbacks are contracted forms:
///   jH(x, eta)          -> d/dt H(x + t eta), an n_out x n_L matrix
///   j2F(x, eta)         -> d^2/dt^2 F(x + t eta), a vector
///   j2H(x, eta)         -> d^2/dt^2 H(x + t eta), a matrix
struct ExplicitLagrangian {
  int n_in = 0, n_out = 0, n_L = 0;
  std::function<Vec(const Vec&)> F;
  std::function<Mat(const Vec&)> H;
  std::function<Mat(const Vec&)> jF;
  std::function<Mat(const Vec&, const Vec&)> jH;
  std::function<Vec(const Vec&, const Vec&)> j2F;  // optional
  std::function<Mat(const Vec&, const Vec&)> j2H;  // optional

  Vec L(const Vec& x, const Vec& lambda) const { return F(x) - H(x) * lambda; }
};

/// Solver-facing Lagrangian. Explicit instances adapt into this type with
/// Lx eta = jF eta - jH[eta] lambda and Llambda = -H.
///
/// `resolvent_form` marks instances with L(x, lambda) = P(lambda) x, for
/// which Lx^{-1} L(x, lambda) = x identically. Solvers then skip that
/// solve, which both saves a factorization application and avoids feeding
/// amplified roundoff through the near-singular Lx at convergence.
///
/// `lx_solver`, when set, supplies the factorization used for all
/// Lx-solves at (x, lambda) (the complex tensor instance backs it with an
/// n x n complex LU instead of the 2n x 2n real one).
struct GeneralLagrangian {
  int n_in = 0, n_out = 0, n_L = 0;
  std::function<Vec(const Vec& x, const Vec& lambda)> L;
  std::function<Mat(const Vec& x, const Vec& lambda)> Lx;
  std::function<Mat(const Vec& x, const Vec& lambda)> Llambda;
  // second partials, contracted: Lxx[eta,eta], Lxlambda[eta,delta], Lll[delta,delta]
  std::function<Vec(const Vec&, const Vec&, const Vec&)> Lxx;
  std::function<Vec(const Vec&, const Vec&, const Vec&, const Vec&)> Lxlambda;
  std::function<Vec(const Vec&, const Vec&, const Vec&)> Llambdalambda;
  RayleighFunctional rayleigh;
  bool resolvent_form = false;
  std::function<std::function<Mat(const Mat&)>(const Vec& x, const Vec& lambda)>
      lx_solver;

  bool has_second_order() const { return Lxx && Lxlambda && Llambdalambda; }
};

GeneralLagrangian adapt_explicit(const ExplicitLagrangian& ex,
                                 RayleighFunctional rayleigh);

/// Everything a solver needs for one problem instance.
struct Problem {
  GeneralLagrangian lag;
  ConstraintSpec constraint;
  LeftInverse linv;  // defines the projection (tangent form)
  std::optional<ExplicitLagrangian> explicit_form;
};

/// Pi_H w = w - H(x) linv(x, w); idempotent, annihilates Im(H(x)).
Vec projection_apply(const Mat& H_at_x, const LeftInverse& linv, const Vec& x,
                     const Vec& w);

/// R(x) = linv(x, F(x)); the generalized Rayleigh quotient of an explicit
/// Lagrangian.
Vec rayleigh_explicit(const ExplicitLagrangian& lag, const LeftInverse& linv,
                      const Vec& x);

/// Implicitly defined Rayleigh functional: lambda solves N(x, lambda) = 0.
struct ImplicitRayleigh {
  std::function<Vec(const Vec& x, const Vec& lambda)> N;
  std::function<Mat(const Vec& x, const Vec& lambda)> Nlambda;  // n_L x n_L
  std::function<Mat(const Vec& x, const Vec& lambda)> Nx;       // n_L x n_in
};

struct ImplicitRayleighResult {
  Vec lambda;
  Mat jacobian;  // J_R = -Nlambda^{-1} Nx at (x, lambda)
};

class RayleighRootError : public std::runtime_error {
 public:
  RayleighRootError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual(last_residual) {}
  double last_residual;
};

/// Damped Newton on lambda from lambda_guess; tolerance on ||N||.
ImplicitRayleighResult rayleigh_implicit(const ImplicitRayleigh& ir, const Vec& x,
                                         const Vec& lambda_guess,
                                         double tol = 1e-12, int max_steps = 50);

/// Builds a RayleighFunctional from an implicit system. The guess is warm
/// started from the previous evaluation (first call: lambda0). Holds
/// mutable state; build one per concurrent solve.
RayleighFunctional make_implicit_rayleigh(ImplicitRayleigh ir, Vec lambda0,
                                          double tol = 1e-12);

/// Central finite differences (step h) against an analytic Jacobian-like
/// callback; returns the max relative error over `trials` random
/// directions. `analytic` maps eta to the claimed directional derivative,
/// `func` is the underlying map.
double fd_check_directional(const std::function<Vec(const Vec&)>& func,
                            const std::function<Vec(const Vec&)>& analytic,
                            const Vec& x, int trials, std::uint64_t seed,
                            double h = 1e-6);

/// Second-order check: d^2/dt^2 func(x + t eta) vs analytic[eta,eta].
double fd_check_second(const std::function<Vec(const Vec&)>& func,
                       const std::function<Vec(const Vec&)>& analytic2,
                       const Vec& x, int trials, std::uint64_t seed,
                       double h = 1e-4);

/// Max relative FD error of all derivative callbacks an instance provides,
/// at the given point. Used by the derivative acceptance checks.
struct FdReport {
  double jF = 0, jH = 0, jC = 0, j2F = 0, j2H = 0, j2C = 0;
  double worst() const;
};
FdReport fd_check_problem(const Problem& p, const Vec& x, std::uint64_t seed,
                          int trials = 3);

}  // namespace lagrq
