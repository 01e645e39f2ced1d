#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "lagrq/problem.hpp"

namespace lagrq {

enum class FailureReason {
  MaxIter,
  SingularLx,
  SingularSchur,
  DegenerateRetraction,
  RayleighRoot,
};

const char* to_string(FailureReason r);

/// Per-iteration internals handed to an observer. zeta is -Lx^{-1} Llambda,
/// xi is Lx^{-1} L (for explicit Lagrangians: zeta = Lx^{-1} H and
/// nu = xi + zeta * lambda). theta_star is the Schur correction, so the
/// explicit lambda_* equals lambda + theta_star.
struct IterationRecord {
  int iter = 0;
  double residual = 0;
  Vec x;
  Vec lambda;
  Vec eta;
  Mat zeta;
  Vec xi;
  Vec theta_star;
};
using IterationObserver = std::function<void(const IterationRecord&)>;

struct SolverConfig {
  int max_iter = 100;
  double tol_residual = 1e-12;
  double max_step_norm = 1e8;
  double chebyshev_step_cap = 1.0;
  std::uint64_t seed = 0;
  IterationObserver observer;
};

struct SolveResult {
  Vec x_final;
  Vec lambda_final;
  bool converged = false;
  int iterations = 0;
  std::vector<double> residual_history;
  std::vector<double> step_history;
  std::optional<FailureReason> failure;
};

enum class TerminalDecision { Continue, Success, FailMaxIter, FailDiverged };

/// Stop-success when residual <= tol; stop-failure on iteration or norm
/// guards.
TerminalDecision terminal(int iter, double residual, double step_norm,
                          double solution_norm, const SolverConfig& cfg);

class InsufficientHistoryError : public std::runtime_error {
 public:
  explicit InsufficientHistoryError(const std::string& what)
      : std::runtime_error(what) {}
};

/// Least-squares slope of log r_{k+1} against log r_k over the final
/// strictly-decreasing tail above the 1e-14 floor. Needs at least four
/// qualifying residuals.
double convergence_order(const std::vector<double>& residuals);

/// One Schur-form RQI step at feasible x: solve Lx [zeta, xi], form
/// theta_* from the Schur complement jC zeta and eta = zeta theta_* - xi.
struct RqiStep {
  bool ok = false;
  FailureReason fail = FailureReason::SingularLx;
  Vec lambda;
  Vec eta;
  Mat zeta;
  Vec xi;
  Vec theta_star;
  double residual = 0;
};
RqiStep rqi_schur_step(const GeneralLagrangian& gl, const ConstraintSpec& cs,
                       const Vec& x);

/// One tangent-form step: orthonormal bases U of Null(jC) and V of the
/// orthogonal complement of Im(-Llambda), then solve the projected system
/// (V^T Pi Lx U) c = -V^T Pi L with Pi built from the supplied left
/// inverse. Since V annihilates the multiplier image, the step does not
/// depend on which left inverse defines the projection.
RqiStep rqi_tangent_step(const GeneralLagrangian& gl, const ConstraintSpec& cs,
                         const LeftInverse& linv, const Vec& x);

/// Newton-Raphson on the joint system (L, C); iterates may leave the
/// constraint set (no retraction).
SolveResult newton_raphson_constrained(const GeneralLagrangian& gl,
                                       const ConstraintSpec& cs, const Vec& x0,
                                       const Vec& lambda0,
                                       const SolverConfig& cfg);

/// Newton-Raphson plus the Schur-complement evaluation of the second-order
/// term; requires second derivatives of the Lagrangian and constraint.
/// The correction is skipped when the Newton step exceeds
/// cfg.chebyshev_step_cap.
SolveResult chebyshev_constrained(const GeneralLagrangian& gl,
                                  const ConstraintSpec& cs, const Vec& x0,
                                  const Vec& lambda0, const SolverConfig& cfg);

SolveResult rqi_schur(const GeneralLagrangian& gl, const ConstraintSpec& cs,
                      const Vec& x0, const SolverConfig& cfg);
SolveResult rqi_schur(const Problem& p, const Vec& x0, const SolverConfig& cfg);

SolveResult rqi_tangent(const GeneralLagrangian& gl, const ConstraintSpec& cs,
                        const LeftInverse& linv, const Vec& x0,
                        const SolverConfig& cfg);
SolveResult rqi_tangent(const Problem& p, const Vec& x0, const SolverConfig& cfg);

/// RQI step plus the curvature correction solved through Lx, projected
/// back to the tangent space along zeta. Requires second derivatives and
/// the Rayleigh jacobian. Correction skipped when the RQI step exceeds
/// cfg.chebyshev_step_cap.
SolveResult rayleigh_chebyshev_schur(const GeneralLagrangian& gl,
                                     const ConstraintSpec& cs, const Vec& x0,
                                     const SolverConfig& cfg);
SolveResult rayleigh_chebyshev_schur(const Problem& p, const Vec& x0,
                                     const SolverConfig& cfg);

}  // namespace lagrq
