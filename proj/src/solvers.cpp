#include "lagrq/solvers.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace lagrq {

namespace {

constexpr double kCondThreshold = 1e14;
constexpr double kOrderFloor = 1e-14;

/// Factorization of Lx at a point, either the instance-provided solver or
/// a dense partial-pivot LU with a cheap condition estimate from the U
/// diagonal.
class LxSolver {
 public:
  LxSolver(const GeneralLagrangian& gl, const Vec& x, const Vec& lam) {
    if (gl.lx_solver) {
      custom_ = gl.lx_solver(x, lam);
      return;
    }
    Mat A = gl.Lx(x, lam);
    norm1_ = A.cwiseAbs().colwise().sum().maxCoeff();
    lu_.compute(A);
    const double umin = lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(umin > 0) || !std::isfinite(umin)) {
      // exactly singular pivot (lambda landed on an eigenvalue to the last
      // ulp): nudge the operator a few ulps and refactor; the amplified
      // direction is what the iteration needs
      A += (1e-14 * std::max(norm1_, 1.0)) * Mat::Identity(A.rows(), A.cols());
      lu_.compute(A);
    }
    const double u2 = lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
    cond_ = (u2 > 0 && std::isfinite(u2)) ? norm1_ / u2
                                          : std::numeric_limits<double>::infinity();
  }

  Mat solve(const Mat& B) const { return custom_ ? custom_(B) : lu_.solve(B); }

  Vec solve(const Vec& b) const {
    if (custom_) return Vec(custom_(Mat(b)));
    return lu_.solve(b);
  }

  // Infinity when the factorization broke down; custom solvers report 1.
  double cond_estimate() const { return custom_ ? 1.0 : cond_; }

 private:
  std::function<Mat(const Mat&)> custom_;
  Eigen::PartialPivLU<Mat> lu_;
  double norm1_ = 0;
  double cond_ = 1.0;
};

struct SchurBlock {
  bool ok = false;
  Eigen::PartialPivLU<Mat> lu;
};

SchurBlock factor_schur(const Mat& S) {
  SchurBlock out;
  out.lu.compute(S);
  const Vec udiag = out.lu.matrixLU().diagonal();
  const double umin = udiag.cwiseAbs().minCoeff();
  const double n1 = S.cwiseAbs().colwise().sum().maxCoeff();
  out.ok = std::isfinite(umin) && umin > 0 && n1 / umin < kCondThreshold &&
           S.allFinite();
  return out;
}

Mat null_space_basis(const Mat& A) {
  // Columns of Q past rank(A^T) span Null(A); column pivoting keeps the
  // construction deterministic.
  Eigen::ColPivHouseholderQR<Mat> qr(A.transpose());
  const Eigen::Index rank = qr.rank();
  Mat Q = qr.householderQ();
  return Q.rightCols(Q.cols() - rank);
}

void notify(const SolverConfig& cfg, int iter, double residual, const Vec& x,
            const Vec& lambda, const RqiStep& step) {
  if (!cfg.observer) return;
  IterationRecord rec;
  rec.iter = iter;
  rec.residual = residual;
  rec.x = x;
  rec.lambda = lambda;
  rec.eta = step.eta;
  rec.zeta = step.zeta;
  rec.xi = step.xi;
  rec.theta_star = step.theta_star;
  cfg.observer(rec);
}

void validate(const SolverConfig& cfg) {
  if (cfg.tol_residual <= 0 || cfg.max_step_norm <= 0 ||
      cfg.chebyshev_step_cap < 0 || cfg.max_iter < 0)
    throw std::invalid_argument("SolverConfig: tolerances must be positive");
}

SolveResult finish(SolveResult res, const GeneralLagrangian& gl) {
  if (res.converged && gl.rayleigh.value) res.lambda_final = gl.rayleigh.value(res.x_final);
  return res;
}

}  // namespace

const char* to_string(FailureReason r) {
  switch (r) {
    case FailureReason::MaxIter: return "MaxIter";
    case FailureReason::SingularLx: return "SingularLx";
    case FailureReason::SingularSchur: return "SingularSchur";
    case FailureReason::DegenerateRetraction: return "DegenerateRetraction";
    case FailureReason::RayleighRoot: return "RayleighRoot";
  }
  return "?";
}

TerminalDecision terminal(int iter, double residual, double step_norm,
                          double solution_norm, const SolverConfig& cfg) {
  if (std::isfinite(residual) && residual <= cfg.tol_residual)
    return TerminalDecision::Success;
  if (!std::isfinite(residual) || !std::isfinite(step_norm) ||
      step_norm > cfg.max_step_norm || solution_norm > cfg.max_step_norm)
    return TerminalDecision::FailDiverged;
  if (iter >= cfg.max_iter) return TerminalDecision::FailMaxIter;
  return TerminalDecision::Continue;
}

double convergence_order(const std::vector<double>& residuals) {
  int end = static_cast<int>(residuals.size());
  while (end > 0 && !(residuals[end - 1] > kOrderFloor)) --end;
  // the strictly decreasing above-floor tail must hold >= 4 residuals
  int tail = end;
  while (tail > 0 && residuals[tail - 1] > kOrderFloor &&
         (tail == end || residuals[tail - 1] > residuals[tail]))
    --tail;
  if (end - tail < 4)
    throw InsufficientHistoryError(
        "convergence_order: need >= 4 strictly decreasing residuals above "
        "1e-14, got " +
        std::to_string(end - tail));
  // fit on the final qualifying window: the last three residuals inside the
  // contraction regime (r < 1); longer windows drag in pre-asymptotic pairs
  int start = end;
  while (start > tail && residuals[start - 1] < 1.0 && end - start < 3) --start;
  if (end - start < 3)
    throw InsufficientHistoryError(
        "convergence_order: fewer than 3 contracting residuals below 1");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int pairs = end - start - 1;
  for (int i = start; i + 1 < end; ++i) {
    const double xi = std::log(residuals[i]);
    const double yi = std::log(residuals[i + 1]);
    sx += xi;
    sy += yi;
    sxx += xi * xi;
    sxy += xi * yi;
  }
  const double denom = pairs * sxx - sx * sx;
  if (std::abs(denom) < 1e-30)
    throw InsufficientHistoryError("convergence_order: degenerate fit");
  return (pairs * sxy - sx * sy) / denom;
}

RqiStep rqi_schur_step(const GeneralLagrangian& gl, const ConstraintSpec& cs,
                       const Vec& x) {
  RqiStep step;
  step.lambda = gl.rayleigh.value(x);
  const Vec L = gl.L(x, step.lambda);
  step.residual = L.norm();

  LxSolver lx(gl, x, step.lambda);
  step.zeta = -lx.solve(gl.Llambda(x, step.lambda));
  step.xi = gl.resolvent_form ? x : Vec(lx.solve(L));
  if (!step.zeta.allFinite() || !step.xi.allFinite()) {
    step.fail = FailureReason::SingularLx;
    return step;
  }
  const Mat jC = cs.jC(x);
  SchurBlock schur = factor_schur(jC * step.zeta);
  if (!schur.ok) {
    step.fail = FailureReason::SingularSchur;
    return step;
  }
  step.theta_star = schur.lu.solve(jC * step.xi);
  // zeta*theta - xi: the amplified components of zeta cancel against the
  // Schur ratio, so the formation stays accurate near convergence.
  step.eta = step.zeta * step.theta_star - step.xi;
  step.ok = step.eta.allFinite();
  if (!step.ok) step.fail = FailureReason::SingularLx;
  return step;
}

RqiStep rqi_tangent_step(const GeneralLagrangian& gl, const ConstraintSpec& cs,
                         const LeftInverse& linv, const Vec& x) {
  RqiStep step;
  step.lambda = gl.rayleigh.value(x);
  const Vec L = gl.L(x, step.lambda);
  step.residual = L.norm();

  // U spans the tangent space; V spans Im(H)^perp, the space the projected
  // equation lives in. V^T annihilates H, so the projected system below is
  // the same for every left inverse of Llambda.
  const Mat U = null_space_basis(cs.jC(x));
  const Mat H = -gl.Llambda(x, step.lambda);
  const Mat V = null_space_basis(Mat(H.transpose()));
  const Mat D = linv.matrix(x);
  const Mat Lx = gl.Lx(x, step.lambda);
  const Mat PLx = Lx - H * (D * Lx);
  const Vec PL = L - H * (D * L);
  const Mat Hp = V.transpose() * PLx * U;
  SchurBlock proj = factor_schur(Hp);
  if (!proj.ok) {
    step.fail = FailureReason::SingularSchur;
    return step;
  }
  const Vec c = proj.lu.solve(-(V.transpose() * PL));
  step.eta = U * c;
  step.ok = step.eta.allFinite();
  if (!step.ok) step.fail = FailureReason::SingularSchur;
  return step;
}

namespace {

/// Shared driver for the feasible (retraction-based) iterations.
/// `make_step` returns the update direction at a feasible point.
SolveResult feasible_iteration(
    const GeneralLagrangian& gl, const ConstraintSpec& cs, const Vec& x0,
    const SolverConfig& cfg,
    const std::function<RqiStep(const Vec&)>& make_step) {
  validate(cfg);
  SolveResult res;
  Vec x = x0;
  for (int iter = 0;; ++iter) {
    RqiStep step;
    try {
      step = make_step(x);
    } catch (const RayleighRootError&) {
      res.failure = FailureReason::RayleighRoot;
      break;
    } catch (const SingularOperatorError&) {
      res.failure = FailureReason::SingularLx;
      break;
    }
    res.residual_history.push_back(step.residual);
    res.iterations = iter;
    res.lambda_final = step.lambda;
    const TerminalDecision dec =
        terminal(iter, step.residual,
                 step.ok ? step.eta.norm() : 0.0, x.norm(), cfg);
    if (dec == TerminalDecision::Success) {
      res.converged = true;
      break;
    }
    if (dec == TerminalDecision::FailMaxIter) {
      res.failure = FailureReason::MaxIter;
      break;
    }
    if (!step.ok) {
      // Singular solve with the residual still above tolerance.
      res.failure = step.fail;
      break;
    }
    if (dec == TerminalDecision::FailDiverged) {
      res.failure = FailureReason::MaxIter;
      break;
    }
    notify(cfg, iter, step.residual, x, step.lambda, step);
    if (step.eta.norm() > cfg.max_step_norm) {
      res.failure = FailureReason::MaxIter;
      break;
    }
    try {
      x = cs.retraction.apply(x, step.eta);
    } catch (const DegenerateRetractionError&) {
      res.failure = FailureReason::DegenerateRetraction;
      break;
    }
    res.step_history.push_back(step.eta.norm());
  }
  res.x_final = x;
  return finish(std::move(res), gl);
}

}  // namespace

SolveResult rqi_schur(const GeneralLagrangian& gl, const ConstraintSpec& cs,
                      const Vec& x0, const SolverConfig& cfg) {
  return feasible_iteration(gl, cs, x0, cfg, [&](const Vec& x) {
    return rqi_schur_step(gl, cs, x);
  });
}

SolveResult rqi_schur(const Problem& p, const Vec& x0, const SolverConfig& cfg) {
  return rqi_schur(p.lag, p.constraint, x0, cfg);
}

SolveResult rqi_tangent(const GeneralLagrangian& gl, const ConstraintSpec& cs,
                        const LeftInverse& linv, const Vec& x0,
                        const SolverConfig& cfg) {
  return feasible_iteration(gl, cs, x0, cfg, [&](const Vec& x) {
    return rqi_tangent_step(gl, cs, linv, x);
  });
}

SolveResult rqi_tangent(const Problem& p, const Vec& x0, const SolverConfig& cfg) {
  return rqi_tangent(p.lag, p.constraint, p.linv, x0, cfg);
}

SolveResult rayleigh_chebyshev_schur(const GeneralLagrangian& gl,
                                     const ConstraintSpec& cs, const Vec& x0,
                                     const SolverConfig& cfg) {
  if (!gl.has_second_order())
    throw CapabilityError("rayleigh_chebyshev_schur: second derivatives missing");
  if (!gl.rayleigh.jacobian)
    throw CapabilityError("rayleigh_chebyshev_schur: Rayleigh jacobian missing");
  return feasible_iteration(gl, cs, x0, cfg, [&](const Vec& x) {
    RqiStep step = rqi_schur_step(gl, cs, x);
    if (!step.ok || step.eta.norm() > cfg.chebyshev_step_cap) return step;
    const Vec& eta = step.eta;
    const Vec jr = gl.rayleigh.jacobian(x, eta);
    const Vec g = -0.5 * gl.Lxx(x, step.lambda, eta) -
                  gl.Lxlambda(x, step.lambda, eta, jr) -
                  0.5 * gl.Llambdalambda(x, step.lambda, jr);
    LxSolver lx(gl, x, step.lambda);
    const Vec T = lx.solve(g);
    if (!T.allFinite()) return step;  // keep the plain RQI step
    const Vec tau_star = eta + T;
    const Mat jC = cs.jC(x);
    SchurBlock schur = factor_schur(jC * step.zeta);
    if (!schur.ok) return step;
    const Vec corr = schur.lu.solve(jC * tau_star);
    Vec tau = tau_star - step.zeta * corr;
    if (tau.allFinite()) step.eta = tau;
    return step;
  });
}

SolveResult rayleigh_chebyshev_schur(const Problem& p, const Vec& x0,
                                     const SolverConfig& cfg) {
  return rayleigh_chebyshev_schur(p.lag, p.constraint, x0, cfg);
}

namespace {

/// Shared driver for Newton-Raphson and its Chebyshev-corrected variant on
/// the joint system (L, C); iterates are not retracted.
SolveResult joint_iteration(const GeneralLagrangian& gl, const ConstraintSpec& cs,
                            const Vec& x0, const Vec& lambda0,
                            const SolverConfig& cfg, bool second_order) {
  if (second_order) {
    if (!gl.has_second_order())
      throw CapabilityError("chebyshev_constrained: second derivatives missing");
    if (!cs.j2C)
      throw CapabilityError("chebyshev_constrained: constraint second derivative missing");
  }
  validate(cfg);
  SolveResult res;
  Vec x = x0, lam = lambda0;
  for (int iter = 0;; ++iter) {
    const Vec L = gl.L(x, lam);
    const Vec C = cs.C(x);
    const double rL = L.norm();
    res.residual_history.push_back(rL);
    res.iterations = iter;
    const double joint_res = std::max(rL, C.norm());
    const TerminalDecision dec = terminal(iter, joint_res, 0.0, x.norm(), cfg);
    if (dec == TerminalDecision::Success) {
      res.converged = true;
      break;
    }
    if (dec == TerminalDecision::FailMaxIter) {
      res.failure = FailureReason::MaxIter;
      break;
    }
    if (dec == TerminalDecision::FailDiverged) {
      res.failure = FailureReason::MaxIter;
      break;
    }

    LxSolver lx(gl, x, lam);
    if (lx.cond_estimate() > kCondThreshold) {
      res.failure = FailureReason::SingularLx;
      break;
    }
    const Mat zeta = -lx.solve(gl.Llambda(x, lam));
    const Vec xi = lx.solve(L);
    if (!zeta.allFinite() || !xi.allFinite()) {
      res.failure = FailureReason::SingularLx;
      break;
    }
    const Mat jC = cs.jC(x);
    SchurBlock schur = factor_schur(jC * zeta);
    if (!schur.ok) {
      res.failure = FailureReason::SingularSchur;
      break;
    }
    const Vec delta = schur.lu.solve(-C + jC * xi);
    Vec eta = zeta * delta - xi;

    Vec delta_total = delta, eta_total = eta;
    if (second_order && eta.norm() <= cfg.chebyshev_step_cap) {
      // second-order term routed through the same Schur complement
      const Vec l2 = gl.Lxx(x, lam, eta) + 2.0 * gl.Lxlambda(x, lam, eta, delta) +
                     gl.Llambdalambda(x, lam, delta);
      const Vec c2 = cs.j2C(x, eta);
      const Vec w = lx.solve(l2);
      if (w.allFinite()) {
        const Vec delta2 = schur.lu.solve(c2 - jC * w);
        const Vec eta2 = w + zeta * delta2;
        if (delta2.allFinite() && eta2.allFinite()) {
          delta_total = delta - 0.5 * delta2;
          eta_total = eta - 0.5 * eta2;
        }
      }
    }

    if (cfg.observer) {
      IterationRecord rec;
      rec.iter = iter;
      rec.residual = rL;
      rec.x = x;
      rec.lambda = lam;
      rec.eta = eta_total;
      rec.zeta = zeta;
      rec.xi = xi;
      rec.theta_star = delta_total;
      cfg.observer(rec);
    }

    if (!eta_total.allFinite() || eta_total.norm() > cfg.max_step_norm) {
      res.failure = FailureReason::MaxIter;
      break;
    }
    x += eta_total;
    lam += delta_total;
    res.step_history.push_back(eta_total.norm());
  }
  res.x_final = x;
  res.lambda_final = lam;
  return res;
}

}  // namespace

SolveResult newton_raphson_constrained(const GeneralLagrangian& gl,
                                       const ConstraintSpec& cs, const Vec& x0,
                                       const Vec& lambda0,
                                       const SolverConfig& cfg) {
  return joint_iteration(gl, cs, x0, lambda0, cfg, false);
}

SolveResult chebyshev_constrained(const GeneralLagrangian& gl,
                                  const ConstraintSpec& cs, const Vec& x0,
                                  const Vec& lambda0, const SolverConfig& cfg) {
  return joint_iteration(gl, cs, x0, lambda0, cfg, true);
}

}  // namespace lagrq
