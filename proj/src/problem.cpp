#include "lagrq/problem.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace lagrq {

LeftInverse gram_left_inverse(std::function<Mat(const Vec&)> H,
                              std::function<Mat(const Vec&)> dagger) {
  LeftInverse out;
  out.matrix = [H = std::move(H), dagger = std::move(dagger)](const Vec& x) -> Mat {
    const Mat Hx = H(x);
    const Mat D = dagger ? dagger(x) : Mat(Hx.transpose());
    const Mat G = D * Hx;
    Eigen::PartialPivLU<Mat> lu(G);
    const Mat Ginv = lu.inverse();
    const double cond = G.norm() * Ginv.norm();
    if (!Ginv.allFinite() || cond > 1e14)
      throw SingularOperatorError("gram_left_inverse: dagger*H singular", cond);
    return Ginv * D;
  };
  return out;
}

Vec projection_apply(const Mat& H_at_x, const LeftInverse& linv, const Vec& x,
                     const Vec& w) {
  return w - H_at_x * linv.apply(x, w);
}

Vec rayleigh_explicit(const ExplicitLagrangian& lag, const LeftInverse& linv,
                      const Vec& x) {
  return linv.apply(x, lag.F(x));
}

GeneralLagrangian adapt_explicit(const ExplicitLagrangian& ex,
                                 RayleighFunctional rayleigh) {
  GeneralLagrangian g;
  g.n_in = ex.n_in;
  g.n_out = ex.n_out;
  g.n_L = ex.n_L;
  g.L = [ex](const Vec& x, const Vec& lam) { return ex.L(x, lam); };
  g.Lx = [ex](const Vec& x, const Vec& lam) -> Mat {
    Mat J = ex.jF(x);
    if (ex.jH) {
      // column k of jH-term: jH(x)[e_k] lam
      Vec ek = Vec::Zero(ex.n_in);
      for (int k = 0; k < ex.n_in; ++k) {
        ek(k) = 1.0;
        J.col(k) -= ex.jH(x, ek) * lam;
        ek(k) = 0.0;
      }
    }
    return J;
  };
  g.Llambda = [ex](const Vec& x, const Vec&) -> Mat { return -ex.H(x); };
  if (ex.j2F && ex.j2H && ex.jH) {
    g.Lxx = [ex](const Vec& x, const Vec& lam, const Vec& eta) -> Vec {
      return ex.j2F(x, eta) - ex.j2H(x, eta) * lam;
    };
    g.Lxlambda = [ex](const Vec& x, const Vec&, const Vec& eta,
                      const Vec& delta) -> Vec { return -ex.jH(x, eta) * delta; };
    g.Llambdalambda = [ex](const Vec&, const Vec&, const Vec&) -> Vec {
      return Vec::Zero(ex.n_out);
    };
  }
  g.rayleigh = std::move(rayleigh);
  return g;
}

ImplicitRayleighResult rayleigh_implicit(const ImplicitRayleigh& ir, const Vec& x,
                                         const Vec& lambda_guess, double tol,
                                         int max_steps) {
  Vec lam = lambda_guess;
  Vec r = ir.N(x, lam);
  double rn = r.norm();
  for (int step = 0; step < max_steps && rn > tol; ++step) {
    const Mat Nl = ir.Nlambda(x, lam);
    Eigen::PartialPivLU<Mat> lu(Nl);
    const double umin = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    const double n1 = Nl.cwiseAbs().colwise().sum().maxCoeff();
    if (!(umin > 0) || !std::isfinite(umin) || n1 / umin > 1e14)
      throw SingularOperatorError("rayleigh_implicit: singular Nlambda",
                                  umin > 0 ? n1 / umin
                                           : std::numeric_limits<double>::infinity());
    Vec d = lu.solve(-r);
    if (!d.allFinite())
      throw SingularOperatorError("rayleigh_implicit: singular Nlambda",
                                  std::numeric_limits<double>::infinity());
    // backtracking damping
    double t = 1.0;
    for (int halvings = 0; halvings < 30; ++halvings) {
      Vec cand = lam + t * d;
      Vec rc = ir.N(x, cand);
      if (rc.norm() < rn || rc.norm() <= tol) {
        lam = cand;
        r = rc;
        rn = rc.norm();
        break;
      }
      t *= 0.5;
      if (halvings == 29) throw RayleighRootError("rayleigh_implicit: stalled", rn);
    }
  }
  if (rn > tol)
    throw RayleighRootError("rayleigh_implicit: no root within step budget", rn);
  ImplicitRayleighResult out;
  out.lambda = lam;
  Eigen::PartialPivLU<Mat> lu(ir.Nlambda(x, lam));
  out.jacobian = -lu.solve(ir.Nx(x, lam));
  return out;
}

RayleighFunctional make_implicit_rayleigh(ImplicitRayleigh ir, Vec lambda0,
                                          double tol) {
  auto guess = std::make_shared<Vec>(std::move(lambda0));
  RayleighFunctional rf;
  rf.value = [ir, guess, tol](const Vec& x) -> Vec {
    auto res = rayleigh_implicit(ir, x, *guess, tol);
    *guess = res.lambda;
    return res.lambda;
  };
  rf.jacobian = [ir, guess, tol](const Vec& x, const Vec& eta) -> Vec {
    auto res = rayleigh_implicit(ir, x, *guess, tol);
    return res.jacobian * eta;
  };
  return rf;
}

double fd_check_directional(const std::function<Vec(const Vec&)>& func,
                            const std::function<Vec(const Vec&)>& analytic,
                            const Vec& x, int trials, std::uint64_t seed,
                            double h) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Vec eta(x.size());
    for (int i = 0; i < eta.size(); ++i) eta(i) = normal(rng);
    eta.normalize();
    const Vec fd = (func(x + h * eta) - func(x - h * eta)) / (2 * h);
    const Vec an = analytic(eta);
    worst = std::max(worst, (fd - an).norm() / std::max(1.0, an.norm()));
  }
  return worst;
}

double fd_check_second(const std::function<Vec(const Vec&)>& func,
                       const std::function<Vec(const Vec&)>& analytic2,
                       const Vec& x, int trials, std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Vec eta(x.size());
    for (int i = 0; i < eta.size(); ++i) eta(i) = normal(rng);
    eta.normalize();
    const Vec fd =
        (func(x + h * eta) - 2 * func(x) + func(x - h * eta)) / (h * h);
    const Vec an = analytic2(eta);
    worst = std::max(worst, (fd - an).norm() / std::max(1.0, an.norm()));
  }
  return worst;
}

double FdReport::worst() const {
  return std::max({jF, jH, jC, j2F, j2H, j2C});
}

FdReport fd_check_problem(const Problem& p, const Vec& x, std::uint64_t seed,
                          int trials) {
  FdReport rep;
  if (p.explicit_form) {
    const ExplicitLagrangian& ex = *p.explicit_form;
    rep.jF = fd_check_directional(
        ex.F, [&](const Vec& eta) -> Vec { return ex.jF(x) * eta; }, x, trials,
        seed);
    if (ex.jH) {
      std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
      std::normal_distribution<double> normal(0.0, 1.0);
      Vec lam(ex.n_L);
      for (int i = 0; i < lam.size(); ++i) lam(i) = normal(rng);
      auto Hlam = [&](const Vec& y) -> Vec { return ex.H(y) * lam; };
      rep.jH = fd_check_directional(
          Hlam, [&](const Vec& eta) -> Vec { return ex.jH(x, eta) * lam; }, x,
          trials, seed + 1);
      if (ex.j2H)
        rep.j2H = fd_check_second(
            Hlam, [&](const Vec& eta) -> Vec { return ex.j2H(x, eta) * lam; }, x,
            trials, seed + 2);
    }
    if (ex.j2F)
      rep.j2F = fd_check_second(
          ex.F, [&](const Vec& eta) -> Vec { return ex.j2F(x, eta); }, x, trials,
          seed + 3);
  } else {
    // general form: check Lx and Llambda against FD of L
    std::mt19937_64 rng(seed ^ 0x2545f4914f6cdd1dull);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec lam(p.lag.n_L);
    for (int i = 0; i < lam.size(); ++i) lam(i) = normal(rng);
    auto Lfix = [&](const Vec& y) -> Vec { return p.lag.L(y, lam); };
    rep.jF = fd_check_directional(
        Lfix, [&](const Vec& eta) -> Vec { return p.lag.Lx(x, lam) * eta; }, x,
        trials, seed + 4);
    auto Llam = [&](const Vec& l) -> Vec { return p.lag.L(x, l); };
    rep.jH = fd_check_directional(
        Llam, [&](const Vec& dl) -> Vec { return p.lag.Llambda(x, lam) * dl; },
        lam, trials, seed + 5);
  }
  if (p.constraint.C) {
    rep.jC = fd_check_directional(
        p.constraint.C,
        [&](const Vec& eta) -> Vec { return p.constraint.jC(x) * eta; }, x,
        trials, seed + 6);
    if (p.constraint.j2C)
      rep.j2C = fd_check_second(
          p.constraint.C,
          [&](const Vec& eta) -> Vec { return p.constraint.j2C(x, eta); }, x,
          trials, seed + 7);
  }
  return rep;
}

}  // namespace lagrq
