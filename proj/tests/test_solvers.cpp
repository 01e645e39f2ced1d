#include <doctest.h>

#include <cmath>
#include <random>

#include "lagrq/instances.hpp"
#include "lagrq/solvers.hpp"

using namespace lagrq;

namespace {

Mat randmat(int r, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = normal(rng);
  return m;
}

Vec randvec(int n, std::uint64_t seed) { return randmat(n, 1, seed).col(0); }

Mat symrand(int n, std::uint64_t seed) {
  Mat A = randmat(n, n, seed);
  return ((A + A.transpose()) / 2).eval();
}

}  // namespace

TEST_SUITE_BEGIN("solvers");

TEST_CASE("terminal decisions") {
  SolverConfig cfg;
  CHECK(terminal(3, 1e-13, 0.1, 1.0, cfg) == TerminalDecision::Success);
  CHECK(terminal(cfg.max_iter, 1e-3, 0.1, 1.0, cfg) == TerminalDecision::FailMaxIter);
  CHECK(terminal(3, 1e-3, 1e9, 1.0, cfg) == TerminalDecision::FailDiverged);
  CHECK(terminal(3, 1e-3, 0.1, 1.0, cfg) == TerminalDecision::Continue);
}

TEST_CASE("convergence order on synthetic sequences") {
  std::vector<double> quad, cube;
  for (int k = 0; k <= 4; ++k) quad.push_back(std::pow(1e-1, std::pow(2.0, k)));
  for (int k = -1; k <= 2; ++k) cube.push_back(std::pow(1e-1, std::pow(3.0, k)));
  CHECK(convergence_order(quad) == doctest::Approx(2.0).epsilon(0.1 / 2.0));
  CHECK(convergence_order(cube) == doctest::Approx(3.0).epsilon(0.15 / 3.0));
  CHECK_THROWS_AS(convergence_order({1e-1, 1e-2}), InsufficientHistoryError);
  CHECK_THROWS_AS(convergence_order({0.5, 0.6, 0.4, 0.7}), InsufficientHistoryError);
}

TEST_CASE("newton-raphson on the eigenvector problem") {
  Mat A = Vec::LinSpaced(3, 1.0, 3.0).asDiagonal();
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  Vec x0(3);
  x0 << 0.9, 0.4, 0.1;  // near e1
  x0.normalize();
  SolverConfig cfg;
  // per-iteration check: x_i + eta is collinear with (A - lambda_i)^{-1} x_i
  double worst = 0.0;
  cfg.observer = [&](const IterationRecord& rec) {
    Mat Lx = A - rec.lambda(0) * Mat::Identity(3, 3);
    Vec w = Lx.partialPivLu().solve(rec.x);
    if (!w.allFinite()) return;
    const Vec xn = (rec.x + rec.eta).normalized();
    worst = std::max(worst, 1.0 - std::abs(w.normalized().dot(xn)));
  };
  SolveResult res = newton_raphson_constrained(p.lag, p.constraint, x0,
                                               p.lag.rayleigh.value(x0), cfg);
  CHECK(res.converged);
  CHECK(res.iterations <= 10);
  CHECK(res.residual_history.back() <= 1e-12);
  CHECK(worst <= 1e-10);
}

TEST_CASE("newton-raphson at an exact solution stops immediately") {
  Mat A = Vec::LinSpaced(4, 1.0, 4.0).asDiagonal();
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  Vec x0 = Vec::Unit(4, 2);
  Vec lam0(1);
  lam0 << 3.0;
  SolveResult res =
      newton_raphson_constrained(p.lag, p.constraint, x0, lam0, SolverConfig{});
  CHECK(res.converged);
  CHECK(res.iterations == 0);
  CHECK(res.step_history.empty());
}

TEST_CASE("newton-raphson solves an affine system in one iteration") {
  const int n = 5;
  Mat A = randmat(n, n, 51);
  Vec a = randvec(n, 52);
  Vec h = randvec(n, 53);
  Vec b = randvec(n, 54);

  ExplicitLagrangian ex;
  ex.n_in = ex.n_out = n;
  ex.n_L = 1;
  ex.F = [A, a](const Vec& x) -> Vec { return A * x + a; };
  ex.H = [h](const Vec&) -> Mat { return h; };
  ex.jF = [A](const Vec&) -> Mat { return A; };
  ex.jH = [n](const Vec&, const Vec&) -> Mat { return Mat::Zero(n, 1); };
  ConstraintSpec cs;
  cs.n_L = 1;
  cs.C = [b](const Vec& x) -> Vec {
    Vec c(1);
    c(0) = b.dot(x) - 1.0;
    return c;
  };
  cs.jC = [b](const Vec&) -> Mat { return b.transpose(); };

  GeneralLagrangian gl = adapt_explicit(ex, RayleighFunctional{});
  Vec x0 = randvec(n, 55), lam0 = randvec(1, 56);
  SolveResult res = newton_raphson_constrained(gl, cs, x0, lam0, SolverConfig{});
  CHECK(res.converged);
  CHECK(res.iterations == 1);

  // dense KKT block-solve oracle
  Mat K = Mat::Zero(n + 1, n + 1);
  K.topLeftCorner(n, n) = A;
  K.topRightCorner(n, 1) = -h;
  K.bottomLeftCorner(1, n) = b.transpose();
  Vec rhs(n + 1);
  rhs.head(n) = -a;
  rhs(n) = 1.0;
  Vec sol = K.partialPivLu().solve(rhs);
  CHECK((res.x_final - sol.head(n)).norm() < 1e-10);
  CHECK(std::abs(res.lambda_final(0) - sol(n)) < 1e-10);
}

TEST_CASE("chebyshev iteration is cubic on a symmetric eigenproblem") {
  Mat A = symrand(12, 61);
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  std::vector<double> orders;
  for (std::uint64_t s = 0; s < 12; ++s) {
    const Vec v = es.eigenvectors().col(s % 12);
    Vec x0 = (v + 0.4 * randvec(12, 62 + s)).normalized();
    SolveResult res = chebyshev_constrained(p.lag, p.constraint, x0,
                                            p.lag.rayleigh.value(x0),
                                            SolverConfig{});
    if (!res.converged) continue;
    try {
      orders.push_back(convergence_order(res.residual_history));
    } catch (const InsufficientHistoryError&) {
    }
  }
  REQUIRE(orders.size() >= 4);
  std::sort(orders.begin(), orders.end());
  CHECK(orders[orders.size() / 2] >= 2.7);
}

TEST_CASE("chebyshev converges on a nonnormal 50x50 eigenproblem") {
  Mat A = randmat(50, 50, 71);
  Eigen::EigenSolver<Mat> es(A);
  int real_idx = -1;
  for (int i = 0; i < 50; ++i)
    if (std::abs(es.eigenvalues()(i).imag()) < 1e-10) real_idx = i;
  REQUIRE(real_idx >= 0);
  Vec v = es.eigenvectors().col(real_idx).real().normalized();
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  Vec x0 = (v + 0.1 * randvec(50, 72)).normalized();
  SolveResult res = chebyshev_constrained(p.lag, p.constraint, x0,
                                          p.lag.rayleigh.value(x0), SolverConfig{});
  CHECK(res.converged);
}

TEST_CASE("chebyshev at an exact solution takes no step, so no correction") {
  Mat A = Vec::LinSpaced(5, 1.0, 5.0).asDiagonal();
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  Vec lam0(1);
  lam0 << 4.0;
  SolveResult res = chebyshev_constrained(p.lag, p.constraint, Vec::Unit(5, 3),
                                          lam0, SolverConfig{});
  CHECK(res.converged);
  CHECK(res.iterations == 0);
}

TEST_CASE("chebyshev requires second derivatives") {
  Mat A = symrand(4, 73);
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  GeneralLagrangian crippled = p.lag;
  crippled.Lxx = nullptr;
  Vec x0 = randvec(4, 74).normalized();
  CHECK_THROWS_AS(chebyshev_constrained(crippled, p.constraint, x0,
                                        crippled.rayleigh.value(x0),
                                        SolverConfig{}),
                  CapabilityError);
}

TEST_CASE("schur rqi reproduces classical rqi on the sphere") {
  Mat A = symrand(20, 81);
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  SolverConfig cfg;
  double worst = 0.0;
  int checked = 0;
  cfg.observer = [&](const IterationRecord& rec) {
    Mat Lx = A - rec.lambda(0) * Mat::Identity(20, 20);
    Vec w = Lx.partialPivLu().solve(rec.x);
    if (!w.allFinite()) return;
    const Vec xn = (rec.x + rec.eta).normalized();
    worst = std::max(worst, 1.0 - std::abs(w.normalized().dot(xn)));
    ++checked;
  };
  SolveResult res = rqi_schur(p, randvec(20, 82).normalized(), cfg);
  CHECK(res.converged);
  CHECK(checked >= 2);
  CHECK(worst <= 1e-10);
}

TEST_CASE("schur rqi is cubic for symmetric matrices") {
  std::vector<double> orders;
  for (std::uint64_t s = 0; s < 16; ++s) {
    Mat A = symrand(20, 830 + s);
    Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
    SolveResult res = rqi_schur(p, randvec(20, 9000 + s).normalized(), SolverConfig{});
    if (!res.converged) continue;
    try {
      orders.push_back(convergence_order(res.residual_history));
    } catch (const InsufficientHistoryError&) {
    }
  }
  REQUIRE(orders.size() >= 5);
  std::sort(orders.begin(), orders.end());
  CHECK(orders[orders.size() / 2] >= 2.7);
}

TEST_CASE("rqi quadratic floor holds for nonsymmetric matrices") {
  std::vector<double> orders;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Mat A = randmat(20, 20, 850 + s);
    Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
    SolveResult res = rqi_schur(p, randvec(20, 950 + s).normalized(), SolverConfig{});
    if (!res.converged) continue;
    try {
      orders.push_back(convergence_order(res.residual_history));
    } catch (const InsufficientHistoryError&) {
    }
  }
  REQUIRE(orders.size() >= 5);
  std::sort(orders.begin(), orders.end());
  CHECK(orders[orders.size() / 2] >= 1.9);
}

TEST_CASE("rqi at an exact solution takes a null step") {
  Mat A = Vec::LinSpaced(5, 1.0, 5.0).asDiagonal();
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  SolveResult res = rqi_schur(p, Vec::Unit(5, 3), SolverConfig{});
  CHECK(res.converged);
  CHECK(res.iterations == 0);
  CHECK(res.residual_history.back() <= 1e-13);
}

TEST_CASE("null-step fixed point: tiny residual implies tiny first step") {
  Mat A = symrand(8, 86);
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  Vec v = es.eigenvectors().col(2);
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  RqiStep step = rqi_schur_step(p.lag, p.constraint, v);
  REQUIRE(step.residual <= 1e-13);
  if (step.ok) CHECK(step.eta.norm() <= 1e-11);
}

TEST_CASE("tangent and schur steps agree while both are well posed") {
  for (std::uint64_t s : {0, 1, 2}) {
    Mat A = symrand(12, 870 + s);
    Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
    Vec x = randvec(12, 880 + s).normalized();
    for (int it = 0; it < 12; ++it) {
      RqiStep sch = rqi_schur_step(p.lag, p.constraint, x);
      if (!sch.ok || sch.residual <= 1e-9) break;
      RqiStep tan = rqi_tangent_step(p.lag, p.constraint, p.linv, x);
      REQUIRE(tan.ok);
      const double scale = std::max(sch.eta.norm(), tan.eta.norm());
      CHECK((sch.eta - tan.eta).norm() <= 1e-8 * scale + 1e-13);
      // tangency by construction
      CHECK((p.constraint.jC(x) * tan.eta).norm() <= 1e-12 * tan.eta.norm());
      x = p.constraint.retraction.apply(x, sch.eta);
    }
  }
}

TEST_CASE("tangent step solves the projected system U^T (A - lambda) U") {
  Mat A = symrand(9, 91);
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  Vec x = randvec(9, 92).normalized();
  RqiStep tan = rqi_tangent_step(p.lag, p.constraint, p.linv, x);
  REQUIRE(tan.ok);

  Eigen::ColPivHouseholderQR<Mat> qr{Mat(x)};
  Mat U = Mat(qr.householderQ()).rightCols(8);
  const double lam = tan.lambda(0);
  Mat Hp = U.transpose() * (A - lam * Mat::Identity(9, 9)) * U;
  Vec rhs = -(U.transpose() * (A * x - lam * x));
  Vec eta_oracle = U * Hp.partialPivLu().solve(rhs);
  CHECK((eta_oracle - tan.eta).norm() <= 1e-9 * eta_oracle.norm());
}

TEST_CASE("rayleigh-chebyshev lifts the tensor iteration from quadratic to cubic") {
  std::vector<double> rqi_orders, rc_orders;
  for (std::uint64_t s = 0; s < 14; ++s) {
    auto T = SymmetricTensor::random(3, 6, 400 + s);
    Problem p = tensor_eigen_real(T);
    Vec x0 = randvec(6, 500 + s).normalized();
    SolveResult plain = rqi_schur(p, x0, SolverConfig{});
    SolveResult rc = rayleigh_chebyshev_schur(p, x0, SolverConfig{});
    if (plain.converged) {
      try {
        rqi_orders.push_back(convergence_order(plain.residual_history));
      } catch (const InsufficientHistoryError&) {
      }
    }
    if (rc.converged) {
      try {
        rc_orders.push_back(convergence_order(rc.residual_history));
      } catch (const InsufficientHistoryError&) {
      }
    }
  }
  REQUIRE(rqi_orders.size() >= 4);
  REQUIRE(rc_orders.size() >= 4);
  std::sort(rqi_orders.begin(), rqi_orders.end());
  std::sort(rc_orders.begin(), rc_orders.end());
  CHECK(rqi_orders[rqi_orders.size() / 2] < 2.7);  // plain RQI is quadratic here
  CHECK(rc_orders[rc_orders.size() / 2] >= 2.7);
}

TEST_CASE("rayleigh-chebyshev at an exact solution takes a null step") {
  Mat A = symrand(6, 95);
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  SolveResult res = rayleigh_chebyshev_schur(p, es.eigenvectors().col(1),
                                             SolverConfig{});
  CHECK(res.converged);
  CHECK(res.iterations == 0);
}

TEST_CASE("rayleigh-chebyshev demands the rayleigh jacobian") {
  Mat A = symrand(4, 96);
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  GeneralLagrangian crippled = p.lag;
  crippled.rayleigh.jacobian = nullptr;
  CHECK_THROWS_AS(rayleigh_chebyshev_schur(crippled, p.constraint,
                                           Vec::Unit(4, 0), SolverConfig{}),
                  CapabilityError);
}

TEST_CASE("the lambda_i step leaves the tangent space, the lambda_* step does not") {
  auto T = SymmetricTensor::random(3, 5, 97);
  Problem p = tensor_eigen_real(T);
  SolverConfig cfg;
  int checked = 0;
  cfg.observer = [&](const IterationRecord& rec) {
    if (rec.iter >= 3) return;
    const Mat jC = p.constraint.jC(rec.x);
    // Schur-form step with lambda_*: on the tangent space
    CHECK((jC * rec.eta).norm() <= 1e-10 * rec.eta.norm());
    // step -nu + zeta lambda_i = -xi: off the tangent space
    const Vec off = -rec.xi;
    CHECK((jC * off).norm() > 1e-6 * off.norm());
    ++checked;
  };
  SolveResult res = rqi_schur(p, randvec(5, 98).normalized(), cfg);
  CHECK(res.converged);
  CHECK(checked >= 3);
}

TEST_CASE("reported lambda is the rayleigh value of the final point") {
  Mat A = symrand(10, 101);
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  SolveResult res = rqi_schur(p, randvec(10, 102).normalized(), SolverConfig{});
  REQUIRE(res.converged);
  CHECK((p.lag.rayleigh.value(res.x_final) - res.lambda_final).norm() <= 1e-8);
  CHECK(p.lag.L(res.x_final, res.lambda_final).norm() <= 1e-12);
}

TEST_CASE("a zero chebyshev cap disables the correction") {
  auto T = SymmetricTensor::random(3, 5, 103);
  Problem p = tensor_eigen_real(T);
  Vec x0 = randvec(5, 104).normalized();
  SolverConfig plain_cfg;
  SolverConfig capped_cfg;
  capped_cfg.chebyshev_step_cap = 0.0;  // always skipped
  SolveResult plain = rqi_schur(p, x0, plain_cfg);
  SolveResult capped = rayleigh_chebyshev_schur(p, x0, capped_cfg);
  REQUIRE(plain.converged);
  REQUIRE(capped.converged);
  CHECK(plain.iterations == capped.iterations);
  CHECK((plain.x_final - capped.x_final).norm() <= 1e-12);
}

TEST_CASE("nonpositive tolerances are rejected") {
  Mat A = symrand(4, 105);
  Problem p = matrix_eigen(A, EigenConstraint::Sphere, EigenLeftInverse::Gram);
  SolverConfig bad;
  bad.tol_residual = 0.0;
  CHECK_THROWS_AS(rqi_schur(p, Vec::Unit(4, 0), bad), std::invalid_argument);
}

TEST_CASE("rqi keeps iterates feasible") {
  auto T = SymmetricTensor::random(3, 4, 99);
  Problem p = tensor_eigen_real(T);
  SolverConfig cfg;
  cfg.observer = [&](const IterationRecord& rec) {
    CHECK(p.constraint.C(rec.x).norm() <= 1e-10);
  };
  rqi_schur(p, randvec(4, 100).normalized(), cfg);
}

TEST_SUITE_END();
