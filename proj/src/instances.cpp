#include "lagrq/instances.hpp"

#include <cmath>
#include <random>

#include <Eigen/Dense>

namespace lagrq {

namespace {

Vec random_normal_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Mat random_normal_mat(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = normal(rng);
  return m;
}

}  // namespace

Vec realify(const CVec& z) {
  Vec s(2 * z.size());
  s.head(z.size()) = z.real();
  s.tail(z.size()) = z.imag();
  return s;
}

CVec complexify(const Vec& s) {
  const int n = static_cast<int>(s.size()) / 2;
  CVec z(n);
  z.real() = s.head(n);
  z.imag() = s.tail(n);
  return z;
}

Mat realify_op(const CMat& M) {
  Mat R(2 * M.rows(), 2 * M.cols());
  R.topLeftCorner(M.rows(), M.cols()) = M.real();
  R.topRightCorner(M.rows(), M.cols()) = -M.imag();
  R.bottomLeftCorner(M.rows(), M.cols()) = M.imag();
  R.bottomRightCorner(M.rows(), M.cols()) = M.real();
  return R;
}

int sym_pack_size(int p) { return p * (p + 1) / 2; }

Vec sym_pack(const Mat& S) {
  const int p = static_cast<int>(S.rows());
  Vec out(sym_pack_size(p));
  int k = 0;
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) out(k++) = S(i, j);
  return out;
}

Mat sym_unpack(const Vec& s, int p) {
  Mat S(p, p);
  int k = 0;
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) {
      S(i, j) = s(k);
      S(j, i) = s(k);
      ++k;
    }
  return S;
}

// ---------------------------------------------------------------------------
// matrix eigenproblem
// ---------------------------------------------------------------------------

Problem matrix_eigen(const Mat& A, EigenConstraint constraint,
                     EigenLeftInverse left_inverse, const Vec& u, const Vec& z) {
  const int n = static_cast<int>(A.rows());
  if (constraint == EigenConstraint::Linear && u.size() != n)
    throw DimensionError("matrix_eigen: constraint vector u", n, u.size());
  if (left_inverse == EigenLeftInverse::FixedVector && z.size() != n)
    throw DimensionError("matrix_eigen: left-inverse vector z", n, z.size());

  ExplicitLagrangian ex;
  ex.n_in = ex.n_out = n;
  ex.n_L = 1;
  ex.F = [A](const Vec& x) -> Vec { return A * x; };
  ex.H = [](const Vec& x) -> Mat { return x; };
  ex.jF = [A](const Vec&) -> Mat { return A; };
  ex.jH = [](const Vec&, const Vec& eta) -> Mat { return eta; };
  ex.j2F = [n](const Vec&, const Vec&) -> Vec { return Vec::Zero(n); };
  ex.j2H = [n](const Vec&, const Vec&) -> Mat { return Mat::Zero(n, 1); };

  Problem p;
  p.explicit_form = ex;

  if (left_inverse == EigenLeftInverse::Gram) {
    p.linv.matrix = [](const Vec& x) -> Mat {
      return x.transpose() / x.squaredNorm();
    };
    p.lag.rayleigh.value = [A](const Vec& x) -> Vec {
      Vec lam(1);
      lam(0) = x.dot(A * x) / x.squaredNorm();
      return lam;
    };
    p.lag.rayleigh.jacobian = [A](const Vec& x, const Vec& eta) -> Vec {
      const double xx = x.squaredNorm();
      Vec out(1);
      out(0) = (eta.dot(A * x) + x.dot(A * eta)) / xx -
               2.0 * x.dot(eta) * x.dot(A * x) / (xx * xx);
      return out;
    };
  } else {
    p.linv.matrix = [z](const Vec& x) -> Mat {
      const double d = z.dot(x);
      if (std::abs(d) < 1e-14)
        throw SingularOperatorError("matrix_eigen: z^T x vanished", 1.0 / std::abs(d));
      return z.transpose() / d;
    };
    p.lag.rayleigh.value = [A, z](const Vec& x) -> Vec {
      Vec lam(1);
      lam(0) = z.dot(A * x) / z.dot(x);
      return lam;
    };
    p.lag.rayleigh.jacobian = [A, z](const Vec& x, const Vec& eta) -> Vec {
      const double d = z.dot(x);
      Vec out(1);
      out(0) = z.dot(A * eta) / d - z.dot(eta) * z.dot(A * x) / (d * d);
      return out;
    };
  }

  RayleighFunctional rf = p.lag.rayleigh;
  p.lag = adapt_explicit(ex, rf);
  p.lag.Lx = [A, n](const Vec&, const Vec& lam) -> Mat {
    return A - lam(0) * Mat::Identity(n, n);
  };
  p.lag.resolvent_form = true;

  if (constraint == EigenConstraint::Sphere) {
    p.constraint.n_L = 1;
    p.constraint.C = [](const Vec& x) -> Vec {
      Vec c(1);
      c(0) = 0.5 * (x.squaredNorm() - 1.0);
      return c;
    };
    p.constraint.jC = [](const Vec& x) -> Mat { return x.transpose(); };
    p.constraint.j2C = [](const Vec&, const Vec& eta) -> Vec {
      Vec c(1);
      c(0) = eta.squaredNorm();
      return c;
    };
    p.constraint.retraction = sphere_retraction();
  } else {
    p.constraint.n_L = 1;
    p.constraint.C = [u](const Vec& x) -> Vec {
      Vec c(1);
      c(0) = u.dot(x) - 1.0;
      return c;
    };
    p.constraint.jC = [u](const Vec&) -> Mat { return u.transpose(); };
    p.constraint.j2C = [](const Vec&, const Vec&) -> Vec { return Vec::Zero(1); };
    Retraction r;
    r.order = 2;
    r.apply = [u](const Vec& x, const Vec& eta) -> Vec {
      Vec w = x + eta;
      const double d = u.dot(w);
      if (std::abs(d) < 1e-14)
        throw DegenerateRetractionError("linear-constraint retraction: u^T(x+eta) = 0");
      return w / d;
    };
    p.constraint.retraction = r;
  }
  return p;
}

// ---------------------------------------------------------------------------
// two-sided eigenproblem
// ---------------------------------------------------------------------------

namespace {

Complex cfrom2(const Vec& lam) { return Complex(lam(0), lam(1)); }

Vec c2vec(Complex c) {
  Vec v(2);
  v << c.real(), c.imag();
  return v;
}

}  // namespace

Problem two_sided_eigen(const CMat& A) {
  const int n = static_cast<int>(A.rows());
  const int N = 4 * n;  // [Re u; Im u; Re v; Im v]
  const CMat Astar = A.adjoint();

  auto split = [n](const Vec& s) {
    return std::pair<CVec, CVec>(complexify(s.head(2 * n)),
                                 complexify(s.tail(2 * n)));
  };
  auto join = [](const CVec& a, const CVec& b) -> Vec {
    Vec s(2 * a.size() + 2 * b.size());
    s.head(2 * a.size()) = realify(a);
    s.tail(2 * b.size()) = realify(b);
    return s;
  };

  ExplicitLagrangian ex;
  ex.n_in = ex.n_out = N;
  ex.n_L = 2;
  ex.F = [=](const Vec& s) -> Vec {
    auto [u, v] = split(s);
    return join(Astar * v, A * u);
  };
  ex.H = [=](const Vec& s) -> Mat {
    auto [u, v] = split(s);
    Mat H(N, 2);
    H.col(0) = join(v, u);
    H.col(1) = join(Complex(0, -1) * v, Complex(0, 1) * u);
    return H;
  };
  ex.jF = [=](const Vec&) -> Mat {
    Mat J = Mat::Zero(N, N);
    J.topRightCorner(2 * n, 2 * n) = realify_op(Astar);
    J.bottomLeftCorner(2 * n, 2 * n) = realify_op(A);
    return J;
  };
  ex.jH = [=](const Vec&, const Vec& eta) -> Mat {
    auto [eu, ev] = split(eta);
    Mat J(N, 2);
    J.col(0) = join(ev, eu);
    J.col(1) = join(Complex(0, -1) * ev, Complex(0, 1) * eu);
    return J;
  };
  ex.j2F = [N](const Vec&, const Vec&) -> Vec { return Vec::Zero(N); };
  ex.j2H = [N](const Vec&, const Vec&) -> Mat { return Mat::Zero(N, 2); };

  RayleighFunctional rf;
  rf.value = [=](const Vec& s) -> Vec {
    auto [u, v] = split(s);
    const Complex d = v.dot(u);  // v^* u
    if (std::abs(d) < 1e-12)
      throw SingularOperatorError("two_sided_eigen: biorthogonality breakdown",
                                  1.0 / std::abs(d));
    return c2vec(v.dot(A * u) / d);
  };
  rf.jacobian = [=](const Vec& s, const Vec& eta) -> Vec {
    auto [u, v] = split(s);
    auto [eu, ev] = split(eta);
    const Complex d = v.dot(u);
    const Complex num = v.dot(A * u);
    const Complex dr = (ev.dot(A * u) + v.dot(A * eu)) / d -
                       num * (ev.dot(u) + v.dot(eu)) / (d * d);
    return c2vec(dr);
  };

  Problem p;
  p.explicit_form = ex;
  p.lag = adapt_explicit(ex, rf);
  p.lag.Lx = [=](const Vec&, const Vec& lam) -> Mat {
    const Complex l = cfrom2(lam);
    Mat J = Mat::Zero(N, N);
    J.topRightCorner(2 * n, 2 * n) =
        realify_op(Astar - std::conj(l) * CMat::Identity(n, n));
    J.bottomLeftCorner(2 * n, 2 * n) =
        realify_op(A - l * CMat::Identity(n, n));
    return J;
  };
  p.lag.resolvent_form = true;

  p.linv.matrix = [=](const Vec& s) -> Mat {
    auto [u, v] = split(s);
    const Complex d = v.dot(u);
    if (std::abs(d) < 1e-12)
      throw SingularOperatorError("two_sided_eigen: biorthogonality breakdown",
                                  1.0 / std::abs(d));
    // w -> (v^* u)^{-1} v^* w_bottom
    CMat row = (v.adjoint() / d);
    Mat out = Mat::Zero(2, N);
    out.rightCols(2 * n) = realify_op(row);
    return out;
  };

  p.constraint.n_L = 2;
  p.constraint.C = [=](const Vec& s) -> Vec {
    auto [u, v] = split(s);
    Vec c(2);
    c(0) = v.squaredNorm() - 1.0;
    c(1) = u.squaredNorm() - 1.0;
    return c;
  };
  p.constraint.jC = [=](const Vec& s) -> Mat {
    Mat J = Mat::Zero(2, N);
    J.row(0).tail(2 * n) = 2.0 * s.tail(2 * n).transpose();
    J.row(1).head(2 * n) = 2.0 * s.head(2 * n).transpose();
    return J;
  };
  p.constraint.j2C = [=](const Vec&, const Vec& eta) -> Vec {
    Vec c(2);
    c(0) = 2.0 * eta.tail(2 * n).squaredNorm();
    c(1) = 2.0 * eta.head(2 * n).squaredNorm();
    return c;
  };
  Retraction r;
  r.order = 2;
  r.apply = [=](const Vec& s, const Vec& eta) -> Vec {
    Vec w = s + eta;
    const double nu = w.head(2 * n).norm(), nv = w.tail(2 * n).norm();
    if (nu < 1e-14 || nv < 1e-14)
      throw DegenerateRetractionError("two_sided_eigen: block vanished");
    Vec out(w.size());
    out.head(2 * n) = w.head(2 * n) / nu;
    out.tail(2 * n) = w.tail(2 * n) / nv;
    return out;
  };
  p.constraint.retraction = r;
  return p;
}

// ---------------------------------------------------------------------------
// tensor eigenpairs
// ---------------------------------------------------------------------------

Problem tensor_eigen_real(const SymmetricTensor& T) {
  if (T.order() < 3)
    throw std::invalid_argument("tensor_eigen_real: order must be >= 3");
  const int n = T.dim();
  const int m = T.order();

  ExplicitLagrangian ex;
  ex.n_in = ex.n_out = n;
  ex.n_L = 1;
  ex.F = [T](const Vec& x) -> Vec { return T.apply_vector(x); };
  ex.H = [](const Vec& x) -> Mat { return x; };
  ex.jF = [T, m](const Vec& x) -> Mat { return (m - 1) * T.apply_matrix(x); };
  ex.jH = [](const Vec&, const Vec& eta) -> Mat { return eta; };
  ex.j2F = [T, m, n](const Vec& x, const Vec& eta) -> Vec {
    std::vector<const Vec*> vs(static_cast<std::size_t>(m - 3), &x);
    vs.push_back(&eta);
    vs.push_back(&eta);
    auto flat = T.contract(vs, 1);
    return static_cast<double>((m - 1) * (m - 2)) *
           Eigen::Map<const Vec>(flat.data(), n);
  };
  ex.j2H = [n](const Vec&, const Vec&) -> Mat { return Mat::Zero(n, 1); };

  RayleighFunctional rf;
  rf.value = [T](const Vec& x) -> Vec {
    Vec lam(1);
    lam(0) = x.dot(T.apply_vector(x)) / x.squaredNorm();
    return lam;
  };
  rf.jacobian = [T, m](const Vec& x, const Vec& eta) -> Vec {
    const double xx = x.squaredNorm();
    const Vec F = T.apply_vector(x);
    const Mat jF = (m - 1) * T.apply_matrix(x);
    Vec out(1);
    out(0) = (eta.dot(F) + x.dot(jF * eta)) / xx -
             2.0 * x.dot(eta) * x.dot(F) / (xx * xx);
    return out;
  };

  Problem p;
  p.explicit_form = ex;
  p.lag = adapt_explicit(ex, rf);
  p.lag.Lx = [T, m, n](const Vec& x, const Vec& lam) -> Mat {
    return (m - 1) * T.apply_matrix(x) - lam(0) * Mat::Identity(n, n);
  };
  p.linv.matrix = [](const Vec& x) -> Mat {
    return x.transpose() / x.squaredNorm();
  };
  p.constraint.n_L = 1;
  p.constraint.C = [](const Vec& x) -> Vec {
    Vec c(1);
    c(0) = 0.5 * (x.squaredNorm() - 1.0);
    return c;
  };
  p.constraint.jC = [](const Vec& x) -> Mat { return x.transpose(); };
  p.constraint.j2C = [](const Vec&, const Vec& eta) -> Vec {
    Vec c(1);
    c(0) = eta.squaredNorm();
    return c;
  };
  p.constraint.retraction = sphere_retraction();
  return p;
}

Problem tensor_eigen_complex(const SymmetricTensor& T) {
  if (T.order() < 3)
    throw std::invalid_argument("tensor_eigen_complex: order must be >= 3");
  const int n = T.dim();
  const int m = T.order();
  const int N = 2 * n;

  ExplicitLagrangian ex;
  ex.n_in = ex.n_out = N;
  ex.n_L = 1;
  ex.F = [T](const Vec& s) -> Vec { return realify(T.apply_vector(complexify(s))); };
  ex.H = [](const Vec& s) -> Mat { return s; };
  ex.jF = [T, m](const Vec& s) -> Mat {
    return realify_op((m - 1) * T.apply_matrix(complexify(s)).eval());
  };
  ex.jH = [](const Vec&, const Vec& eta) -> Mat { return eta; };
  ex.j2F = [T, m](const Vec& s, const Vec& eta) -> Vec {
    const CVec z = complexify(s), ec = complexify(eta);
    std::vector<const CVec*> vs(static_cast<std::size_t>(m - 3), &z);
    vs.push_back(&ec);
    vs.push_back(&ec);
    auto flat = T.contract(vs, 1);
    CVec out = Eigen::Map<const CVec>(flat.data(), z.size());
    return static_cast<double>((m - 1) * (m - 2)) * realify(out);
  };
  ex.j2H = [N](const Vec&, const Vec&) -> Mat { return Mat::Zero(N, 1); };

  RayleighFunctional rf;
  rf.value = [T](const Vec& s) -> Vec {
    Vec lam(1);
    const CVec z = complexify(s);
    lam(0) = s.dot(realify(T.apply_vector(z))) / s.squaredNorm();
    return lam;
  };
  rf.jacobian = [T, m](const Vec& s, const Vec& eta) -> Vec {
    const CVec z = complexify(s);
    const double ss = s.squaredNorm();
    const Vec F = realify(T.apply_vector(z));
    const Mat jF = realify_op((m - 1) * T.apply_matrix(z).eval());
    Vec out(1);
    out(0) = (eta.dot(F) + s.dot(jF * eta)) / ss -
             2.0 * s.dot(eta) * s.dot(F) / (ss * ss);
    return out;
  };

  Problem p;
  p.explicit_form = ex;
  p.lag = adapt_explicit(ex, rf);
  p.lag.Lx = [T, m, n](const Vec& s, const Vec& lam) -> Mat {
    const CVec z = complexify(s);
    CMat M = (m - 1) * T.apply_matrix(z) - lam(0) * CMat::Identity(n, n);
    return realify_op(M);
  };
  // complex n x n factorization behind the realified interface
  p.lag.lx_solver = [T, m, n](const Vec& s, const Vec& lam) {
    const CVec z = complexify(s);
    CMat M = (m - 1) * T.apply_matrix(z) - lam(0) * CMat::Identity(n, n);
    auto lu = std::make_shared<Eigen::PartialPivLU<CMat>>(M);
    return [lu, n](const Mat& B) -> Mat {
      Mat out(B.rows(), B.cols());
      for (int c = 0; c < B.cols(); ++c) {
        CVec rhs = complexify(B.col(c));
        out.col(c) = realify(lu->solve(rhs).eval());
      }
      return out;
    };
  };
  p.linv.matrix = [](const Vec& s) -> Mat {
    return s.transpose() / s.squaredNorm();
  };
  p.constraint.n_L = 1;
  p.constraint.C = [](const Vec& s) -> Vec {
    Vec c(1);
    c(0) = s.squaredNorm() - 1.0;
    return c;
  };
  p.constraint.jC = [](const Vec& s) -> Mat { return 2.0 * s.transpose(); };
  p.constraint.j2C = [](const Vec&, const Vec& eta) -> Vec {
    Vec c(1);
    c(0) = 2.0 * eta.squaredNorm();
    return c;
  };
  p.constraint.retraction = sphere_retraction();
  return p;
}

// ---------------------------------------------------------------------------
// nonlinear eigenvalue problem
// ---------------------------------------------------------------------------

CMat PolynomialMatrix::eval(Complex lambda) const {
  CMat out = coeffs.at(0);
  Complex p = 1.0;
  for (std::size_t k = 1; k < coeffs.size(); ++k) {
    p *= lambda;
    out += p * coeffs[k];
  }
  return out;
}

CMat PolynomialMatrix::deriv(Complex lambda) const {
  CMat out = CMat::Zero(dim(), dim());
  Complex p = 1.0;
  for (std::size_t k = 1; k < coeffs.size(); ++k) {
    out += static_cast<double>(k) * p * coeffs[k];
    p *= lambda;
  }
  return out;
}

CMat PolynomialMatrix::deriv2(Complex lambda) const {
  CMat out = CMat::Zero(dim(), dim());
  Complex p = 1.0;
  for (std::size_t k = 2; k < coeffs.size(); ++k) {
    out += static_cast<double>(k * (k - 1)) * p * coeffs[k];
    p *= lambda;
  }
  return out;
}

bool PolynomialMatrix::is_real() const {
  for (const CMat& c : coeffs)
    if (c.imag().cwiseAbs().maxCoeff() > 0) return false;
  return true;
}

PolynomialMatrix PolynomialMatrix::random(int n, int degree, std::uint64_t seed,
                                          bool real_coeffs) {
  std::mt19937_64 rng(seed);
  PolynomialMatrix P;
  for (int k = 0; k <= degree; ++k) {
    Mat re = random_normal_mat(n, n, rng);
    Mat im = real_coeffs ? Mat::Zero(n, n) : random_normal_mat(n, n, rng);
    CMat c(n, n);
    c.real() = re / std::sqrt(static_cast<double>(n));
    c.imag() = im / std::sqrt(static_cast<double>(n));
    P.coeffs.push_back(c);
  }
  return P;
}

Problem nlep_real_sphere(const PolynomialMatrix& P, double lambda0) {
  if (!P.is_real())
    throw std::invalid_argument("nlep_real_sphere: coefficients must be real");
  const int n = P.dim();
  auto Pr = [P](double l) -> Mat { return P.eval(Complex(l, 0)).real(); };
  auto Pd = [P](double l) -> Mat { return P.deriv(Complex(l, 0)).real(); };
  auto Pd2 = [P](double l) -> Mat { return P.deriv2(Complex(l, 0)).real(); };

  GeneralLagrangian g;
  g.n_in = g.n_out = n;
  g.n_L = 1;
  g.L = [Pr](const Vec& x, const Vec& lam) -> Vec { return Pr(lam(0)) * x; };
  g.Lx = [Pr](const Vec&, const Vec& lam) -> Mat { return Pr(lam(0)); };
  g.Llambda = [Pd](const Vec& x, const Vec& lam) -> Mat { return Pd(lam(0)) * x; };
  g.Lxx = [n](const Vec&, const Vec&, const Vec&) -> Vec { return Vec::Zero(n); };
  g.Lxlambda = [Pd](const Vec&, const Vec& lam, const Vec& eta,
                    const Vec& delta) -> Vec {
    return (Pd(lam(0)) * eta) * delta(0);
  };
  g.Llambdalambda = [Pd2](const Vec& x, const Vec& lam, const Vec& delta) -> Vec {
    return (Pd2(lam(0)) * x) * (delta(0) * delta(0));
  };
  g.resolvent_form = true;

  ImplicitRayleigh ir;
  ir.N = [Pr](const Vec& x, const Vec& lam) -> Vec {
    Vec out(1);
    out(0) = x.dot(Pr(lam(0)) * x);
    return out;
  };
  ir.Nlambda = [Pd](const Vec& x, const Vec& lam) -> Mat {
    Mat out(1, 1);
    out(0, 0) = x.dot(Pd(lam(0)) * x);
    return out;
  };
  ir.Nx = [Pr](const Vec& x, const Vec& lam) -> Mat {
    const Mat M = Pr(lam(0));
    return ((M + M.transpose()) * x).transpose();
  };

  Vec l0(1);
  l0 << lambda0;
  g.rayleigh = make_implicit_rayleigh(ir, l0);

  Problem p;
  p.lag = g;
  p.linv.matrix = [Pd, rf = g.rayleigh](const Vec& x) -> Mat {
    const double lam = rf.value(x)(0);
    const Vec h = Pd(lam) * x;
    const double gram = x.dot(h);
    if (std::abs(gram) < 1e-14)
      throw SingularOperatorError("nlep_real_sphere: x^T P'(lambda) x vanished",
                                  1.0 / std::abs(gram));
    return -x.transpose() / gram;
  };
  p.constraint.n_L = 1;
  p.constraint.C = [](const Vec& x) -> Vec {
    Vec c(1);
    c(0) = 0.5 * (x.squaredNorm() - 1.0);
    return c;
  };
  p.constraint.jC = [](const Vec& x) -> Mat { return x.transpose(); };
  p.constraint.j2C = [](const Vec&, const Vec& eta) -> Vec {
    Vec c(1);
    c(0) = eta.squaredNorm();
    return c;
  };
  p.constraint.retraction = sphere_retraction();
  return p;
}

namespace {

// real 2 x 2n matrix of the map eta -> eta^* w1 + w2^T eta on realified eta;
// assembles the Nx rows of the complex NLEP Rayleigh systems
Mat sesquilinear_rows(const CVec& w1, const CVec& w2) {
  const int n = static_cast<int>(w1.size());
  Mat J(2, 2 * n);
  J.row(0).head(n) = (w1.real() + w2.real()).transpose();
  J.row(0).tail(n) = (w1.imag() - w2.imag()).transpose();
  J.row(1).head(n) = (w1.imag() + w2.imag()).transpose();
  J.row(1).tail(n) = (-w1.real() + w2.real()).transpose();
  return J;
}

}  // namespace

Problem nlep_complex_linear(const PolynomialMatrix& P, const CVec& u,
                            Complex lambda0) {
  const int n = P.dim();
  if (u.size() != n)
    throw DimensionError("nlep_complex_linear: u", n, u.size());
  const int N = 2 * n;

  GeneralLagrangian g;
  g.n_in = g.n_out = N;
  g.n_L = 2;
  g.L = [P](const Vec& s, const Vec& lam) -> Vec {
    return realify(P.eval(cfrom2(lam)) * complexify(s));
  };
  g.Lx = [P](const Vec&, const Vec& lam) -> Mat {
    return realify_op(P.eval(cfrom2(lam)));
  };
  g.Llambda = [P](const Vec& s, const Vec& lam) -> Mat {
    const CVec w = P.deriv(cfrom2(lam)) * complexify(s);
    return realify_op(CMat(w));  // 2n x 2
  };
  g.Lxx = [N](const Vec&, const Vec&, const Vec&) -> Vec { return Vec::Zero(N); };
  g.Lxlambda = [P](const Vec&, const Vec& lam, const Vec& eta,
                   const Vec& delta) -> Vec {
    return realify(P.deriv(cfrom2(lam)) * complexify(eta) * cfrom2(delta));
  };
  g.Llambdalambda = [P](const Vec& s, const Vec& lam, const Vec& delta) -> Vec {
    const Complex d = cfrom2(delta);
    return realify(P.deriv2(cfrom2(lam)) * complexify(s) * (d * d));
  };
  g.resolvent_form = true;

  ImplicitRayleigh ir;
  ir.N = [P](const Vec& s, const Vec& lam) -> Vec {
    const CVec z = complexify(s);
    return c2vec(z.dot(P.eval(cfrom2(lam)) * z));
  };
  ir.Nlambda = [P](const Vec& s, const Vec& lam) -> Mat {
    const CVec z = complexify(s);
    const Complex d = z.dot(P.deriv(cfrom2(lam)) * z);
    CMat m(1, 1);
    m(0, 0) = d;
    return realify_op(m);
  };
  ir.Nx = [P](const Vec& s, const Vec& lam) -> Mat {
    const CVec z = complexify(s);
    const CMat M = P.eval(cfrom2(lam));
    return sesquilinear_rows(M * z, M.transpose() * z.conjugate());
  };
  g.rayleigh = make_implicit_rayleigh(ir, c2vec(lambda0));

  Problem p;
  p.lag = g;
  // left inverse of H = -Llambda = P'(lambda) z at lambda = R(x)
  p.linv.matrix = [P, rf = g.rayleigh](const Vec& s) -> Mat {
    const CVec z = complexify(s);
    const Complex lam = cfrom2(rf.value(s));
    const Complex gram = z.dot(P.deriv(lam) * z);
    if (std::abs(gram) < 1e-14)
      throw SingularOperatorError("nlep_complex_linear: z^* P'(lambda) z vanished",
                                  1.0 / std::abs(gram));
    CMat row = -z.adjoint() / gram;
    return realify_op(row);
  };
  p.constraint.n_L = 2;
  p.constraint.C = [u](const Vec& s) -> Vec {
    return c2vec(u.dot(complexify(s)) - 1.0);
  };
  p.constraint.jC = [u](const Vec&) -> Mat { return realify_op(u.adjoint()); };
  p.constraint.j2C = [](const Vec&, const Vec&) -> Vec { return Vec::Zero(2); };
  Retraction r;
  r.order = 2;
  r.apply = [u](const Vec& s, const Vec& eta) -> Vec {
    CVec w = complexify(Vec(s + eta));
    const Complex d = u.dot(w);
    if (std::abs(d) < 1e-14)
      throw DegenerateRetractionError("nlep retraction: u^*(z+eta) = 0");
    return realify((w / d).eval());
  };
  p.constraint.retraction = r;
  return p;
}

Problem nlep_two_sided(const PolynomialMatrix& P, Complex lambda0) {
  const int n = P.dim();
  const int N = 4 * n;

  auto split = [n](const Vec& s) {
    return std::pair<CVec, CVec>(complexify(s.head(2 * n)),
                                 complexify(s.tail(2 * n)));
  };
  auto join = [](const CVec& a, const CVec& b) -> Vec {
    Vec s(2 * a.size() + 2 * b.size());
    s.head(2 * a.size()) = realify(a);
    s.tail(2 * b.size()) = realify(b);
    return s;
  };

  GeneralLagrangian g;
  g.n_in = g.n_out = N;
  g.n_L = 2;
  g.L = [=](const Vec& s, const Vec& lam) -> Vec {
    auto [u, v] = split(s);
    const Complex l = cfrom2(lam);
    return join(P.eval(l).adjoint() * v, P.eval(l) * u);
  };
  g.Lx = [=](const Vec&, const Vec& lam) -> Mat {
    const Complex l = cfrom2(lam);
    Mat J = Mat::Zero(N, N);
    J.topRightCorner(2 * n, 2 * n) = realify_op(P.eval(l).adjoint());
    J.bottomLeftCorner(2 * n, 2 * n) = realify_op(P.eval(l));
    return J;
  };
  g.Llambda = [=](const Vec& s, const Vec& lam) -> Mat {
    auto [u, v] = split(s);
    const Complex l = cfrom2(lam);
    const CVec top = P.deriv(l).adjoint() * v;  // times conj(delta)
    const CVec bot = P.deriv(l) * u;            // times delta
    Mat J(N, 2);
    J.col(0) = join(top, bot);
    J.col(1) = join(Complex(0, -1) * top, Complex(0, 1) * bot);
    return J;
  };
  g.Lxx = [N](const Vec&, const Vec&, const Vec&) -> Vec { return Vec::Zero(N); };
  g.Lxlambda = [=](const Vec&, const Vec& lam, const Vec& eta,
                   const Vec& delta) -> Vec {
    auto [eu, ev] = split(eta);
    const Complex l = cfrom2(lam), d = cfrom2(delta);
    return join(P.deriv(l).adjoint() * ev * std::conj(d), P.deriv(l) * eu * d);
  };
  g.Llambdalambda = [=](const Vec& s, const Vec& lam, const Vec& delta) -> Vec {
    auto [u, v] = split(s);
    const Complex l = cfrom2(lam), d = cfrom2(delta);
    return join(P.deriv2(l).adjoint() * v * std::conj(d * d),
                P.deriv2(l) * u * (d * d));
  };
  g.resolvent_form = true;

  ImplicitRayleigh ir;
  ir.N = [=](const Vec& s, const Vec& lam) -> Vec {
    auto [u, v] = split(s);
    return c2vec(v.dot(P.eval(cfrom2(lam)) * u));
  };
  ir.Nlambda = [=](const Vec& s, const Vec& lam) -> Mat {
    auto [u, v] = split(s);
    CMat m(1, 1);
    m(0, 0) = v.dot(P.deriv(cfrom2(lam)) * u);
    return realify_op(m);
  };
  ir.Nx = [=](const Vec& s, const Vec& lam) -> Mat {
    auto [u, v] = split(s);
    const CMat M = P.eval(cfrom2(lam));
    // dN = eta_v^* (M u) + (v^* M) eta_u
    Mat J = Mat::Zero(2, N);
    J.rightCols(2 * n) = sesquilinear_rows(M * u, CVec::Zero(n));
    J.leftCols(2 * n) = sesquilinear_rows(CVec::Zero(n), M.transpose() * v.conjugate());
    return J;
  };
  g.rayleigh = make_implicit_rayleigh(ir, c2vec(lambda0));

  Problem p;
  p.lag = g;
  // left inverse of H = -Llambda: w = (a; b) -> (v^* P'(lambda) u)^{-1} v^* b
  p.linv.matrix = [P, split, n, N, rf = g.rayleigh](const Vec& s) -> Mat {
    auto [u, v] = split(s);
    const Complex lam = cfrom2(rf.value(s));
    const Complex gram = v.dot(P.deriv(lam) * u);
    if (std::abs(gram) < 1e-14)
      throw SingularOperatorError("nlep_two_sided: v^* P'(lambda) u vanished",
                                  1.0 / std::abs(gram));
    CMat row = -v.adjoint() / gram;
    Mat out = Mat::Zero(2, N);
    out.rightCols(2 * n) = realify_op(row);
    return out;
  };
  p.constraint.n_L = 2;
  p.constraint.C = [=](const Vec& s) -> Vec {
    auto [u, v] = split(s);
    Vec c(2);
    c(0) = v.squaredNorm() - 1.0;
    c(1) = u.squaredNorm() - 1.0;
    return c;
  };
  p.constraint.jC = [=](const Vec& s) -> Mat {
    Mat J = Mat::Zero(2, N);
    J.row(0).tail(2 * n) = 2.0 * s.tail(2 * n).transpose();
    J.row(1).head(2 * n) = 2.0 * s.head(2 * n).transpose();
    return J;
  };
  p.constraint.j2C = [=](const Vec&, const Vec& eta) -> Vec {
    Vec c(2);
    c(0) = 2.0 * eta.tail(2 * n).squaredNorm();
    c(1) = 2.0 * eta.head(2 * n).squaredNorm();
    return c;
  };
  Retraction r;
  r.order = 2;
  r.apply = [=](const Vec& s, const Vec& eta) -> Vec {
    Vec w = s + eta;
    const double nu = w.head(2 * n).norm(), nv = w.tail(2 * n).norm();
    if (nu < 1e-14 || nv < 1e-14)
      throw DegenerateRetractionError("nlep_two_sided: block vanished");
    Vec out(w.size());
    out.head(2 * n) = w.head(2 * n) / nu;
    out.tail(2 * n) = w.tail(2 * n) / nv;
    return out;
  };
  p.constraint.retraction = r;
  return p;
}

// ---------------------------------------------------------------------------
// Stiefel
// ---------------------------------------------------------------------------

namespace {

Mat stiefel_operator_matrix(const std::vector<double>& Aten, int n, int p) {
  const std::size_t expect = static_cast<std::size_t>(n) * p * n * p;
  if (Aten.size() != expect)
    throw DimensionError("stiefel_quadratic: Aten", static_cast<long>(expect),
                         static_cast<long>(Aten.size()));
  Mat A(n * p, n * p);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < p; ++a)
      for (int j = 0; j < n; ++j)
        for (int b = 0; b < p; ++b)
          A(i + n * a, j + n * b) =
              Aten[((static_cast<std::size_t>(i) * p + a) * n + j) * p + b];
  return A;
}

// full (unscaled) symmetric basis matrix for packed index k
Mat sym_basis_full(int p, int k) {
  Mat E = Mat::Zero(p, p);
  int idx = 0;
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) {
      if (idx == k) {
        E(i, j) = 1.0;
        E(j, i) = 1.0;
        if (i == j) E(i, j) = 1.0;
        return E;
      }
      ++idx;
    }
  throw std::out_of_range("sym_basis_full");
}

}  // namespace

Problem stiefel_quadratic(const std::vector<double>& Aten, int n, int p_cols,
                          const Mat& b) {
  const Mat A = stiefel_operator_matrix(Aten, n, p_cols);
  const int np = n * p_cols;
  const int q = sym_pack_size(p_cols);
  const Vec bv = Eigen::Map<const Vec>(b.data(), np);

  auto unvec = [n, p_cols](const Vec& s) -> Mat {
    return Eigen::Map<const Mat>(s.data(), n, p_cols);
  };

  ExplicitLagrangian ex;
  ex.n_in = ex.n_out = np;
  ex.n_L = q;
  ex.F = [A, bv](const Vec& s) -> Vec { return A * s + bv; };
  ex.jF = [A](const Vec&) -> Mat { return A; };
  ex.H = [=](const Vec& s) -> Mat {
    const Mat x = unvec(s);
    Mat H(np, q);
    for (int k = 0; k < q; ++k) {
      Mat col = x * sym_basis_full(p_cols, k);
      H.col(k) = Eigen::Map<const Vec>(col.data(), np);
    }
    return H;
  };
  ex.jH = [=](const Vec&, const Vec& eta) -> Mat {
    const Mat e = unvec(eta);
    Mat J(np, q);
    for (int k = 0; k < q; ++k) {
      Mat col = e * sym_basis_full(p_cols, k);
      J.col(k) = Eigen::Map<const Vec>(col.data(), np);
    }
    return J;
  };
  ex.j2F = [np](const Vec&, const Vec&) -> Vec { return Vec::Zero(np); };
  ex.j2H = [np, q](const Vec&, const Vec&) -> Mat { return Mat::Zero(np, q); };

  RayleighFunctional rf;
  rf.value = [=](const Vec& s) -> Vec {
    const Mat x = unvec(s);
    const Mat Fm = unvec(Vec(A * s + bv));
    return sym_pack(0.5 * (x.transpose() * Fm + Fm.transpose() * x));
  };
  rf.jacobian = [=](const Vec& s, const Vec& eta) -> Vec {
    const Mat x = unvec(s), e = unvec(eta);
    const Mat Fm = unvec(Vec(A * s + bv));
    const Mat dF = unvec(Vec(A * eta));
    const Mat S = e.transpose() * Fm + x.transpose() * dF;
    return sym_pack(0.5 * (S + S.transpose()));
  };

  Problem p;
  p.explicit_form = ex;
  p.lag = adapt_explicit(ex, rf);
  p.lag.Lx = [=](const Vec&, const Vec& lam) -> Mat {
    const Mat M = sym_unpack(lam, p_cols);
    Mat out = A;
    // subtract eta -> eta*M, i.e. kron(M^T, I_n)
    for (int a = 0; a < p_cols; ++a)
      for (int b = 0; b < p_cols; ++b)
        out.block(n * a, n * b, n, n) -= M(b, a) * Mat::Identity(n, n);
    return out;
  };

  auto constraint_rows = [=](const Vec& s) -> Mat {
    const Mat x = unvec(s);
    Mat J(q, np);
    int k = 0;
    for (int i = 0; i < p_cols; ++i)
      for (int j = i; j < p_cols; ++j) {
        Vec row = Vec::Zero(np);
        for (int r = 0; r < n; ++r) {
          row(r + n * j) += 0.5 * x(r, i);
          row(r + n * i) += 0.5 * x(r, j);
        }
        J.row(k++) = row.transpose();
      }
    return J;
  };

  p.linv.matrix = constraint_rows;  // pack(1/2 (x^T W + W^T x))
  p.constraint.n_L = q;
  p.constraint.C = [=](const Vec& s) -> Vec {
    const Mat x = unvec(s);
    return sym_pack(0.5 * (x.transpose() * x - Mat::Identity(p_cols, p_cols)));
  };
  p.constraint.jC = constraint_rows;
  p.constraint.j2C = [=](const Vec&, const Vec& eta) -> Vec {
    const Mat e = unvec(eta);
    return sym_pack(e.transpose() * e);
  };
  p.constraint.retraction = stiefel_polar_retraction(n, p_cols);
  return p;
}

Problem stiefel_random(int n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int np = n * p;
  Mat A = random_normal_mat(np, np, rng);
  A = ((A + A.transpose()) / 2.0).eval();
  std::vector<double> Aten(static_cast<std::size_t>(np) * np);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < p; ++a)
      for (int j = 0; j < n; ++j)
        for (int b = 0; b < p; ++b)
          Aten[((static_cast<std::size_t>(i) * p + a) * n + j) * p + b] =
              A(i + n * a, j + n * b);
  Mat b(n, p);
  b = random_normal_mat(n, p, rng);
  return stiefel_quadratic(Aten, n, p, b);
}

// ---------------------------------------------------------------------------
// graph-form constraints
// ---------------------------------------------------------------------------

namespace {

Problem graph_problem_impl(int n_f, GraphF f_kind, GraphH h_kind,
                           std::uint64_t seed, const Vec& f_offset) {
  if (n_f < 1) throw std::invalid_argument("graph_problem: n_f must be >= 1");
  const int n = n_f + 2;
  std::mt19937_64 rng(seed);
  const Mat A = random_normal_mat(n, n, rng) / std::sqrt(static_cast<double>(n));
  const Mat B = random_normal_mat(n, n, rng) / std::sqrt(static_cast<double>(n));
  Mat H0 = random_normal_mat(n, 2, rng);
  const Vec w1 = random_normal_vec(n, rng) / std::sqrt(static_cast<double>(n));
  const Vec w2 = random_normal_vec(n, rng) / std::sqrt(static_cast<double>(n));
  const bool with_sin = f_kind == GraphF::LinearPlusSin;
  const bool quad_h = h_kind == GraphH::Quadratic;
  const Vec off = f_offset.size() == n ? f_offset : Vec(Vec::Zero(n));

  ExplicitLagrangian ex;
  ex.n_in = ex.n_out = n;
  ex.n_L = 2;
  ex.F = [=](const Vec& x) -> Vec {
    Vec f = A * x - off;
    if (with_sin) f += (B * x).array().sin().matrix();
    return f;
  };
  ex.jF = [=](const Vec& x) -> Mat {
    Mat J = A;
    if (with_sin) J += ((B * x).array().cos().matrix()).asDiagonal() * B;
    return J;
  };
  ex.j2F = [=](const Vec& x, const Vec& eta) -> Vec {
    if (!with_sin) return Vec::Zero(n);
    const Vec be = B * eta;
    return (-(B * x).array().sin() * be.array() * be.array()).matrix();
  };
  ex.H = [=](const Vec& x) -> Mat {
    Mat H = H0;
    if (quad_h) {
      H.col(0) += w1.dot(x) * x;
      H.col(1) += w2.dot(x) * x;
    }
    return H;
  };
  ex.jH = [=](const Vec& x, const Vec& eta) -> Mat {
    Mat J = Mat::Zero(n, 2);
    if (quad_h) {
      J.col(0) = w1.dot(eta) * x + w1.dot(x) * eta;
      J.col(1) = w2.dot(eta) * x + w2.dot(x) * eta;
    }
    return J;
  };
  ex.j2H = [=](const Vec&, const Vec& eta) -> Mat {
    Mat J = Mat::Zero(n, 2);
    if (quad_h) {
      J.col(0) = 2.0 * w1.dot(eta) * eta;
      J.col(1) = 2.0 * w2.dot(eta) * eta;
    }
    return J;
  };

  Problem p;
  p.explicit_form = ex;
  p.linv = gram_left_inverse(ex.H);
  RayleighFunctional rf;
  rf.value = [linv = p.linv, F = ex.F](const Vec& x) -> Vec {
    return linv.apply(x, F(x));
  };
  p.lag = adapt_explicit(ex, rf);

  p.constraint.n_L = 2;
  p.constraint.C = [=](const Vec& x) -> Vec {
    const auto y = x.head(n_f).array();
    Vec c(2);
    c(0) = x(n_f) - (y + y.sin()).sum();
    c(1) = x(n_f + 1) - (y + y.cos()).sum();
    return c;
  };
  p.constraint.jC = [=](const Vec& x) -> Mat {
    const auto y = x.head(n_f).array();
    Mat J = Mat::Zero(2, n);
    J.row(0).head(n_f) = (-(1.0 + y.cos())).matrix().transpose();
    J.row(1).head(n_f) = (-(1.0 - y.sin())).matrix().transpose();
    J(0, n_f) = 1.0;
    J(1, n_f + 1) = 1.0;
    return J;
  };
  p.constraint.j2C = [=](const Vec& x, const Vec& eta) -> Vec {
    const auto y = x.head(n_f).array();
    const auto e = eta.head(n_f).array();
    Vec c(2);
    c(0) = (y.sin() * e * e).sum();
    c(1) = (y.cos() * e * e).sum();
    return c;
  };
  std::vector<std::function<double(const Vec&)>> solved;
  solved.push_back([](const Vec& y) { return (y.array() + y.array().sin()).sum(); });
  solved.push_back([](const Vec& y) { return (y.array() + y.array().cos()).sum(); });
  p.constraint.retraction = orthographic_graph_retraction(n_f, std::move(solved));
  return p;
}

}  // namespace

Problem graph_problem(int n_f, GraphF f_kind, GraphH h_kind, std::uint64_t seed) {
  return graph_problem_impl(n_f, f_kind, h_kind, seed, Vec());
}

std::tuple<Problem, Vec, Vec> graph_problem_with_solution(int n_f, GraphF f_kind,
                                                          GraphH h_kind,
                                                          std::uint64_t seed) {
  const int n = n_f + 2;
  Problem plain = graph_problem_impl(n_f, f_kind, h_kind, seed, Vec());
  std::mt19937_64 rng(seed ^ 0xd1b54a32d192ed03ull);
  Vec xs = 0.3 * random_normal_vec(n, rng);
  // make it feasible
  xs = plain.constraint.retraction.apply(xs, Vec::Zero(n));
  Vec ls = random_normal_vec(2, rng);
  const Vec offset = plain.explicit_form->F(xs) - plain.explicit_form->H(xs) * ls;
  Problem shifted = graph_problem_impl(n_f, f_kind, h_kind, seed, offset);
  return {std::move(shifted), xs, ls};
}

// ---------------------------------------------------------------------------
// Grassmann drivers
// ---------------------------------------------------------------------------

SolveResult grassmann_invariant_solve(const Mat& A, int p, const Mat& x0,
                                      const SolverConfig& cfg) {
  const int n = static_cast<int>(A.rows());
  SolveResult res;
  Mat x = x0;
  for (int iter = 0;; ++iter) {
    const Mat R = x.transpose() * A * x;
    const Mat grad = A * x - x * R;
    const double residual = grad.norm();
    res.residual_history.push_back(residual);
    res.iterations = iter;
    res.lambda_final = Eigen::Map<const Vec>(R.data(), p * p);
    const TerminalDecision dec = terminal(iter, residual, 0.0, x.norm(), cfg);
    if (dec == TerminalDecision::Success) {
      res.converged = true;
      break;
    }
    if (dec != TerminalDecision::Continue) {
      res.failure = FailureReason::MaxIter;
      break;
    }
    // Sylvester resolvent A zeta - zeta R = x via the Kronecker system
    Mat K = Mat::Zero(n * p, n * p);
    for (int a = 0; a < p; ++a) {
      K.block(n * a, n * a, n, n) = A;
      for (int b = 0; b < p; ++b)
        K.block(n * a, n * b, n, n) -= R(b, a) * Mat::Identity(n, n);
    }
    Eigen::PartialPivLU<Mat> lu(K);
    const Vec zv = lu.solve(Eigen::Map<const Vec>(x.data(), n * p));
    if (!zv.allFinite()) {
      res.failure = FailureReason::SingularLx;
      break;
    }
    const Mat zeta = Eigen::Map<const Mat>(zv.data(), n, p);
    // eta = zeta (x^T zeta)^{-1} - x  (the amplified modes cancel in the ratio)
    Eigen::PartialPivLU<Mat> sc(x.transpose() * zeta);
    const Mat eta = (sc.solve(zeta.transpose())).transpose() - x;
    if (!eta.allFinite()) {
      res.failure = FailureReason::SingularSchur;
      break;
    }
    if (cfg.observer) {
      IterationRecord rec;
      rec.iter = iter;
      rec.residual = residual;
      rec.x = Eigen::Map<const Vec>(x.data(), n * p);
      rec.lambda = res.lambda_final;
      rec.eta = Eigen::Map<const Vec>(eta.data(), n * p);
      rec.zeta = zeta;
      cfg.observer(rec);
    }
    Eigen::JacobiSVD<Mat> svd(x + eta, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.singularValues().minCoeff() < 1e-12) {
      res.failure = FailureReason::DegenerateRetraction;
      break;
    }
    x = svd.matrixU() * svd.matrixV().transpose();
    res.step_history.push_back(eta.norm());
  }
  res.x_final = Eigen::Map<const Vec>(x.data(), n * p);
  return res;
}

Mat grassmann_rho_gradient(const Mat& L, double alpha, const Mat& x) {
  const Mat gram_inv = (x.transpose() * x).inverse();
  const Vec rho = (x * gram_inv * x.transpose()).diagonal();
  const Vec Lrho = L.lu().solve(rho);
  return L * x + alpha * Lrho.asDiagonal() * x;
}

Mat grassmann_rho_jf(const Mat& L, double alpha, const Mat& x, const Mat& eta) {
  // valid at feasible x (x^T x = I)
  const Vec rho = (x * x.transpose()).diagonal();
  const Vec Lrho = L.lu().solve(rho);
  const Mat proj_eta = eta - x * (x.transpose() * eta);
  const Vec drho = 2.0 * (proj_eta * x.transpose()).diagonal();
  const Vec Ldrho = L.lu().solve(drho);
  return L * eta + alpha * Ldrho.asDiagonal() * x + alpha * Lrho.asDiagonal() * eta;
}

SolveResult grassmann_rho_solve(const Mat& L, double alpha, int p, const Mat& x0,
                                const SolverConfig& cfg) {
  // The multiplier block has no matrix shortcut here, and routing the solve
  // through zeta = Lx^{-1}(x .) breaks down near critical points: Lx turns
  // singular along the gauge orbit and the p^2 x p^2 Schur block degrades
  // like 1/residual^2. The update is therefore solved on the horizontal
  // frame eta = x_perp M, where the projected operator stays bounded.
  const int n = static_cast<int>(L.rows());
  const int h = (n - p) * p;
  SolveResult res;
  Mat x = x0;
  for (int iter = 0;; ++iter) {
    const Mat F = grassmann_rho_gradient(L, alpha, x);
    const Mat R = x.transpose() * F;
    const Mat grad = F - x * R;
    const double residual = grad.norm();
    res.residual_history.push_back(residual);
    res.iterations = iter;
    res.lambda_final = Eigen::Map<const Vec>(R.data(), p * p);
    const TerminalDecision dec = terminal(iter, residual, 0.0, x.norm(), cfg);
    if (dec == TerminalDecision::Success) {
      res.converged = true;
      break;
    }
    if (dec != TerminalDecision::Continue) {
      res.failure = FailureReason::MaxIter;
      break;
    }
    Eigen::HouseholderQR<Mat> qr(x);
    const Mat xperp = Mat(qr.householderQ()).rightCols(n - p);
    Mat Hp(h, h);
    for (int c = 0; c < h; ++c) {
      Mat M = Mat::Zero(n - p, p);
      M(c % (n - p), c / (n - p)) = 1.0;
      const Mat dir = xperp * M;
      const Mat col =
          xperp.transpose() * (grassmann_rho_jf(L, alpha, x, dir) - dir * R);
      Hp.col(c) = Eigen::Map<const Vec>(col.data(), h);
    }
    const Mat rhs_m = xperp.transpose() * grad;
    Eigen::PartialPivLU<Mat> lu(Hp);
    const Vec c = lu.solve(-Eigen::Map<const Vec>(rhs_m.data(), h));
    if (!c.allFinite()) {
      res.failure = FailureReason::SingularSchur;
      break;
    }
    const Mat eta = xperp * Eigen::Map<const Mat>(c.data(), n - p, p);
    Eigen::JacobiSVD<Mat> svd(x + eta, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.singularValues().minCoeff() < 1e-12) {
      res.failure = FailureReason::DegenerateRetraction;
      break;
    }
    x = svd.matrixU() * svd.matrixV().transpose();
    res.step_history.push_back(eta.norm());
  }
  res.x_final = Eigen::Map<const Vec>(x.data(), n * p);
  return res;
}

}  // namespace lagrq
