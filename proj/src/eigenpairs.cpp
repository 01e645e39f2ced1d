#include "lagrq/eigenpairs.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace lagrq {

long long cartwright_count(int m, int n) {
  if (m < 2 || n < 1) throw std::invalid_argument("cartwright_count: m>=2, n>=1");
  if (m == 2) return n;
  long long num = 0, power = 1;  // ((m-1)^n - 1) / (m-2)
  for (int k = 0; k < n; ++k) {
    power *= (m - 1);
    if (power < 0) throw std::overflow_error("cartwright_count: overflow");
  }
  num = power - 1;
  return num / (m - 2);
}

NormalizedPair normalize_pair(const CVec& z, Complex lambda, int m) {
  NormalizedPair out;
  out.z = z / z.norm();
  if (std::abs(lambda) < 1e-13) {
    out.lambda = 0.0;
    out.zero = true;
    return out;
  }
  const double rel_imag = std::abs(lambda.imag()) / std::abs(lambda);
  if (rel_imag > 1e-12) {
    const Complex t = std::exp(Complex(0, -std::arg(lambda) / (m - 2)));
    out.z = (t * out.z).eval();
    out.lambda = std::abs(lambda);
    return out;
  }
  double lr = lambda.real();
  if (lr < 0 && m % 2 == 1) {
    // t = -1: t^{m-2} = -1 for odd m
    out.z = -out.z;
    lr = -lr;
  }
  out.lambda = lr;
  return out;
}

namespace {

bool phase_equivalent(const CVec& z1, const CVec& z2, int m, double tol,
                      double want) {
  const Complex c = z1.dot(z2);  // z1^* z2
  if (std::abs(c) < 1.0 - tol) return false;
  const Complex t = c / std::abs(c);
  return std::abs(std::pow(t, m - 2) - want) <= tol;
}

}  // namespace

bool pairs_equivalent(const CVec& z1, const CVec& z2, int m, double tol) {
  return phase_equivalent(z1, z2, m, tol, 1.0);
}

bool records_equivalent(const EigenpairRecord& a, const EigenpairRecord& b,
                        int m, double tol) {
  if (a.zero_eigenvalue != b.zero_eigenvalue) return false;
  if (a.zero_eigenvalue) {
    // lambda = 0: any phase identifies the pair
    return std::abs(a.z.dot(b.z)) >= 1.0 - tol;
  }
  const double scale = std::max({1.0, std::abs(a.lambda), std::abs(b.lambda)});
  if (std::abs(std::abs(a.lambda) - std::abs(b.lambda)) > tol * scale)
    return false;
  const bool same_sign = (a.lambda >= 0) == (b.lambda >= 0);
  return phase_equivalent(a.z, b.z, m, tol, same_sign ? 1.0 : -1.0);
}

ConjugateStatus conjugate_status(const CVec& z, double tol) {
  const Complex u = z.transpose() * z;  // plain bilinear z^T z
  const double err = (u * z.conjugate() - z).norm();
  return err <= tol ? ConjugateStatus::SelfConjugate
                    : ConjugateStatus::DistinctConjugate;
}

bool is_real_pair(const CVec& z, double tol) { return real_form(z, tol).has_value(); }

std::optional<Vec> real_form(const CVec& z, double tol) {
  int imax = 0;
  z.cwiseAbs().maxCoeff(&imax);
  const Complex p = z(imax) / std::abs(z(imax));
  const CVec w = z / p;
  if (w.imag().cwiseAbs().maxCoeff() <= tol) return Vec(w.real());
  return std::nullopt;
}

long long EigenpairTable::class_count() const {
  long long c = 0;
  for (const auto& r : records)
    if (!r.zero_eigenvalue) ++c;
  return c;
}

bool EigenpairTable::insert(const NormalizedPair& np, double residual) {
  EigenpairRecord cand;
  cand.z = np.z;
  cand.lambda = np.lambda;
  cand.zero_eigenvalue = np.zero;
  for (auto& rec : records) {
    if (records_equivalent(rec, cand, order, dedup_tol)) {
      ++rec.hits;
      if (residual < rec.residual) rec.residual = residual;
      return false;
    }
  }
  cand.residual = residual;
  cand.is_real = is_real_pair(cand.z);
  cand.self_conjugate =
      conjugate_status(cand.z) == ConjugateStatus::SelfConjugate;
  records.push_back(std::move(cand));
  return true;
}

namespace {

CVec random_unit_complex(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  CVec z(n);
  for (int i = 0; i < n; ++i) z(i) = Complex(normal(rng), normal(rng));
  return z / z.norm();
}

struct RestartResult {
  bool converged = false;
  CVec z;
  double lambda = 0;
  double residual = 0;
};

RestartResult run_restart(const Problem& prob, const SymmetricTensor& T,
                          const SolverConfig& cfg, std::uint64_t seed,
                          long long index) {
  RestartResult rr;
  const std::uint64_t sub =
      seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(index + 1));
  const CVec z0 = random_unit_complex(T.dim(), sub);
  SolveResult sol = rqi_schur(prob, realify(z0), cfg);
  if (!sol.converged) return rr;
  rr.converged = true;
  rr.z = complexify(sol.x_final);
  rr.lambda = sol.lambda_final(0);
  const CVec res = T.apply_vector(rr.z) - rr.lambda * rr.z;
  rr.residual = res.norm();
  return rr;
}

}  // namespace

EnumerationOutcome enumerate_complex(const SymmetricTensor& T,
                                     const SolverConfig& cfg,
                                     long long max_restarts, std::uint64_t seed,
                                     int workers) {
  const int m = T.order();
  const int n = T.dim();
  EnumerationOutcome out;
  out.table.order = m;
  out.table.dim = n;
  out.table.target_count = cartwright_count(m, n);
  if (max_restarts <= 0) max_restarts = 200 * out.table.target_count;
  if (workers < 1) workers = 1;

  const Problem prob = tensor_eigen_complex(T);
  const long long ninety =
      (out.table.target_count * 9 + 9) / 10;  // ceil(0.9 target)

  auto note_progress = [&](long long restart_index) {
    const long long c = out.table.class_count();
    if (out.restarts_to_90 < 0 && c >= ninety) out.restarts_to_90 = restart_index + 1;
    if (out.restarts_to_all < 0 && c >= out.table.target_count)
      out.restarts_to_all = restart_index + 1;
  };

  auto merge_result = [&](const RestartResult& rr, long long restart_index) {
    if (!rr.converged) return;
    ++out.converged_runs;
    NormalizedPair np = normalize_pair(rr.z, Complex(rr.lambda, 0.0), m);
    const bool added = out.table.insert(np, rr.residual);
    if (added && !np.zero) {
      const EigenpairRecord& rec = out.table.records.back();
      if (!rec.self_conjugate) {
        NormalizedPair cj;
        cj.z = rec.z.conjugate();
        cj.lambda = rec.lambda;
        cj.zero = false;
        const CVec res = T.apply_vector(cj.z) - cj.lambda * cj.z;
        out.table.insert(cj, res.norm());
      }
    }
    note_progress(restart_index);
  };

  for (long long base = 0; base < max_restarts && !out.complete();
       base += workers) {
    const int batch =
        static_cast<int>(std::min<long long>(workers, max_restarts - base));
    std::vector<RestartResult> results(batch);
    if (batch == 1) {
      results[0] = run_restart(prob, T, cfg, seed, base);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(batch);
      for (int w = 0; w < batch; ++w)
        pool.emplace_back([&, w]() {
          results[w] = run_restart(prob, T, cfg, seed, base + w);
        });
      for (auto& th : pool) th.join();
    }
    for (int w = 0; w < batch && !out.complete(); ++w) {
      merge_result(results[w], base + w);
      out.restarts = base + w + 1;
    }
  }

  // lambda shared by inequivalent, non-conjugate classes
  const auto& recs = out.table.records;
  for (std::size_t i = 0; i < recs.size(); ++i)
    for (std::size_t j = i + 1; j < recs.size(); ++j) {
      if (recs[i].zero_eigenvalue || recs[j].zero_eigenvalue) continue;
      if (std::abs(recs[i].lambda - recs[j].lambda) >
          1e-8 * std::max(1.0, std::abs(recs[i].lambda)))
        continue;
      const bool conj_partners =
          std::abs(Complex(recs[i].z.conjugate().dot(recs[j].z))) > 1.0 - 1e-6;
      if (!conj_partners) ++out.n_multiple_eigen;
    }
  return out;
}

std::string table_to_csv(const EigenpairTable& table) {
  std::ostringstream os;
  os.precision(17);
  os << "lambda";
  for (int i = 0; i < table.dim; ++i) os << ",z_real_" << i;
  for (int i = 0; i < table.dim; ++i) os << ",z_imag_" << i;
  os << ",residual,is_real,self_conjugate,hits\n";
  for (const auto& r : table.records) {
    os << r.lambda;
    for (int i = 0; i < table.dim; ++i) os << "," << r.z(i).real();
    for (int i = 0; i < table.dim; ++i) os << "," << r.z(i).imag();
    os << "," << r.residual << "," << (r.is_real ? 1 : 0) << ","
       << (r.self_conjugate ? 1 : 0) << "," << r.hits << "\n";
  }
  return os.str();
}

std::string table_to_json(const EigenpairTable& table) {
  nlohmann::json j;
  j["order"] = table.order;
  j["dim"] = table.dim;
  j["target_count"] = table.target_count;
  j["records"] = nlohmann::json::array();
  for (const auto& r : table.records) {
    nlohmann::json rec;
    rec["lambda"] = r.lambda;
    std::vector<double> zr(table.dim), zi(table.dim);
    for (int i = 0; i < table.dim; ++i) {
      zr[i] = r.z(i).real();
      zi[i] = r.z(i).imag();
    }
    rec["z_real"] = zr;
    rec["z_imag"] = zi;
    rec["residual"] = r.residual;
    rec["is_real"] = r.is_real;
    rec["self_conjugate"] = r.self_conjugate;
    rec["zero_eigenvalue"] = r.zero_eigenvalue;
    rec["hits"] = r.hits;
    j["records"].push_back(rec);
  }
  return j.dump(2);
}

}  // namespace lagrq
