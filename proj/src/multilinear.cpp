#include "lagrq/multilinear.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

namespace lagrq {

namespace {

std::size_t pow_size(int dim, int order) {
  std::size_t s = 1;
  for (int k = 0; k < order; ++k) s *= static_cast<std::size_t>(dim);
  return s;
}

void check_shape(int order, int dim, std::size_t count, const char* where) {
  if (order < 2) throw std::invalid_argument(std::string(where) + ": order must be >= 2");
  if (dim < 1) throw std::invalid_argument(std::string(where) + ": dim must be >= 1");
  const std::size_t expect = pow_size(dim, order);
  if (count != expect)
    throw DimensionError(where, static_cast<long>(expect), static_cast<long>(count));
}

// Generic trailing-mode contraction. Each pass contracts the last mode
// with one vector, shrinking the buffer by a factor of n.
template <class Scalar, class EVec>
std::vector<Scalar> contract_impl(const std::vector<double>& entries, int order,
                                  int dim, const std::vector<const EVec*>& vs,
                                  int free) {
  if (free < 0 || free + static_cast<int>(vs.size()) != order)
    throw std::invalid_argument("contract: vector count + free slots != order");
  std::vector<Scalar> buf(entries.begin(), entries.end());
  for (const EVec* v : vs) {
    if (v->size() != dim)
      throw DimensionError("contract", dim, static_cast<long>(v->size()));
    const std::size_t outer = buf.size() / dim;
    std::vector<Scalar> next(outer);
    for (std::size_t i = 0; i < outer; ++i) {
      Scalar sum{};
      const Scalar* row = buf.data() + i * dim;
      for (int j = 0; j < dim; ++j) sum += row[j] * (*v)(j);
      next[i] = sum;
    }
    buf = std::move(next);
  }
  return buf;
}

template <class EVec>
std::vector<const EVec*> repeat(const EVec& x, int count) {
  return std::vector<const EVec*>(static_cast<std::size_t>(count), &x);
}

}  // namespace

SymmetricTensor SymmetricTensor::from_entries(int order, int dim,
                                              std::vector<double> entries) {
  check_shape(order, dim, entries.size(), "SymmetricTensor::from_entries");
  SymmetricTensor t(order, dim, std::move(entries));
  const double viol = t.max_symmetry_violation();
  if (viol > 1e-13)
    throw std::invalid_argument(
        "SymmetricTensor::from_entries: symmetry violation " +
        std::to_string(viol) + " exceeds 1e-13; use symmetrize");
  return t;
}

SymmetricTensor SymmetricTensor::symmetrize(int order, int dim,
                                            const std::vector<double>& raw) {
  check_shape(order, dim, raw.size(), "SymmetricTensor::symmetrize");
  const std::size_t total = raw.size();
  std::vector<double> out(total, 0.0);
  std::vector<int> perm(order);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> idx(order), pidx(order);
  double nperm = 0;
  do {
    ++nperm;
    for (std::size_t lin = 0; lin < total; ++lin) {
      std::size_t rest = lin;
      for (int k = order - 1; k >= 0; --k) {
        idx[k] = static_cast<int>(rest % dim);
        rest /= dim;
      }
      for (int k = 0; k < order; ++k) pidx[k] = idx[perm[k]];
      std::size_t plin = 0;
      for (int k = 0; k < order; ++k) plin = plin * dim + pidx[k];
      out[lin] += raw[plin];
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (double& v : out) v /= nperm;
  // copy each orbit's canonical (sorted-index) value everywhere so the
  // symmetry invariant holds bitwise, not just to rounding
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::size_t rest = lin;
    for (int k = order - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(rest % dim);
      rest /= dim;
    }
    std::sort(idx.begin(), idx.end());
    std::size_t canon = 0;
    for (int k = 0; k < order; ++k) canon = canon * dim + idx[k];
    out[lin] = out[canon];
  }
  return SymmetricTensor(order, dim, std::move(out));
}

SymmetricTensor SymmetricTensor::random(int order, int dim, std::uint64_t seed) {
  check_shape(order, dim, pow_size(dim, order), "SymmetricTensor::random");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> raw(pow_size(dim, order));
  for (double& v : raw) v = normal(rng);
  return symmetrize(order, dim, raw);
}

double SymmetricTensor::max_symmetry_violation() const {
  std::vector<int> perm(order_);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> idx(order_), pidx(order_);
  double worst = 0.0;
  do {
    for (std::size_t lin = 0; lin < entries_.size(); ++lin) {
      std::size_t rest = lin;
      for (int k = order_ - 1; k >= 0; --k) {
        idx[k] = static_cast<int>(rest % dim_);
        rest /= dim_;
      }
      for (int k = 0; k < order_; ++k) pidx[k] = idx[perm[k]];
      std::size_t plin = 0;
      for (int k = 0; k < order_; ++k) plin = plin * dim_ + pidx[k];
      worst = std::max(worst, std::abs(entries_[lin] - entries_[plin]));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return worst;
}

double SymmetricTensor::apply_scalar(const Vec& x) const {
  return contract_impl<double, Vec>(entries_, order_, dim_, repeat(x, order_), 0)[0];
}

Complex SymmetricTensor::apply_scalar(const CVec& z) const {
  return contract_impl<Complex, CVec>(entries_, order_, dim_, repeat(z, order_), 0)[0];
}

Vec SymmetricTensor::apply_vector(const Vec& x) const {
  auto flat = contract_impl<double, Vec>(entries_, order_, dim_, repeat(x, order_ - 1), 1);
  return Eigen::Map<const Vec>(flat.data(), dim_);
}

CVec SymmetricTensor::apply_vector(const CVec& z) const {
  auto flat = contract_impl<Complex, CVec>(entries_, order_, dim_, repeat(z, order_ - 1), 1);
  return Eigen::Map<const CVec>(flat.data(), dim_);
}

Mat SymmetricTensor::apply_matrix(const Vec& x) const {
  auto flat = contract_impl<double, Vec>(entries_, order_, dim_, repeat(x, order_ - 2), 2);
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(flat.data(), dim_, dim_);
}

CMat SymmetricTensor::apply_matrix(const CVec& z) const {
  auto flat = contract_impl<Complex, CVec>(entries_, order_, dim_, repeat(z, order_ - 2), 2);
  return Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(flat.data(), dim_, dim_);
}

std::vector<double> SymmetricTensor::contract(const std::vector<const Vec*>& vs,
                                              int free) const {
  return contract_impl<double, Vec>(entries_, order_, dim_, vs, free);
}

std::vector<Complex> SymmetricTensor::contract(const std::vector<const CVec*>& vs,
                                               int free) const {
  return contract_impl<Complex, CVec>(entries_, order_, dim_, vs, free);
}

MultiDerivative MultiDerivative::from_entries(int out_dim, int in_dim, int arity,
                                              std::vector<double> entries) {
  if (out_dim < 1 || in_dim < 1 || arity < 1)
    throw std::invalid_argument("MultiDerivative: dimensions must be positive");
  const std::size_t expect = static_cast<std::size_t>(out_dim) * pow_size(in_dim, arity);
  if (entries.size() != expect)
    throw DimensionError("MultiDerivative::from_entries", static_cast<long>(expect),
                         static_cast<long>(entries.size()));
  // slot symmetry within tolerance 1e-13
  std::vector<int> perm(arity), idx(arity), pidx(arity);
  std::iota(perm.begin(), perm.end(), 0);
  const std::size_t slot_count = pow_size(in_dim, arity);
  do {
    for (int o = 0; o < out_dim; ++o)
      for (std::size_t lin = 0; lin < slot_count; ++lin) {
        std::size_t rest = lin;
        for (int k = arity - 1; k >= 0; --k) {
          idx[k] = static_cast<int>(rest % in_dim);
          rest /= in_dim;
        }
        for (int k = 0; k < arity; ++k) pidx[k] = idx[perm[k]];
        std::size_t plin = 0;
        for (int k = 0; k < arity; ++k) plin = plin * in_dim + pidx[k];
        if (std::abs(entries[o * slot_count + lin] - entries[o * slot_count + plin]) >
            1e-13)
          throw std::invalid_argument(
              "MultiDerivative: entries not symmetric in the input slots");
      }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return MultiDerivative(out_dim, in_dim, arity, std::move(entries));
}

Vec MultiDerivative::apply(const std::vector<const Vec*>& vs) const {
  if (static_cast<int>(vs.size()) != arity_)
    throw DimensionError("MultiDerivative::apply", arity_,
                         static_cast<long>(vs.size()));
  std::vector<double> buf = entries_;
  for (const Vec* v : vs) {
    if (v->size() != in_dim_)
      throw DimensionError("MultiDerivative::apply", in_dim_,
                           static_cast<long>(v->size()));
    const std::size_t outer = buf.size() / in_dim_;
    std::vector<double> next(outer);
    for (std::size_t i = 0; i < outer; ++i) {
      double sum = 0;
      const double* row = buf.data() + i * in_dim_;
      for (int j = 0; j < in_dim_; ++j) sum += row[j] * (*v)(j);
      next[i] = sum;
    }
    buf = std::move(next);
  }
  return Eigen::Map<const Vec>(buf.data(), out_dim_);
}

Vec MultiDerivative::apply(const Vec& v) const {
  std::vector<const Vec*> vs(static_cast<std::size_t>(arity_), &v);
  return apply(vs);
}

std::vector<double> sym_apply(const SymmetricTensor& T, const Vec& x, int free) {
  if (free < 0 || free > 2)
    throw std::invalid_argument("sym_apply: free must be in {0,1,2}");
  std::vector<const Vec*> vs(static_cast<std::size_t>(T.order() - free), &x);
  return T.contract(vs, free);
}

std::string tensor_to_json(const SymmetricTensor& T) {
  nlohmann::json j;
  j["order"] = T.order();
  j["dim"] = T.dim();
  j["entries"] = T.entries();
  return j.dump();
}

SymmetricTensor tensor_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  return SymmetricTensor::from_entries(j.at("order").get<int>(),
                                       j.at("dim").get<int>(),
                                       j.at("entries").get<std::vector<double>>());
}

SymmetricTensor tensor_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tensor file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return tensor_from_json(ss.str());
}

void tensor_to_json_file(const SymmetricTensor& T, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write tensor file: " + path);
  out << tensor_to_json(T);
}

}  // namespace lagrq
