#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lagrq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Complex = std::complex<double>;

/// Thrown on shape mismatches; carries the expected/actual sizes.
class DimensionError : public std::invalid_argument {
 public:
  DimensionError(const std::string& where, long expected, long actual)
      : std::invalid_argument(where + ": expected length " +
                              std::to_string(expected) + ", got " +
                              std::to_string(actual)),
        expected(expected),
        actual(actual) {}
  long expected;
  long actual;
};

/// Dense order-m symmetric tensor on R^n, stored as a flat row-major n^m
/// array. Entries are invariant under index permutations; construction
/// either checks that (from_entries) or enforces it (symmetrize).
///
/// Contractions reduce trailing modes one at a time: reshape to
/// (n^{m-1} x n), multiply by the vector, repeat. Complex arguments are
/// supported by contracting the real entries with complex arithmetic;
/// there is no complex tensor storage.
class SymmetricTensor {
 public:
  /// Validates the symmetry invariant to tolerance 1e-13.
  static SymmetricTensor from_entries(int order, int dim,
                                      std::vector<double> entries);

  /// Averages the raw array over all order! index permutations.
  static SymmetricTensor symmetrize(int order, int dim,
                                    const std::vector<double>& raw);

  /// I.i.d. standard normal entries, then symmetrized. Deterministic in
  /// the seed.
  static SymmetricTensor random(int order, int dim, std::uint64_t seed);

  int order() const { return order_; }
  int dim() const { return dim_; }
  const std::vector<double>& entries() const { return entries_; }

  /// Largest |T[idx] - T[perm(idx)]| over all entries and permutations.
  double max_symmetry_violation() const;

  /// T(x,...,x): all m slots contracted.
  double apply_scalar(const Vec& x) const;
  Complex apply_scalar(const CVec& z) const;

  /// T(I,x,...,x): one free slot.
  Vec apply_vector(const Vec& x) const;
  CVec apply_vector(const CVec& z) const;

  /// T(I,I,x,...,x): two free slots, returned as a symmetric matrix.
  Mat apply_matrix(const Vec& x) const;
  CMat apply_matrix(const CVec& z) const;

  /// Contracts the given vectors (in order) into the trailing slots and
  /// leaves `free` slots open; the flat result has n^free entries.
  /// Order of the vectors is immaterial for a symmetric tensor.
  std::vector<double> contract(const std::vector<const Vec*>& vs,
                               int free) const;
  std::vector<Complex> contract(const std::vector<const CVec*>& vs,
                                int free) const;

 private:
  SymmetricTensor(int order, int dim, std::vector<double> entries)
      : order_(order), dim_(dim), entries_(std::move(entries)) {}

  int order_;
  int dim_;
  std::vector<double> entries_;
};

/// Dense l-th derivative tensor of a map between vector spaces: an
/// out_dim x in_dim^l array, symmetric in the l input slots. Contracting
/// all slots with vectors yields an output-space vector.
class MultiDerivative {
 public:
  static MultiDerivative from_entries(int out_dim, int in_dim, int arity,
                                      std::vector<double> entries);

  int out_dim() const { return out_dim_; }
  int in_dim() const { return in_dim_; }
  int arity() const { return arity_; }
  const std::vector<double>& entries() const { return entries_; }

  /// Contracts one vector per input slot.
  Vec apply(const std::vector<const Vec*>& vs) const;
  /// Same vector in every slot (the eta^[l] contraction).
  Vec apply(const Vec& v) const;

 private:
  MultiDerivative(int out_dim, int in_dim, int arity, std::vector<double> e)
      : out_dim_(out_dim), in_dim_(in_dim), arity_(arity), entries_(std::move(e)) {}
  int out_dim_;
  int in_dim_;
  int arity_;
  std::vector<double> entries_;
};

/// Contraction with k in {0,1,2} free slots, flattened. Row-major for k=2.
std::vector<double> sym_apply(const SymmetricTensor& T, const Vec& x, int free);

/// JSON round trip: {"order": m, "dim": n, "entries": [...]} (row-major).
std::string tensor_to_json(const SymmetricTensor& T);
SymmetricTensor tensor_from_json(const std::string& text);
SymmetricTensor tensor_from_json_file(const std::string& path);
void tensor_to_json_file(const SymmetricTensor& T, const std::string& path);

}  // namespace lagrq
