#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "lagrq/multilinear.hpp"

namespace lagrq {

class DegenerateRetractionError : public std::runtime_error {
 public:
  explicit DegenerateRetractionError(const std::string& what)
      : std::runtime_error(what) {}
};

/// Map (x, eta) -> point on the constraint set, matching x + eta to the
/// declared order.
struct Retraction {
  std::function<Vec(const Vec& x, const Vec& eta)> apply;
  int order = 1;
};

/// Projection to the unit sphere: (x + eta)/||x + eta||. Second order.
Retraction sphere_retraction();

/// Polar retraction on the Stiefel manifold of n x p orthonormal frames
/// (x stored column-major as a length-np vector). Second order.
Retraction stiefel_polar_retraction(int n, int p);

/// Orthographic retraction for a constraint in solved form: the last
/// `solved.size()` coordinates equal solved[i](free block). Updates the
/// free block by eta's free block and recomputes the dependent ones.
Retraction orthographic_graph_retraction(
    int n_free, std::vector<std::function<double(const Vec&)>> solved);

/// r x Id on M x E_L: retracts the x block, translates the lambda block.
/// Preserves the declared order.
Retraction product_retraction(const Retraction& r, int n_x, int n_lambda);

}  // namespace lagrq
