#include "lagrq/retraction.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace lagrq {

Retraction sphere_retraction() {
  Retraction r;
  r.order = 2;
  r.apply = [](const Vec& x, const Vec& eta) -> Vec {
    Vec w = x + eta;
    const double nw = w.norm();
    if (nw < 1e-14)
      throw DegenerateRetractionError("sphere retraction: x + eta vanishes");
    return w / nw;
  };
  return r;
}

Retraction stiefel_polar_retraction(int n, int p) {
  Retraction r;
  r.order = 2;
  r.apply = [n, p](const Vec& x, const Vec& eta) -> Vec {
    Mat W = Eigen::Map<const Mat>(x.data(), n, p) +
            Eigen::Map<const Mat>(eta.data(), n, p);
    Eigen::JacobiSVD<Mat> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.singularValues().minCoeff() < 1e-12)
      throw DegenerateRetractionError("polar retraction: rank-deficient x + eta");
    Mat out = svd.matrixU() * svd.matrixV().transpose();
    return Eigen::Map<const Vec>(out.data(), n * p);
  };
  return r;
}

Retraction orthographic_graph_retraction(
    int n_free, std::vector<std::function<double(const Vec&)>> solved) {
  Retraction r;
  r.order = 2;
  const int k = static_cast<int>(solved.size());
  r.apply = [n_free, k, solved = std::move(solved)](const Vec& x,
                                                    const Vec& eta) -> Vec {
    Vec out(n_free + k);
    out.head(n_free) = x.head(n_free) + eta.head(n_free);
    const Vec free = out.head(n_free);
    for (int i = 0; i < k; ++i) out(n_free + i) = solved[i](free);
    return out;
  };
  return r;
}

Retraction product_retraction(const Retraction& r, int n_x, int n_lambda) {
  Retraction out;
  out.order = r.order;
  out.apply = [r, n_x, n_lambda](const Vec& x, const Vec& eta) -> Vec {
    Vec res(n_x + n_lambda);
    res.head(n_x) = r.apply(x.head(n_x), eta.head(n_x));
    res.tail(n_lambda) = x.tail(n_lambda) + eta.tail(n_lambda);
    return res;
  };
  return out;
}

}  // namespace lagrq
