#pragma once

// Reference implementations used only by the tests. They are written
// independently of the library code they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace oracle {

inline constexpr double kStep = 1e-6;

// Central difference of f with respect to *x.
inline double central_difference(const std::function<double()>& f, double* x, double h = kStep) {
  const double saved = *x;
  *x = saved + h;
  const double up = f();
  *x = saved - h;
  const double down = f();
  *x = saved;
  return (up - down) / (2.0 * h);
}

// max_i |a_i - n_i| / max_i max(|a_i|, |n_i|)
inline double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    err = std::max(err, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return scale > 0.0 ? err / scale : err;
}

inline double gradient_error(const std::vector<double*>& coords, const std::vector<double>& analytic,
                             const std::function<double()>& f) {
  std::vector<double> numeric;
  numeric.reserve(coords.size());
  for (double* c : coords) numeric.push_back(central_difference(f, c));
  return max_relative_error(analytic, numeric);
}

inline Eigen::MatrixXd floyd_warshall(int n, const std::vector<std::pair<int, int>>& edges,
                                      const std::vector<double>& weights) {
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, inf);
  for (int i = 0; i < n; ++i) d(i, i) = 0.0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [u, v] = edges[e];
    d(u, v) = std::min(d(u, v), weights[e]);
    d(v, u) = std::min(d(v, u), weights[e]);
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
  return d;
}

// Largest d(x,y) / (d(x,z) + d(z,y)) over all distinct triples.
inline double triangle_ratio(const Eigen::MatrixXd& d) {
  double worst = 0.0;
  const auto n = d.rows();
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y)
      for (Eigen::Index z = 0; z < n; ++z) {
        if (x == y || y == z || x == z) continue;
        const double den = d(x, z) + d(z, y);
        if (den > 0.0) worst = std::max(worst, d(x, y) / den);
      }
  return worst;
}

// Layer-by-layer evaluation with explicit loops.
inline Eigen::VectorXd mlp_forward(const std::vector<Eigen::MatrixXd>& W, const std::vector<Eigen::VectorXd>& b,
                                   const Eigen::VectorXd& x) {
  std::vector<double> h(x.data(), x.data() + x.size());
  for (std::size_t l = 0; l < W.size(); ++l) {
    std::vector<double> next(static_cast<std::size_t>(W[l].rows()), 0.0);
    for (Eigen::Index r = 0; r < W[l].rows(); ++r) {
      double s = b[l][r];
      for (Eigen::Index c = 0; c < W[l].cols(); ++c) s += W[l](r, c) * h[c];
      next[r] = (l + 1 < W.size()) ? std::max(s, 0.0) : s;
    }
    h = std::move(next);
  }
  return Eigen::Map<Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
}

}  // namespace oracle
