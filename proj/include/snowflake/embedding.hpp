#pragma once

#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "snowflake/graphs.hpp"

namespace snowflake {

/// log2(1 + 1/(n - 1)) / 2, the snowflake exponent at which any n-point metric
/// becomes Euclidean; 1/2 for trees.
double critical_exponent(int num_nodes, bool is_tree = false);

struct EmbeddingResult {
  Eigen::MatrixXd coords;  // one point per column; rows = embedding dimension
  double epsilon = 1.0;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double residual = 0.0;  // max |‖φ_u − φ_v‖ − d^ε| / d^ε over pairs with d > 0
  int dimension() const { return static_cast<int>(coords.rows()); }
};

struct Infeasible {
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
};

using EmbedOutcome = std::variant<EmbeddingResult, Infeasible>;

/// Relative thresholds on the centered Gram spectrum.
inline constexpr double kPsdTolerance = 1e-8;     // accept λ_min >= -tol λ_max
inline constexpr double kRankTolerance = 1e-10;   // keep λ > tol λ_max

/// Classical multidimensional scaling of d^ε: G = -1/2 J (d^{2ε}) J; coordinates
/// from the non-negligible eigenpairs when G is positive semidefinite.
EmbedOutcome schoenberg_embed(const DistanceMatrix& d, double epsilon);

void to_json(nlohmann::json& j, const EmbeddingResult& r);

/// Ȳ(t) = Σ β_i (1 − exp(−α_i t)); Ȳ(0) = 0 for any parameters.
struct ExponentialSum {
  std::vector<double> alphas;
  std::vector<double> betas;
  double residual = 0.0;  // max |Ȳ(t_k) − y_k| over the fitted samples

  std::size_t terms() const { return alphas.size(); }
  double operator()(double t) const;
};

/// Separable least squares: β by linear solve for fixed α, α refined by
/// Levenberg–Marquardt on log α from multiple starts on a log grid over
/// [1e-3, 1e3]. Fits with M terms are warm-started from the M−1 solution so the
/// reported residual never increases with M.
ExponentialSum fit_exponential_sum(std::span<const double> ts, std::span<const double> ys, int terms);

struct UniversalityReport {
  int num_nodes = 0;
  double epsilon = 0.0;
  bool feasible = false;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double embedding_residual = 0.0;
  int embedding_dimension = 0;
  Distortion distortion;               // of f(‖φ_u − φ_v‖) against d_G
  double relaxed_triangle_constant = 0.0;  // 2^{1/ε − 1}
  bool exact(double tolerance) const { return feasible && distortion.is_isometry(tolerance); }
};

/// Embeds the ε*-snowflake of the graph's geodesic metric, then composes with
/// the neural snowflake power map f(t) = t^{1/ε} and measures distortion
/// against the geodesic metric. Requires a connected graph with at most 64 nodes.
UniversalityReport verify_snowflake_universality(const WeightedGraph& graph);

void to_json(nlohmann::json& j, const UniversalityReport& r);

}  // namespace snowflake
