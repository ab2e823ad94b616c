#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>

#include <Eigen/Core>

#include "json.hpp"

namespace snowflake {

/// Parameters of the closed-form snowflake activation distance
///
///   d(x, y) = (c1 (1 - exp(-gamma t)) + c2 t^alpha + c3 log(1 + t)^beta)^(1 + p),
///   t = ||x - y||.
///
/// The three terms are the bounded, fractal and irregular-fractal parts.
struct SnowflakeParams {
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double p = 0.0;

  /// Throws InvalidArgument when a field is out of its admissible range.
  void validate() const;

  /// Relaxed triangle constant 2^p of the (1+p)-th power; 1 when p = 0.
  double relaxed_triangle_constant() const;
};

/// Base value before the outer power: c1 (1 - e^{-gamma t}) + c2 t^alpha + c3 log(1+t)^beta.
double snowflake_base(double t, const SnowflakeParams& params);

/// Snowflake distance as a function of the norm gap t >= 0.
double snowflake_of_norm(double t, const SnowflakeParams& params);

double snowflake_distance(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y,
                          const SnowflakeParams& params);

/// Trainable form of the snowflake activation used inside the latent-graph
/// edge model. Coefficients are stored raw and enter through |c|; the
/// exponent is 1 + |p_raw|. alpha, beta and gamma stay fixed.
struct SnowflakeActivation {
  std::array<double, 3> c_raw{1.0, 1.0, 1.0};
  double p_raw = 1e-8;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;

  SnowflakeParams effective() const;
  double value(double t) const;

  struct Gradient {
    std::array<double, 3> d_c_raw{};
    double d_p_raw = 0.0;
    double d_t = 0.0;
  };
  /// Gradient of value(t); zero subgradient convention at t = 0.
  Gradient gradient(double t) const;
};

using DistanceFn = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&,
                                        const Eigen::Ref<const Eigen::VectorXd>&)>;

struct QuasiMetricReport {
  double max_triangle_ratio = 0.0;
  double symmetry_defect = 0.0;
  double identity_defect = 0.0;
  double implied_C = 1.0;
};

void to_json(nlohmann::json& j, const QuasiMetricReport& r);
void from_json(const nlohmann::json& j, QuasiMetricReport& r);

/// Largest triple count checked exhaustively; above it triples are sampled.
inline constexpr std::size_t kExhaustiveTripleLimit = 64;
inline constexpr std::size_t kSampledTriples = 100000;

/// Empirical quasi-metric axioms over the columns of `points`.
///
/// Defects are relative to the largest sampled distance. identity_defect is
/// max d(x,x) / scale, raised to 1 if two distinct points sit within
/// tolerance * scale of each other.
/// implied_C = max(1, max_triangle_ratio); the ratio is taken over distinct
/// triples, all of them when n <= 64, otherwise 1e5 sampled with `seed`.
QuasiMetricReport check_quasimetric(const DistanceFn& distance, const Eigen::MatrixXd& points,
                                    double tolerance, std::uint64_t seed = 0);

/// Same as check_quasimetric over a precomputed distance matrix (all triples).
QuasiMetricReport check_quasimetric(const Eigen::MatrixXd& distances, double tolerance);

struct GeneratorReport {
  bool vanishes_at_zero = false;
  bool strictly_increasing = false;
  bool midpoint_concave = false;
  double worst_concavity_gap = 0.0;  // max over pairs of (f(s)+f(t))/2 - f((s+t)/2)
  bool passed() const { return vanishes_at_zero && strictly_increasing && midpoint_concave; }
};

/// Sufficient conditions for f(d) to be a metric whenever d is one:
/// f(0) = 0, strictly increasing on the grid, midpoint concave on every grid pair.
GeneratorReport check_metric_generator(const std::function<double(double)>& f,
                                       std::span<const double> grid, double tolerance);

struct MonotonicityReport {
  bool passed = false;
  int worst_order = 0;
  double worst_value = 0.0;  // most negative (-1)^n Δ^n f / h^n seen
};

/// Sign alternation (-1)^n f^(n) >= -tolerance for n = 0..max_order, with
/// derivatives approximated by forward differences on a uniform grid.
MonotonicityReport check_complete_monotonicity(const std::function<double(double)>& f,
                                               std::span<const double> grid, int max_order,
                                               double tolerance);

}  // namespace snowflake
