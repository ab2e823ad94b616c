#include "snowflake/quasimetric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "snowflake/common.hpp"

namespace snowflake {

namespace {

// log(1 + t)^beta with the value at t = 0 pinned to 0 (beta = 0 included).
double log_term(double t, double beta) {
  if (t <= 0.0) return 0.0;
  return std::pow(std::log1p(t), beta);
}

double power_term(double t, double alpha) {
  if (t <= 0.0) return 0.0;
  return std::pow(t, alpha);
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

void SnowflakeParams::validate() const {
  require(c1 >= 0.0 && c2 >= 0.0 && c3 >= 0.0, "snowflake coefficients must be non-negative");
  require(c1 > 0.0 || c2 > 0.0 || c3 > 0.0, "snowflake coefficients must not all vanish");
  require(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
  require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1]");
  require(gamma >= 0.0, "gamma must be non-negative");
  require(p >= 0.0, "p must be non-negative");
}

double SnowflakeParams::relaxed_triangle_constant() const { return std::pow(2.0, p); }

double snowflake_base(double t, const SnowflakeParams& params) {
  return params.c1 * (1.0 - std::exp(-params.gamma * t)) + params.c2 * power_term(t, params.alpha) +
         params.c3 * log_term(t, params.beta);
}

double snowflake_of_norm(double t, const SnowflakeParams& params) {
  require(t >= 0.0, "snowflake distance needs a non-negative norm gap");
  const double base = snowflake_base(t, params);
  if (base <= 0.0) return 0.0;
  return std::pow(base, 1.0 + params.p);
}

double snowflake_distance(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y,
                          const SnowflakeParams& params) {
  require(x.size() == y.size(), "snowflake_distance: dimension mismatch");
  params.validate();
  return snowflake_of_norm((x - y).norm(), params);
}

SnowflakeParams SnowflakeActivation::effective() const {
  SnowflakeParams out;
  out.c1 = std::abs(c_raw[0]);
  out.c2 = std::abs(c_raw[1]);
  out.c3 = std::abs(c_raw[2]);
  out.alpha = alpha;
  out.beta = beta;
  out.gamma = gamma;
  out.p = std::abs(p_raw);
  return out;
}

double SnowflakeActivation::value(double t) const { return snowflake_of_norm(t, effective()); }

SnowflakeActivation::Gradient SnowflakeActivation::gradient(double t) const {
  Gradient g;
  if (t <= 0.0) return g;
  const SnowflakeParams e = effective();
  const double bounded = 1.0 - std::exp(-e.gamma * t);
  const double fractal = std::pow(t, e.alpha);
  const double irregular = log_term(t, e.beta);
  const double base = e.c1 * bounded + e.c2 * fractal + e.c3 * irregular;
  if (base <= 0.0) return g;
  const double q = 1.0 + e.p;
  const double outer = q * std::pow(base, e.p);  // d base^q / d base
  const double value = std::pow(base, q);

  g.d_c_raw[0] = outer * bounded * sign_of(c_raw[0]);
  g.d_c_raw[1] = outer * fractal * sign_of(c_raw[1]);
  g.d_c_raw[2] = outer * irregular * sign_of(c_raw[2]);
  g.d_p_raw = value * std::log(base) * sign_of(p_raw);

  const double lp = std::log1p(t);
  double d_base = e.c1 * e.gamma * std::exp(-e.gamma * t) + e.c2 * e.alpha * std::pow(t, e.alpha - 1.0);
  if (e.beta > 0.0) d_base += e.c3 * e.beta * std::pow(lp, e.beta - 1.0) / (1.0 + t);
  g.d_t = outer * d_base;
  return g;
}

void to_json(nlohmann::json& j, const QuasiMetricReport& r) {
  j = nlohmann::json{{"max_triangle_ratio", r.max_triangle_ratio},
                     {"symmetry_defect", r.symmetry_defect},
                     {"identity_defect", r.identity_defect},
                     {"implied_C", r.implied_C}};
}

void from_json(const nlohmann::json& j, QuasiMetricReport& r) {
  j.at("max_triangle_ratio").get_to(r.max_triangle_ratio);
  j.at("symmetry_defect").get_to(r.symmetry_defect);
  j.at("identity_defect").get_to(r.identity_defect);
  j.at("implied_C").get_to(r.implied_C);
}

namespace {

double triangle_ratio(double dxy, double dxz, double dzy) {
  const double denom = dxz + dzy;
  if (denom > 0.0) return dxy / denom;
  return dxy > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

}  // namespace

namespace {

template <class Distinct>
QuasiMetricReport matrix_report(const Eigen::MatrixXd& d, double tolerance, Distinct&& distinct) {
  const Eigen::Index n = d.rows();
  QuasiMetricReport report;
  const double scale = std::max(d.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  for (Eigen::Index i = 0; i < n; ++i) {
    report.identity_defect = std::max(report.identity_defect, std::abs(d(i, i)) / scale);
    for (Eigen::Index j = 0; j < n; ++j) {
      report.symmetry_defect = std::max(report.symmetry_defect, std::abs(d(i, j) - d(j, i)) / scale);
      if (i != j && d(i, j) <= tolerance * scale && distinct(i, j))
        report.identity_defect = std::max(report.identity_defect, 1.0);
    }
  }
  double worst = 0.0;
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) {
      if (y == x) continue;
      for (Eigen::Index z = 0; z < n; ++z) {
        if (z == x || z == y) continue;
        worst = std::max(worst, triangle_ratio(d(x, y), d(x, z), d(z, y)));
      }
    }
  report.max_triangle_ratio = worst;
  report.implied_C = std::max(1.0, worst);
  return report;
}

}  // namespace

QuasiMetricReport check_quasimetric(const Eigen::MatrixXd& d, double tolerance) {
  require(d.rows() == d.cols(), "check_quasimetric: distance matrix must be square");
  return matrix_report(d, tolerance, [](Eigen::Index, Eigen::Index) { return true; });
}

QuasiMetricReport check_quasimetric(const DistanceFn& distance, const Eigen::MatrixXd& points,
                                    double tolerance, std::uint64_t seed) {
  const Eigen::Index n = points.cols();
  require(n >= 3, "check_quasimetric needs at least 3 points");

  if (static_cast<std::size_t>(n) <= kExhaustiveTripleLimit) {
    Eigen::MatrixXd d(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) d(i, j) = distance(points.col(i), points.col(j));
    return matrix_report(d, tolerance, [&](Eigen::Index i, Eigen::Index j) {
      return points.col(i) != points.col(j);
    });
  }

  Rng rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  QuasiMetricReport report;
  double scale = std::numeric_limits<double>::min();
  double worst = 0.0;
  double identity = 0.0;
  double symmetry = 0.0;
  bool coincident = false;
  for (std::size_t s = 0; s < kSampledTriples; ++s) {
    const Eigen::Index x = pick(rng);
    Eigen::Index y = pick(rng);
    Eigen::Index z = pick(rng);
    if (x == y || x == z || y == z) continue;
    const double dxy = distance(points.col(x), points.col(y));
    const double dyx = distance(points.col(y), points.col(x));
    const double dxz = distance(points.col(x), points.col(z));
    const double dzy = distance(points.col(z), points.col(y));
    scale = std::max({scale, dxy, dyx, dxz, dzy});
    symmetry = std::max(symmetry, std::abs(dxy - dyx));
    identity = std::max(identity, std::abs(distance(points.col(x), points.col(x))));
    if (dxy == 0.0 && points.col(x) != points.col(y)) coincident = true;
    worst = std::max(worst, triangle_ratio(dxy, dxz, dzy));
  }
  report.max_triangle_ratio = worst;
  report.implied_C = std::max(1.0, worst);
  report.symmetry_defect = symmetry / scale;
  report.identity_defect = identity / scale;
  if (coincident) report.identity_defect = std::max(report.identity_defect, 1.0);
  return report;
}

GeneratorReport check_metric_generator(const std::function<double(double)>& f,
                                       std::span<const double> grid, double tolerance) {
  require(!grid.empty(), "check_metric_generator: empty grid");
  require(std::is_sorted(grid.begin(), grid.end()), "check_metric_generator: grid must be sorted");
  GeneratorReport report;
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = f(grid[i]);

  report.vanishes_at_zero = grid.front() == 0.0 && std::abs(values.front()) <= tolerance;
  report.strictly_increasing = true;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(values[i] > values[i - 1])) report.strictly_increasing = false;

  double gap = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const double mid = f(0.5 * (grid[i] + grid[j]));
      gap = std::max(gap, 0.5 * (values[i] + values[j]) - mid);
    }
  report.worst_concavity_gap = grid.size() > 1 ? gap : 0.0;
  report.midpoint_concave = report.worst_concavity_gap <= tolerance;
  return report;
}

MonotonicityReport check_complete_monotonicity(const std::function<double(double)>& f,
                                               std::span<const double> grid, int max_order,
                                               double tolerance) {
  require(max_order >= 0 && max_order <= 4, "check_complete_monotonicity: order must be in [0, 4]");
  require(grid.size() > static_cast<std::size_t>(max_order) + 1,
          "check_complete_monotonicity: grid too small for requested order");
  require(grid.front() > 0.0, "check_complete_monotonicity: grid must lie inside (0, inf)");
  const double h = grid[1] - grid[0];
  require(h > 0.0, "check_complete_monotonicity: grid must be increasing");
  for (std::size_t i = 2; i < grid.size(); ++i)
    require(std::abs((grid[i] - grid[i - 1]) - h) <= 1e-9 * std::max(1.0, std::abs(grid[i])),
            "check_complete_monotonicity: grid spacing must be uniform");

  std::vector<double> diff(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) diff[i] = f(grid[i]);

  MonotonicityReport report;
  report.worst_value = std::numeric_limits<double>::infinity();
  double sign = 1.0;
  double hn = 1.0;
  for (int order = 0; order <= max_order; ++order) {
    if (order > 0) {
      for (std::size_t i = 0; i + 1 < diff.size(); ++i) diff[i] = diff[i + 1] - diff[i];
      diff.pop_back();
      sign = -sign;
      hn *= h;
    }
    for (double v : diff) {
      const double scaled = sign * v / hn;
      if (scaled < report.worst_value) {
        report.worst_value = scaled;
        report.worst_order = order;
      }
    }
  }
  report.passed = report.worst_value >= -tolerance;
  return report;
}

}  // namespace snowflake
