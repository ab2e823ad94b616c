#include "snowflake/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include "snowflake/common.hpp"
#include "snowflake/snowflake_net.hpp"

namespace snowflake {

double critical_exponent(int num_nodes, bool is_tree) {
  require(num_nodes >= 2, "critical_exponent needs at least 2 nodes");
  if (is_tree) return 0.5;
  return std::log2(1.0 + 1.0 / (num_nodes - 1)) / 2.0;
}

EmbedOutcome schoenberg_embed(const DistanceMatrix& d, double epsilon) {
  require(epsilon > 0.0 && epsilon <= 1.0, "schoenberg_embed: epsilon must lie in (0, 1]");
  const int n = d.size();
  require(n >= 1, "schoenberg_embed: empty matrix");
  const double scale = std::max(d.values.cwiseAbs().maxCoeff(), 1.0);
  d.validate(1e-12 * scale);

  const Eigen::MatrixXd snow = d.values.array().pow(epsilon).matrix();
  const Eigen::MatrixXd sq = snow.array().square().matrix();
  const Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  const Eigen::MatrixXd gram = -0.5 * J * sq * J;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (gram + gram.transpose()));
  const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
  const double lmin = lambda(0);
  const double lmax = lambda(n - 1);
  if (lmax > 0.0 && lmin < -kPsdTolerance * lmax) return Infeasible{lmin, lmax};

  EmbeddingResult out;
  out.epsilon = epsilon;
  out.min_eigenvalue = lmin;
  out.max_eigenvalue = lmax;
  std::vector<int> kept;
  for (int k = n - 1; k >= 0; --k)
    if (lmax > 0.0 && lambda(k) > kRankTolerance * lmax) kept.push_back(k);
  if (kept.empty()) {
    out.coords = Eigen::MatrixXd::Zero(1, n);
  } else {
    out.coords.resize(static_cast<Eigen::Index>(kept.size()), n);
    for (std::size_t r = 0; r < kept.size(); ++r)
      out.coords.row(static_cast<Eigen::Index>(r)) =
          std::sqrt(lambda(kept[r])) * eig.eigenvectors().col(kept[r]).transpose();
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double target = snow(i, j);
      if (target <= 0.0) continue;
      const double got = (out.coords.col(i) - out.coords.col(j)).norm();
      out.residual = std::max(out.residual, std::abs(got - target) / target);
    }
  return out;
}

void to_json(nlohmann::json& j, const EmbeddingResult& r) {
  nlohmann::json coords = nlohmann::json::array();
  for (Eigen::Index c = 0; c < r.coords.cols(); ++c) {
    std::vector<double> p(r.coords.rows());
    for (Eigen::Index k = 0; k < r.coords.rows(); ++k) p[k] = r.coords(k, c);
    coords.push_back(p);
  }
  j = nlohmann::json{{"coords", coords},
                     {"epsilon", r.epsilon},
                     {"min_eigenvalue", r.min_eigenvalue},
                     {"max_eigenvalue", r.max_eigenvalue},
                     {"residual", r.residual},
                     {"dimension", r.dimension()}};
}

double ExponentialSum::operator()(double t) const {
  double y = 0.0;
  for (std::size_t i = 0; i < alphas.size(); ++i) y += betas[i] * -std::expm1(-alphas[i] * t);
  return y;
}

namespace {

constexpr double kLogAlphaMin = -30.0;
constexpr double kLogAlphaMax = 30.0;

double clamp_log_alpha(double v) { return std::clamp(v, kLogAlphaMin, kLogAlphaMax); }

// Residual rows Ȳ(t_k) − y_k in unknowns θ = (log α_1..M, β_1..M); padded with
// zero rows so MINPACK sees at least as many rows as unknowns.
struct ExpSumResidual {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  std::span<const double> ts, ys;
  int terms;

  int inputs() const { return 2 * terms; }
  int values() const { return std::max<int>(static_cast<int>(ts.size()), 2 * terms); }

  int operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& fvec) const {
    fvec.setZero(values());
    for (std::size_t k = 0; k < ts.size(); ++k) {
      double y = 0.0;
      for (int i = 0; i < terms; ++i)
        y += theta(terms + i) * -std::expm1(-std::exp(clamp_log_alpha(theta(i))) * ts[k]);
      fvec(static_cast<Eigen::Index>(k)) = y - ys[k];
    }
    return 0;
  }

  int df(const Eigen::VectorXd& theta, Eigen::MatrixXd& jac) const {
    jac.setZero(values(), inputs());
    for (std::size_t k = 0; k < ts.size(); ++k)
      for (int i = 0; i < terms; ++i) {
        const double raw = theta(i);
        const double alpha = std::exp(clamp_log_alpha(raw));
        const double decay = std::exp(-alpha * ts[k]);
        const bool inside = raw > kLogAlphaMin && raw < kLogAlphaMax;
        jac(static_cast<Eigen::Index>(k), i) = inside ? theta(terms + i) * alpha * ts[k] * decay : 0.0;
        jac(static_cast<Eigen::Index>(k), terms + i) = -std::expm1(-alpha * ts[k]);
      }
    return 0;
  }
};

// Least-squares β for fixed α.
std::vector<double> solve_betas(std::span<const double> ts, std::span<const double> ys,
                                const std::vector<double>& alphas) {
  const Eigen::Index m = static_cast<Eigen::Index>(ts.size());
  const Eigen::Index k = static_cast<Eigen::Index>(alphas.size());
  Eigen::MatrixXd basis(m, k);
  Eigen::VectorXd rhs(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    rhs(r) = ys[r];
    for (Eigen::Index c = 0; c < k; ++c) basis(r, c) = -std::expm1(-alphas[c] * ts[r]);
  }
  const Eigen::VectorXd beta = basis.completeOrthogonalDecomposition().solve(rhs);
  return {beta.data(), beta.data() + k};
}

double max_abs_residual(const ExponentialSum& s, std::span<const double> ts, std::span<const double> ys) {
  double worst = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) worst = std::max(worst, std::abs(s(ts[k]) - ys[k]));
  return worst;
}

ExponentialSum refine(std::span<const double> ts, std::span<const double> ys, ExponentialSum start) {
  const int m = static_cast<int>(start.terms());
  Eigen::VectorXd theta(2 * m);
  for (int i = 0; i < m; ++i) {
    theta(i) = std::log(start.alphas[i]);
    theta(m + i) = start.betas[i];
  }
  ExpSumResidual functor{ts, ys, m};
  Eigen::LevenbergMarquardt<ExpSumResidual> lm(functor);
  lm.parameters.ftol = 1e-15;
  lm.parameters.xtol = 1e-15;
  lm.parameters.maxfev = 2000;
  lm.minimize(theta);
  ExponentialSum out;
  for (int i = 0; i < m; ++i) {
    out.alphas.push_back(std::exp(clamp_log_alpha(theta(i))));
    out.betas.push_back(theta(m + i));
  }
  out.residual = max_abs_residual(out, ts, ys);
  if (!std::isfinite(out.residual)) return start;
  return out;
}

ExponentialSum seeded(std::span<const double> ts, std::span<const double> ys, std::vector<double> alphas) {
  ExponentialSum s;
  s.betas = solve_betas(ts, ys, alphas);
  s.alphas = std::move(alphas);
  s.residual = max_abs_residual(s, ts, ys);
  return s;
}

std::vector<double> log_grid() {
  std::vector<double> grid;
  for (int e = -6; e <= 6; ++e) grid.push_back(std::pow(10.0, e / 2.0));  // 1e-3 .. 1e3
  return grid;
}

ExponentialSum fit_recursive(std::span<const double> ts, std::span<const double> ys, int terms) {
  const auto grid = log_grid();
  std::vector<ExponentialSum> candidates;
  if (terms == 1) {
    for (double a : grid) {
      ExponentialSum start = seeded(ts, ys, {a});
      candidates.push_back(start);
      candidates.push_back(refine(ts, ys, start));
    }
  } else {
    const ExponentialSum prev = fit_recursive(ts, ys, terms - 1);
    ExponentialSum padded = prev;
    padded.alphas.push_back(1.0);
    padded.betas.push_back(0.0);
    candidates.push_back(padded);  // same residual as prev
    for (double a : grid) {
      std::vector<double> alphas = prev.alphas;
      alphas.push_back(a);
      ExponentialSum start = seeded(ts, ys, alphas);
      candidates.push_back(start);
      candidates.push_back(refine(ts, ys, start));
    }
    // Evenly spread start across the grid.
    std::vector<double> spread;
    for (int i = 0; i < terms; ++i)
      spread.push_back(std::pow(10.0, -3.0 + 6.0 * (i + 0.5) / terms));
    candidates.push_back(refine(ts, ys, seeded(ts, ys, spread)));
  }
  return *std::min_element(candidates.begin(), candidates.end(),
                           [](const auto& a, const auto& b) { return a.residual < b.residual; });
}

}  // namespace

ExponentialSum fit_exponential_sum(std::span<const double> ts, std::span<const double> ys, int terms) {
  require(ts.size() == ys.size(), "fit_exponential_sum: ts and ys must have equal length");
  require(ts.size() >= 2, "fit_exponential_sum: need at least 2 points");
  require(terms >= 1, "fit_exponential_sum: need at least one term");
  for (std::size_t k = 0; k < ts.size(); ++k) {
    require(ts[k] >= 0.0, "fit_exponential_sum: sample points must be non-negative");
    if (k > 0) require(ts[k] > ts[k - 1], "fit_exponential_sum: sample points must be sorted and distinct");
  }
  return fit_recursive(ts, ys, terms);
}

UniversalityReport verify_snowflake_universality(const WeightedGraph& graph) {
  const int n = graph.num_nodes();
  require(n >= 2 && n <= 64, "verify_snowflake_universality: graph must have 2..64 nodes");
  const DistanceMatrix geo = geodesic_distances(graph);

  UniversalityReport report;
  report.num_nodes = n;
  report.epsilon = critical_exponent(n);
  report.relaxed_triangle_constant = std::pow(2.0, 1.0 / report.epsilon - 1.0);

  const EmbedOutcome outcome = schoenberg_embed(geo, report.epsilon);
  if (const auto* bad = std::get_if<Infeasible>(&outcome)) {
    report.min_eigenvalue = bad->min_eigenvalue;
    report.max_eigenvalue = bad->max_eigenvalue;
    report.distortion = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    return report;
  }
  const auto& emb = std::get<EmbeddingResult>(outcome);
  report.feasible = true;
  report.min_eigenvalue = emb.min_eigenvalue;
  report.max_eigenvalue = emb.max_eigenvalue;
  report.embedding_residual = emb.residual;
  report.embedding_dimension = emb.dimension();

  const NeuralSnowflake power = NeuralSnowflake::power(1.0 / report.epsilon - 1.0);
  DistanceMatrix rebuilt{Eigen::MatrixXd::Zero(n, n)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) rebuilt.values(i, j) = snowflake_metric(power, emb.coords.col(i), emb.coords.col(j));
  report.distortion = distortion(rebuilt, geo);
  return report;
}

void to_json(nlohmann::json& j, const UniversalityReport& r) {
  j = nlohmann::json{{"num_nodes", r.num_nodes},
                     {"epsilon", r.epsilon},
                     {"feasible", r.feasible},
                     {"min_eigenvalue", r.min_eigenvalue},
                     {"max_eigenvalue", r.max_eigenvalue},
                     {"embedding_residual", r.embedding_residual},
                     {"embedding_dimension", r.embedding_dimension},
                     {"distortion_s", r.distortion.s},
                     {"distortion_L", r.distortion.L},
                     {"relaxed_triangle_constant", r.relaxed_triangle_constant}};
}

}  // namespace snowflake
