#include <cmath>
#include <variant>

#include "doctest.h"
#include "snowflake/common.hpp"
#include "snowflake/embedding.hpp"
#include "snowflake/graphs.hpp"

using namespace snowflake;

namespace {

// Brute-force check of an embedding against d^eps.
double embedding_error(const EmbeddingResult& r, const DistanceMatrix& d) {
  double worst = 0.0;
  for (int i = 0; i < d.size(); ++i)
    for (int j = i + 1; j < d.size(); ++j) {
      const double target = std::pow(d(i, j), r.epsilon);
      worst = std::max(worst, std::abs((r.coords.col(i) - r.coords.col(j)).norm() - target) / target);
    }
  return worst;
}

}  // namespace

TEST_CASE("critical exponent") {
  CHECK(critical_exponent(2) == 0.5);
  CHECK(critical_exponent(3) == doctest::Approx(0.2924813).epsilon(1e-7));
  CHECK(critical_exponent(17, true) == 0.5);
  CHECK_THROWS_AS(critical_exponent(1), InvalidArgument);
}

TEST_CASE("two points always embed") {
  DistanceMatrix d{Eigen::MatrixXd(2, 2)};
  d.values << 0, 3, 3, 0;
  for (double eps : {0.1, 0.5, 1.0}) {
    const auto out = schoenberg_embed(d, eps);
    REQUIRE(std::holds_alternative<EmbeddingResult>(out));
    const auto& r = std::get<EmbeddingResult>(out);
    CHECK(r.dimension() == 1);
    CHECK(r.residual <= 1e-12);
    CHECK(embedding_error(r, d) <= 1e-12);
  }
}

TEST_CASE("four-cycle: feasible when snowflaked, infeasible at epsilon 1") {
  const DistanceMatrix d = geodesic_distances(cycle_graph(4));
  const auto ok = schoenberg_embed(d, critical_exponent(4));
  REQUIRE(std::holds_alternative<EmbeddingResult>(ok));
  CHECK(std::get<EmbeddingResult>(ok).residual <= 1e-8);
  CHECK(embedding_error(std::get<EmbeddingResult>(ok), d) <= 1e-8);

  const auto bad = schoenberg_embed(d, 1.0);
  REQUIRE(std::holds_alternative<Infeasible>(bad));
  const auto& inf = std::get<Infeasible>(bad);
  CHECK(inf.min_eigenvalue < -kPsdTolerance * inf.max_eigenvalue);
}

TEST_CASE("schoenberg_embed rejects invalid matrices") {
  DistanceMatrix d{Eigen::MatrixXd(2, 2)};
  d.values << 0, 1, 2, 0;
  CHECK_THROWS_AS(schoenberg_embed(d, 0.5), InvalidArgument);
  d.values << 0, -1, -1, 0;
  CHECK_THROWS_AS(schoenberg_embed(d, 0.5), InvalidArgument);
}

TEST_CASE("universality on small graphs") {
  WeightedGraph two;
  two.coords = Eigen::MatrixXd::Zero(1, 2);
  two.edges = {{0, 1}};
  two.weights = {2.5};
  const UniversalityReport r2 = verify_snowflake_universality(two);
  CHECK(r2.exact(1e-6));
  CHECK(r2.relaxed_triangle_constant == doctest::Approx(2.0).epsilon(1e-12));

  CHECK(verify_snowflake_universality(cycle_graph(4)).exact(1e-6));
  const UniversalityReport five = verify_snowflake_universality(five_node_obstruction_graph());
  CHECK(five.exact(1e-6));
  CHECK(five.embedding_dimension <= 4);

  for (std::uint64_t s = 0; s < 100; ++s) {
    const WeightedGraph g = random_connected_graph(3 + static_cast<int>(s % 6), 1000 + s);
    const UniversalityReport r = verify_snowflake_universality(g);
    CHECK(r.feasible);
    CHECK(r.embedding_residual <= 1e-6);
    CHECK(r.exact(1e-6));
  }
}

TEST_CASE("exponential sum fitting") {
  const std::vector<double> ts{0.0, 1.0, 3.0};
  std::vector<double> ys;
  for (double t : ts) ys.push_back(2.0 * (1.0 - std::exp(-0.5 * t)));
  const ExponentialSum one = fit_exponential_sum(ts, ys, 1);
  REQUIRE(one.terms() == 1);
  CHECK(one.betas[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(one.alphas[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(one(0.0) == 0.0);

  const std::vector<double> zeros(3, 0.0);
  const ExponentialSum z = fit_exponential_sum(ts, zeros, 2);
  for (double b : z.betas) CHECK(b == 0.0);
  CHECK(z.residual == 0.0);

  const std::vector<double> t4{0.0, 4.0 / 3.0, 8.0 / 3.0, 4.0};
  std::vector<double> y4;
  for (double t : t4) y4.push_back(synthetic_target(MetricId::M3, t));
  CHECK(fit_exponential_sum(t4, y4, 2).residual <= 1e-6);

  std::vector<double> tg, yg;
  for (int i = 0; i <= 12; ++i) {
    tg.push_back(0.5 * i);
    yg.push_back(synthetic_target(MetricId::M5, 0.5 * i));
  }
  double prev = INFINITY;
  for (int m = 1; m <= 4; ++m) {
    const double r = fit_exponential_sum(tg, yg, m).residual;
    CHECK(r <= prev);
    prev = r;
  }
  CHECK_THROWS_AS(fit_exponential_sum(std::vector<double>{1.0}, std::vector<double>{1.0}, 1), InvalidArgument);
  CHECK_THROWS_AS(fit_exponential_sum(ts, ys, 0), InvalidArgument);
}
