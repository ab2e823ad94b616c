#include "snowflake/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "snowflake/common.hpp"
#include "snowflake/embedding.hpp"
#include "snowflake/graphs.hpp"
#include "snowflake/latent_graph.hpp"
#include "snowflake/mlp.hpp"
#include "snowflake/quasimetric.hpp"
#include "snowflake/snowflake_net.hpp"
#include "snowflake/trainer.hpp"

namespace snowflake {

namespace {

constexpr int kInstances = 100;
constexpr int kPoints = 30;
constexpr int kGradientInstances = 50;
constexpr double kStep = 1e-6;
constexpr double kGradientTolerance = 1e-5;

CheckResult at_most(std::string name, double value, double bound, std::string detail = {}) {
  return CheckResult{std::move(name), value <= bound, value, bound, std::move(detail)};
}

NeuralSnowflake random_snowflake(Rng& rng, double p, double skip) {
  std::uniform_int_distribution<int> depth(1, 3), width(1, 12);
  std::uniform_real_distribution<double> scale(0.5, 20.0);
  std::bernoulli_distribution flip(0.3);
  std::vector<int> chain{1};
  const int layers = depth(rng);
  for (int l = 1; l < layers; ++l) chain.push_back(width(rng));
  chain.push_back(1);
  NeuralSnowflake net = NeuralSnowflake::init(chain, rng());
  for (auto s : net.weight_spans())
    for (double& w : s) w *= scale(rng) * (flip(rng) ? -1.0 : 1.0);
  net.set_p(p);
  net.set_skip_weight(skip);
  return net;
}

SnowflakeActivation random_activation(Rng& rng, double p) {
  std::uniform_real_distribution<double> c(-3.0, 3.0), unit(0.05, 1.0), g(0.0, 4.0);
  SnowflakeActivation a;
  a.c_raw = {c(rng), c(rng), c(rng)};
  a.p_raw = p;
  a.alpha = unit(rng);
  a.beta = unit(rng);
  a.gamma = g(rng);
  return a;
}

Eigen::MatrixXd random_points(Rng& rng) {
  std::normal_distribution<double> normal;
  return Eigen::MatrixXd::NullaryExpr(4, kPoints, [&] { return normal(rng); });
}

SuiteReport metric_axioms(std::uint64_t seed) {
  SuiteReport r{"metric-axioms", {}};
  Rng rng(derive_seed(seed, 11));

  struct Case {
    std::string name;
    double p;
    double bound;
  };
  const std::vector<Case> cases{{"p0", 0.0, 1.0 + 1e-9}, {"p1", 1.0, 2.0 + 1e-9}};
  for (const Case& c : cases) {
    for (double skip : {0.0, 0.5}) {
      double worst = 0.0, sym = 0.0, ident = 0.0;
      for (int k = 0; k < kInstances; ++k) {
        const NeuralSnowflake net = random_snowflake(rng, c.p, skip);
        const Eigen::MatrixXd pts = random_points(rng);
        const auto rep = check_quasimetric(
            [&](const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
              return snowflake_metric(net, x, y);
            },
            pts, 1e-12, rng());
        worst = std::max(worst, rep.implied_C);
        sym = std::max(sym, rep.symmetry_defect);
        ident = std::max(ident, rep.identity_defect);
      }
      std::ostringstream tag;
      tag << "neural_snowflake_" << c.name << "_skip" << skip;
      r.checks.push_back(at_most(tag.str() + "_implied_C", worst, c.bound));
      r.checks.push_back(at_most(tag.str() + "_symmetry_defect", sym, 0.0));
      r.checks.push_back(at_most(tag.str() + "_identity_defect", ident, 0.0));
    }
    double worst = 0.0;
    for (int k = 0; k < kInstances; ++k) {
      const SnowflakeActivation act = random_activation(rng, c.p);
      const SnowflakeParams params = act.effective();
      const auto rep = check_quasimetric(
          [&](const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
            return snowflake_distance(x, y, params);
          },
          random_points(rng), 1e-12, rng());
      worst = std::max(worst, rep.implied_C);
    }
    r.checks.push_back(at_most("snowflake_activation_" + c.name + "_implied_C", worst, c.bound));
  }
  return r;
}

SuiteReport universality(std::uint64_t seed) {
  SuiteReport r{"thm1-universality", {}};
  constexpr double tol = 1e-6;
  Rng rng(derive_seed(seed, 12));
  std::uniform_int_distribution<int> size(3, 8);
  int feasible = 0, exact = 0;
  double worst = 0.0;
  std::vector<WeightedGraph> graphs;
  for (int k = 0; k < kInstances; ++k) graphs.push_back(random_connected_graph(size(rng), rng()));
  graphs.push_back(five_node_obstruction_graph());
  for (const WeightedGraph& g : graphs) {
    const UniversalityReport u = verify_snowflake_universality(g);
    if (u.feasible) ++feasible;
    if (u.exact(tol)) ++exact;
    worst = std::max({worst, std::abs(u.distortion.s - 1.0), std::abs(u.distortion.L - 1.0)});
  }
  const auto total = static_cast<double>(graphs.size());
  r.checks.push_back(CheckResult{"feasible_at_critical_exponent", feasible == static_cast<int>(graphs.size()),
                                 static_cast<double>(feasible), total, "graphs with a PSD centered Gram"});
  r.checks.push_back(CheckResult{"distortion_is_isometry", exact == static_cast<int>(graphs.size()),
                                 static_cast<double>(exact), total, "graphs with (s, L) = (1, 1)"});
  r.checks.push_back(at_most("max_distortion_deviation", worst, tol));

  const UniversalityReport five = verify_snowflake_universality(five_node_obstruction_graph());
  r.checks.push_back(CheckResult{"five_node_graph_exact", five.exact(tol), five.distortion.L, 1.0, ""});

  const EmbedOutcome cycle = schoenberg_embed(geodesic_distances(cycle_graph(4)), 1.0);
  const auto* bad = std::get_if<Infeasible>(&cycle);
  const double ratio = bad ? bad->min_eigenvalue / bad->max_eigenvalue : 0.0;
  r.checks.push_back(CheckResult{"four_cycle_infeasible_at_epsilon_1", bad != nullptr && ratio < -kPsdTolerance,
                                 ratio, -kPsdTolerance, "min / max eigenvalue of the centered Gram"});
  return r;
}

// Normwise relative error max|a - n| / max(|a|, |n|) between analytic and
// central-difference gradients of f over the given coordinates.
double fd_error(const std::vector<double*>& coords, const std::vector<double>& analytic,
                const std::function<double()>& f) {
  require(coords.size() == analytic.size(), "gradient size mismatch");
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double saved = *coords[i];
    *coords[i] = saved + kStep;
    const double up = f();
    *coords[i] = saved - kStep;
    const double down = f();
    *coords[i] = saved;
    const double numeric = (up - down) / (2.0 * kStep);
    err = std::max(err, std::abs(numeric - analytic[i]));
    scale = std::max({scale, std::abs(numeric), std::abs(analytic[i])});
  }
  return scale > 0.0 ? err / scale : err;
}

void collect(std::vector<double*>& coords, std::vector<std::span<double>> spans) {
  for (auto s : spans)
    for (double& v : s) coords.push_back(&v);
}

void collect(std::vector<double>& values, const std::vector<std::span<const double>>& spans) {
  for (auto s : spans) values.insert(values.end(), s.begin(), s.end());
}

double snowflake_gradient_error(Rng& rng) {
  std::uniform_real_distribution<double> pd(0.05, 1.0), sd(0.1, 0.9), td(0.1, 3.0);
  NeuralSnowflake net = random_snowflake(rng, pd(rng), sd(rng));
  for (auto s : net.weight_spans())
    for (double& w : s) w = std::abs(w) + 0.01;
  double p = net.p(), skip = net.skip_weight(), t = td(rng);
  const SnowflakeGradients g = net.backward(t);

  std::vector<double*> coords;
  std::vector<double> analytic;
  collect(coords, net.weight_spans());
  collect(analytic, NeuralSnowflake::weight_spans(g));
  coords.insert(coords.end(), {&p, &skip, &t});
  analytic.insert(analytic.end(), {g.d_p, g.d_skip, g.d_input});
  return fd_error(coords, analytic, [&] {
    net.set_p(p);
    net.set_skip_weight(skip);
    return net.forward(t);
  });
}

double mlp_gradient_error(Rng& rng) {
  std::uniform_int_distribution<int> width(1, 8), depth(1, 4);
  std::normal_distribution<double> normal;
  std::vector<int> sizes{width(rng)};
  const int layers = depth(rng);
  for (int l = 0; l < layers; ++l) sizes.push_back(width(rng));
  Mlp net = Mlp::init(sizes, rng());
  Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(sizes.front(), 3, [&] { return normal(rng); });
  const Eigen::MatrixXd v = Eigen::MatrixXd::NullaryExpr(sizes.back(), 3, [&] { return normal(rng); });

  MlpTape tape;
  net.forward(x, tape);
  MlpGradients g = net.zero_gradients();
  const Eigen::MatrixXd dx = net.backward(tape, v, g);

  std::vector<double*> coords;
  std::vector<double> analytic;
  collect(coords, net.parameter_spans());
  collect(analytic, Mlp::parameter_spans(g));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    coords.push_back(x.data() + i);
    analytic.push_back(dx.data()[i]);
  }
  return fd_error(coords, analytic, [&] { return net.forward_batch(x).cwiseProduct(v).sum(); });
}

double pair_loss_gradient_error(Rng& rng, ModelKind kind) {
  constexpr int dim = 6;
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> target(0.0, 2.0);
  std::uniform_real_distribution<double> weight(0.2, 1.0);
  PairModel model = PairModel::make(kind, dim, 2, rng());
  if (model.snowflake) {
    for (auto s : model.snowflake->weight_spans())
      for (double& w : s) w = weight(rng);
    model.snowflake->set_p(0.3);
  }
  Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(dim, [&] { return normal(rng); });
  Eigen::VectorXd y = Eigen::VectorXd::NullaryExpr(dim, [&] { return normal(rng); });
  const double tgt = target(rng);
  const PairLoss l = pair_loss(model, x, y, tgt);

  std::vector<double*> coords;
  std::vector<double> analytic;
  if (model.encoder) {
    collect(coords, model.encoder->parameter_spans());
    collect(analytic, Mlp::parameter_spans(*l.grads.encoder));
  }
  double p = 0.0;
  if (model.snowflake) {
    collect(coords, model.snowflake->weight_spans());
    collect(analytic, NeuralSnowflake::weight_spans(*l.grads.snowflake));
    p = model.snowflake->p();
    coords.push_back(&p);
    analytic.push_back(l.grads.snowflake->d_p);
  }
  return fd_error(coords, analytic, [&] {
    if (model.snowflake) model.snowflake->set_p(p);
    return pair_loss(model, x, y, tgt).loss;
  });
}

double graph_loss_gradient_error(Rng& rng) {
  std::uniform_int_distribution<int> nodes(2, 10), layers(1, 3);
  std::normal_distribution<double> normal;
  const int n = nodes(rng), L = layers(rng);
  std::uniform_int_distribution<int> idx(0, n - 1);
  Eigen::VectorXd rewards = Eigen::VectorXd::NullaryExpr(n, [&] { return normal(rng); });
  std::vector<Eigen::MatrixXd> lps;
  std::vector<EdgeList> edges;
  for (int l = 0; l < L; ++l) {
    lps.push_back(Eigen::MatrixXd::NullaryExpr(n, n, [&] { return -std::abs(normal(rng)); }));
    EdgeList e;
    for (int m = 0; m < 2 * n; ++m) e.emplace_back(idx(rng), idx(rng));
    edges.push_back(std::move(e));
  }
  const GraphLearningLoss g = graph_learning_loss(rewards, edges, lps);
  std::vector<double*> coords;
  std::vector<double> analytic;
  for (int l = 0; l < L; ++l)
    for (Eigen::Index i = 0; i < lps[l].size(); ++i) {
      coords.push_back(lps[l].data() + i);
      analytic.push_back(g.d_log_probs[l].data()[i]);
    }
  return fd_error(coords, analytic, [&] { return graph_learning_loss(rewards, edges, lps).loss; });
}

double edge_model_gradient_error(Rng& rng) {
  std::uniform_int_distribution<int> nodes(2, 7), space(0, 2);
  std::normal_distribution<double> normal;
  const int n = nodes(rng);
  EdgeProbabilityModel m;
  m.space = static_cast<SimilaritySpace>(space(rng));
  m.log_temperature = 0.3 * normal(rng);
  m.activation.c_raw = {0.5 + std::abs(normal(rng)), 0.5 + std::abs(normal(rng)), 0.5 + std::abs(normal(rng))};
  m.activation.p_raw = 0.2;
  m.net = NeuralSnowflake::init(std::vector<int>{1, 5, 1}, rng());
  m.net.set_p(0.2);
  Eigen::MatrixXd e = Eigen::MatrixXd::NullaryExpr(n, 3, [&] { return normal(rng); });
  Eigen::MatrixXd up = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return normal(rng); });
  up.diagonal().setZero();
  const EdgeModelGradients g = edge_log_probs_backward(m, e, up);

  std::vector<double*> coords;
  std::vector<double> analytic;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    coords.push_back(e.data() + i);
    analytic.push_back(g.d_embeddings.data()[i]);
  }
  coords.push_back(&m.log_temperature);
  analytic.push_back(g.d_log_temperature);
  double p = m.net.p();
  if (m.space == SimilaritySpace::SnowflakeActivation) {
    for (int c = 0; c < 3; ++c) {
      coords.push_back(&m.activation.c_raw[c]);
      analytic.push_back(g.d_c_raw[c]);
    }
    coords.push_back(&m.activation.p_raw);
    analytic.push_back(g.d_p_raw);
  } else if (m.space == SimilaritySpace::NeuralSnowflake) {
    collect(coords, m.net.weight_spans());
    collect(analytic, NeuralSnowflake::weight_spans(g.net));
    coords.push_back(&p);
    analytic.push_back(g.net.d_p);
  }
  return fd_error(coords, analytic, [&] {
    m.net.set_p(p);
    Eigen::MatrixXd lp = edge_log_probs(m, e);
    lp.diagonal().setZero();
    return lp.cwiseProduct(up).sum();
  });
}

SuiteReport gradients(std::uint64_t seed) {
  SuiteReport r{"gradients", {}};
  Rng rng(derive_seed(seed, 13));
  auto worst_of = [&](const std::function<double()>& one) {
    double w = 0.0;
    for (int k = 0; k < kGradientInstances; ++k) w = std::max(w, one());
    return w;
  };
  r.checks.push_back(at_most("snowflake_net", worst_of([&] { return snowflake_gradient_error(rng); }),
                             kGradientTolerance));
  r.checks.push_back(at_most("mlp_encoder", worst_of([&] { return mlp_gradient_error(rng); }), kGradientTolerance));
  int turn = 0;
  r.checks.push_back(at_most("pair_loss", worst_of([&] {
                               return pair_loss_gradient_error(rng, kAllModelKinds[turn++ % 3]);
                             }),
                             kGradientTolerance));
  r.checks.push_back(at_most("graph_learning_loss", worst_of([&] { return graph_loss_gradient_error(rng); }),
                             kGradientTolerance));
  r.checks.push_back(at_most("edge_log_probs", worst_of([&] { return edge_model_gradient_error(rng); }),
                             kGradientTolerance));
  return r;
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::vector<std::string> verify_suite_names() { return {"metric-axioms", "thm1-universality", "gradients"}; }

SuiteReport run_verify_suite(std::string_view name, std::uint64_t seed) {
  if (name == "metric-axioms") return metric_axioms(seed);
  if (name == "thm1-universality") return universality(seed);
  if (name == "gradients") return gradients(seed);
  throw InvalidArgument("unknown suite: " + std::string(name));
}

void to_json(nlohmann::json& j, const CheckResult& c) {
  j = nlohmann::json{{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"threshold", c.threshold}};
  if (!c.detail.empty()) j["detail"] = c.detail;
}

void to_json(nlohmann::json& j, const SuiteReport& r) {
  j = nlohmann::json{{"suite", r.suite}, {"passed", r.passed()}, {"checks", r.checks}};
}

}  // namespace snowflake
