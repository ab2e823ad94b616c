#include "snowflake/latent_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "snowflake/common.hpp"
#include "snowflake/optim.hpp"

namespace snowflake {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct PairList {
  std::vector<int> i, j;
  Eigen::ArrayXd r;
};

PairList upper_pairs(const Eigen::Ref<const Eigen::MatrixXd>& e) {
  const Eigen::Index n = e.rows();
  PairList p;
  p.r.resize(n * (n - 1) / 2);
  Eigen::Index m = 0;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b) {
      p.i.push_back(static_cast<int>(a));
      p.j.push_back(static_cast<int>(b));
      p.r[m++] = (e.row(a) - e.row(b)).norm();
    }
  return p;
}

Eigen::ArrayXd distances(const EdgeProbabilityModel& model, const Eigen::ArrayXd& r, SnowflakeTape* tape) {
  switch (model.space) {
    case SimilaritySpace::Euclidean: return r;
    case SimilaritySpace::SnowflakeActivation: return r.unaryExpr([&](double t) { return model.activation.value(t); });
    case SimilaritySpace::NeuralSnowflake: return tape ? model.net.forward(r, *tape) : model.net.forward(r);
  }
  return r;
}

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

std::span<double> span_of(Eigen::MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> span_of(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

std::string to_string(SimilaritySpace s) {
  switch (s) {
    case SimilaritySpace::Euclidean: return "euclidean";
    case SimilaritySpace::SnowflakeActivation: return "snowflake_activation";
    case SimilaritySpace::NeuralSnowflake: return "neural_snowflake";
  }
  return "?";
}

SimilaritySpace parse_similarity_space(std::string_view name) {
  if (name == "euclidean") return SimilaritySpace::Euclidean;
  if (name == "snowflake_activation") return SimilaritySpace::SnowflakeActivation;
  if (name == "neural_snowflake" || name == "snowflake") return SimilaritySpace::NeuralSnowflake;
  throw InvalidArgument("unknown similarity space: " + std::string(name));
}

double EdgeProbabilityModel::temperature() const { return std::exp(log_temperature); }

double EdgeProbabilityModel::distance(double r) const {
  switch (space) {
    case SimilaritySpace::Euclidean: return r;
    case SimilaritySpace::SnowflakeActivation: return activation.value(r);
    case SimilaritySpace::NeuralSnowflake: return net.forward(r);
  }
  return r;
}

Eigen::MatrixXd edge_log_probs(const EdgeProbabilityModel& model, const Eigen::Ref<const Eigen::MatrixXd>& embeddings) {
  const Eigen::Index n = embeddings.rows();
  require(n >= 2, "edge_log_probs needs at least two nodes");
  const double T = model.temperature();
  const PairList pairs = upper_pairs(embeddings);
  const Eigen::ArrayXd g = distances(model, pairs.r, nullptr);
  Eigen::MatrixXd lp(n, n);
  for (Eigen::Index m = 0; m < g.size(); ++m) {
    const double v = -T * g[m] * g[m];
    lp(pairs.i[m], pairs.j[m]) = v;
    lp(pairs.j[m], pairs.i[m]) = v;
  }
  lp.diagonal().setConstant(kNegInf);
  return lp;
}

EdgeModelGradients edge_log_probs_backward(const EdgeProbabilityModel& model,
                                           const Eigen::Ref<const Eigen::MatrixXd>& embeddings,
                                           const Eigen::Ref<const Eigen::MatrixXd>& upstream) {
  const Eigen::Index n = embeddings.rows();
  require(upstream.rows() == n && upstream.cols() == n, "upstream shape mismatch");
  const double T = model.temperature();
  const PairList pairs = upper_pairs(embeddings);
  SnowflakeTape tape;
  const Eigen::ArrayXd g = distances(model, pairs.r, &tape);

  EdgeModelGradients out;
  out.d_embeddings = Eigen::MatrixXd::Zero(n, embeddings.cols());
  if (model.space == SimilaritySpace::NeuralSnowflake) out.net = model.net.zero_gradients();

  Eigen::ArrayXd dg(g.size());
  for (Eigen::Index m = 0; m < g.size(); ++m) {
    const double u = upstream(pairs.i[m], pairs.j[m]) + upstream(pairs.j[m], pairs.i[m]);
    out.d_log_temperature += u * (-T * g[m] * g[m]);
    dg[m] = u * (-2.0 * T * g[m]);
  }

  Eigen::ArrayXd dr(g.size());
  switch (model.space) {
    case SimilaritySpace::Euclidean: dr = dg; break;
    case SimilaritySpace::SnowflakeActivation:
      for (Eigen::Index m = 0; m < g.size(); ++m) {
        const auto grad = model.activation.gradient(pairs.r[m]);
        for (int c = 0; c < 3; ++c) out.d_c_raw[c] += dg[m] * grad.d_c_raw[c];
        out.d_p_raw += dg[m] * grad.d_p_raw;
        dr[m] = dg[m] * grad.d_t;
      }
      break;
    case SimilaritySpace::NeuralSnowflake: dr = model.net.backward(tape, dg, out.net); break;
  }

  for (Eigen::Index m = 0; m < g.size(); ++m) {
    if (pairs.r[m] <= 0.0) continue;
    const Eigen::RowVectorXd dir = (embeddings.row(pairs.i[m]) - embeddings.row(pairs.j[m])) / pairs.r[m];
    out.d_embeddings.row(pairs.i[m]) += dr[m] * dir;
    out.d_embeddings.row(pairs.j[m]) -= dr[m] * dir;
  }
  return out;
}

std::vector<int> gumbel_top_k(const Eigen::Ref<const Eigen::VectorXd>& log_probs_row, int k,
                              const Eigen::Ref<const Eigen::VectorXd>& noise) {
  const auto n = static_cast<int>(log_probs_row.size());
  require(noise.size() == n, "noise length must match the row");
  require(k >= 0 && k < n, "gumbel_top_k requires k < n");
  require((noise.array() > 0.0).all() && (noise.array() < 1.0).all(), "noise must lie strictly inside (0, 1)");
  std::vector<double> key(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) key[j] = log_probs_row[j] - std::log(-std::log(noise[j]));
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    return key[a] > key[b] || (key[a] == key[b] && a < b);
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

double reward(int y_true, int y_pred, double expected_accuracy) {
  const double ac = y_true == y_pred ? 1.0 : 0.0;
  return expected_accuracy - ac;
}

double update_running_accuracy(double expected_accuracy, int ac, double beta) {
  require(ac == 0 || ac == 1, "accuracy indicator must be 0 or 1");
  return std::clamp(beta * expected_accuracy + (1.0 - beta) * ac, 0.0, 1.0);
}

GraphLearningLoss graph_learning_loss(const Eigen::Ref<const Eigen::VectorXd>& rewards,
                                      const std::vector<EdgeList>& sampled_edges,
                                      const std::vector<Eigen::MatrixXd>& log_probs) {
  require(sampled_edges.size() == log_probs.size(), "one edge list per log-probability matrix");
  GraphLearningLoss out;
  for (std::size_t l = 0; l < log_probs.size(); ++l) {
    const Eigen::MatrixXd& lp = log_probs[l];
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(lp.rows(), lp.cols());
    for (const auto& [i, j] : sampled_edges[l]) {
      if (i < 0 || j < 0 || i >= lp.rows() || j >= lp.cols() || i >= rewards.size())
        throw InvalidArgument("edge index out of range");
      out.loss += rewards[i] * lp(i, j);
      grad(i, j) += rewards[i];
    }
    out.d_log_probs.push_back(std::move(grad));
  }
  return out;
}

EdgeList to_edge_list(const std::vector<std::vector<int>>& neighbors) {
  EdgeList e;
  for (std::size_t i = 0; i < neighbors.size(); ++i)
    for (int j : neighbors[i]) e.emplace_back(static_cast<int>(i), j);
  return e;
}

GcnLayer GcnLayer::init(int in, int out, bool with_root, bool elu, std::uint64_t seed) {
  require(in > 0 && out > 0, "layer sizes must be positive");
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / (in + out));
  std::uniform_real_distribution<double> u(-bound, bound);
  GcnLayer l;
  l.W = Eigen::MatrixXd::NullaryExpr(out, in, [&] { return u(rng); });
  if (with_root) l.root = Eigen::MatrixXd::NullaryExpr(out, in, [&] { return u(rng); });
  l.bias = Eigen::VectorXd::Zero(out);
  l.elu = elu;
  return l;
}

Eigen::MatrixXd gcn_forward(const GcnLayer& layer, const Eigen::Ref<const Eigen::MatrixXd>& features,
                            const std::vector<std::vector<int>>& neighbors, GcnTape* tape) {
  const Eigen::Index n = features.rows();
  require(features.cols() == layer.input_dim(), "gcn_forward: feature dimension mismatch");
  require(static_cast<Eigen::Index>(neighbors.size()) == n, "gcn_forward: one neighbor list per node");
  require(layer.root.size() == 0 || (layer.root.rows() == layer.W.rows() && layer.root.cols() == layer.W.cols()),
          "gcn_forward: root weight shape mismatch");
  require(layer.bias.size() == 0 || layer.bias.size() == layer.W.rows(), "gcn_forward: bias shape mismatch");

  Eigen::MatrixXd agg(n, features.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd s = features.row(i);
    for (int j : neighbors[i]) {
      require(j >= 0 && j < n, "gcn_forward: neighbor index out of range");
      s += features.row(j);
    }
    agg.row(i) = s / static_cast<double>(neighbors[i].size() + 1);
  }
  Eigen::MatrixXd pre = agg * layer.W.transpose();
  if (layer.root.size() > 0) pre.noalias() += features * layer.root.transpose();
  if (layer.bias.size() > 0) pre.rowwise() += layer.bias.transpose();
  Eigen::MatrixXd out = layer.elu ? Eigen::MatrixXd(pre.unaryExpr(&elu)) : pre;
  if (tape) {
    tape->input = features;
    tape->aggregated = std::move(agg);
    tape->pre_activation = std::move(pre);
    tape->neighbors = neighbors;
  }
  return out;
}

GcnGradients zero_gradients(const GcnLayer& layer) {
  GcnGradients g;
  g.d_W = Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols());
  g.d_root = Eigen::MatrixXd::Zero(layer.root.rows(), layer.root.cols());
  g.d_bias = Eigen::VectorXd::Zero(layer.bias.size());
  return g;
}

Eigen::MatrixXd gcn_backward(const GcnLayer& layer, const GcnTape& tape, const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                             GcnGradients& grads) {
  require(upstream.rows() == tape.pre_activation.rows() && upstream.cols() == tape.pre_activation.cols(),
          "gcn_backward: upstream shape mismatch");
  const Eigen::MatrixXd g =
      layer.elu ? Eigen::MatrixXd(upstream.cwiseProduct(tape.pre_activation.unaryExpr(&elu_grad))) : Eigen::MatrixXd(upstream);
  grads.d_W += g.transpose() * tape.aggregated;
  if (layer.root.size() > 0) grads.d_root += g.transpose() * tape.input;
  if (layer.bias.size() > 0) grads.d_bias += g.colwise().sum().transpose();

  const Eigen::MatrixXd d_agg = g * layer.W;
  Eigen::MatrixXd dx = layer.root.size() > 0 ? Eigen::MatrixXd(g * layer.root)
                                             : Eigen::MatrixXd::Zero(tape.input.rows(), tape.input.cols());
  for (Eigen::Index i = 0; i < dx.rows(); ++i) {
    const Eigen::RowVectorXd share = d_agg.row(i) / static_cast<double>(tape.neighbors[i].size() + 1);
    dx.row(i) += share;
    for (int j : tape.neighbors[i]) dx.row(j) += share;
  }
  return dx;
}

void LatentGraphConfig::validate() const {
  require(k > 0, "k must be positive");
  require(latent_dim > 0 && hidden > 0, "dimensions must be positive");
  require(!seeds.empty(), "at least one seed is required");
  require(epochs >= 0, "epochs must be non-negative");
  require(num_nodes >= 4 && num_nodes <= 2000, "num_nodes must lie in [4, 2000]");
  require(num_features > 0 && num_classes >= 2, "need features and at least two classes");
  require(cluster_spread > 0.0 && class_separation >= 0.0, "invalid blob geometry");
  require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must lie in (0, 1)");
  require(lr > 0.0 && lr_p > 0.0, "learning rates must be positive");
}

void to_json(nlohmann::json& j, const LatentGraphConfig& c) {
  j = nlohmann::json{{"similarity_space", to_string(c.similarity_space)},
                     {"k", c.k},
                     {"latent_dim", c.latent_dim},
                     {"seeds", c.seeds},
                     {"epochs", c.epochs},
                     {"num_nodes", c.num_nodes},
                     {"num_features", c.num_features},
                     {"num_classes", c.num_classes},
                     {"cluster_spread", c.cluster_spread},
                     {"class_separation", c.class_separation},
                     {"train_fraction", c.train_fraction},
                     {"hidden", c.hidden},
                     {"lr", c.lr},
                     {"lr_p", c.lr_p},
                     {"data_seed", c.data_seed},
                     {"gl_into_encoder", c.gl_into_encoder},
                     {"root_weight", c.root_weight},
                     {"phi", "temperature * squared_distance"}};
}

void from_json(const nlohmann::json& j, LatentGraphConfig& c) {
  LatentGraphConfig d;
  if (j.contains("similarity_space"))
    d.similarity_space = parse_similarity_space(j.at("similarity_space").get<std::string>());
  d.k = j.value("k", d.k);
  d.latent_dim = j.value("latent_dim", d.latent_dim);
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    if (s.is_number_integer()) {
      d.seeds.resize(s.get<std::size_t>());
      std::iota(d.seeds.begin(), d.seeds.end(), std::uint64_t{0});
    } else {
      d.seeds = s.get<std::vector<std::uint64_t>>();
    }
  }
  d.epochs = j.value("epochs", d.epochs);
  d.num_nodes = j.value("num_nodes", d.num_nodes);
  d.num_features = j.value("num_features", d.num_features);
  d.num_classes = j.value("num_classes", d.num_classes);
  d.cluster_spread = j.value("cluster_spread", d.cluster_spread);
  d.class_separation = j.value("class_separation", d.class_separation);
  d.train_fraction = j.value("train_fraction", d.train_fraction);
  d.hidden = j.value("hidden", d.hidden);
  d.lr = j.value("lr", d.lr);
  d.lr_p = j.value("lr_p", d.lr_p);
  d.data_seed = j.value("data_seed", d.data_seed);
  d.gl_into_encoder = j.value("gl_into_encoder", d.gl_into_encoder);
  d.root_weight = j.value("root_weight", d.root_weight);
  c = d;
}

LabeledCloud make_blobs(int n, int features, int classes, double spread, double separation, std::uint64_t seed) {
  require(n > 0 && features > 0 && classes > 0, "invalid blob shape");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const Eigen::MatrixXd centers =
      Eigen::MatrixXd::NullaryExpr(classes, features, [&] { return separation * normal(rng); });
  LabeledCloud c;
  c.num_classes = classes;
  c.features.resize(n, features);
  c.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    c.labels[i] = i % classes;
    for (int f = 0; f < features; ++f) c.features(i, f) = centers(c.labels[i], f) + spread * normal(rng);
  }
  return c;
}

namespace {

struct LatentModel {
  Mlp encoder;
  Mlp projection;
  EdgeProbabilityModel edges;
  std::array<GcnLayer, 3> gcn;
};

struct Pass {
  MlpTape enc_tape, proj_tape;
  Eigen::MatrixXd h0, xhat, log_probs, logits;
  std::array<GcnTape, 3> gcn_tapes;
  std::array<std::vector<std::vector<int>>, 3> neighbors;
};

double positive_uniform(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double v = 0.0;
  while (v <= 0.0) v = u(rng);
  return v;
}

Pass forward_pass(const LatentModel& m, const Eigen::MatrixXd& features, int k, Rng* noise_rng) {
  Pass p;
  p.h0 = m.encoder.forward(features.transpose(), p.enc_tape).transpose();
  p.xhat = m.projection.forward(p.h0.transpose(), p.proj_tape).transpose();
  p.log_probs = edge_log_probs(m.edges, p.xhat);
  const Eigen::Index n = features.rows();
  const int kk = std::min<int>(k, static_cast<int>(n) - 1);
  Eigen::VectorXd noise = Eigen::VectorXd::Constant(n, std::exp(-1.0));
  Eigen::MatrixXd h = p.h0;
  for (int l = 0; l < 3; ++l) {
    p.neighbors[l].resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (noise_rng)
        for (Eigen::Index j = 0; j < n; ++j) noise[j] = positive_uniform(*noise_rng);
      p.neighbors[l][i] = gumbel_top_k(p.log_probs.row(i).transpose(), kk, noise);
    }
    h = gcn_forward(m.gcn[l], h, p.neighbors[l], &p.gcn_tapes[l]);
  }
  p.logits = std::move(h);
  return p;
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    logits.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

double mean_std(const std::vector<double>& v, double& stddev) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  stddev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return mean;
}

}  // namespace

LatentGraphRun run_latent_graph_split(const LatentGraphConfig& config, const LabeledCloud& data, std::uint64_t seed) {
  config.validate();
  const auto n = static_cast<int>(data.features.rows());
  require(n >= 2 && static_cast<int>(data.labels.size()) == n, "invalid labeled cloud");

  LatentGraphRun run;
  run.seed = seed;

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(seed, 1));
  std::shuffle(order.begin(), order.end(), split_rng);
  const int n_train = std::clamp(static_cast<int>(std::lround(config.train_fraction * n)), 1, n - 1);
  std::vector<char> is_train(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n_train; ++i) is_train[order[i]] = 1;

  const int F = static_cast<int>(data.features.cols());
  const int C = data.num_classes;
  LatentModel m;
  m.encoder = Mlp::init(std::vector<int>{F, config.hidden, config.hidden}, derive_seed(seed, 2));
  m.projection = Mlp::init(std::vector<int>{config.hidden, config.latent_dim}, derive_seed(seed, 3));
  m.edges.space = config.similarity_space;
  if (config.similarity_space == SimilaritySpace::NeuralSnowflake)
    m.edges.net = NeuralSnowflake::init(std::vector<int>{1, 20, 1}, derive_seed(seed, 4), std::vector<int>{20, 20});
  m.gcn[0] = GcnLayer::init(config.hidden, config.hidden, config.root_weight, true, derive_seed(seed, 5));
  m.gcn[1] = GcnLayer::init(config.hidden, config.hidden, config.root_weight, true, derive_seed(seed, 6));
  m.gcn[2] = GcnLayer::init(config.hidden, C, config.root_weight, false, derive_seed(seed, 7));

  Rng noise_rng(derive_seed(seed, 8));
  RunningAccuracy running(static_cast<std::size_t>(n));
  AdamState main_state, p_state;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Pass p = forward_pass(m, data.features, config.k, &noise_rng);

    Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(n, C);
    double ce = 0.0;
    const std::vector<int> pred = argmax_rows(p.logits);
    Eigen::VectorXd rewards = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (!is_train[i]) continue;
      const Eigen::RowVectorXd z = p.logits.row(i);
      const double zmax = z.maxCoeff();
      const Eigen::RowVectorXd e = (z.array() - zmax).exp().matrix();
      const double s = e.sum();
      ce += std::log(s) + zmax - z[data.labels[i]];
      d_logits.row(i) = e / s;
      d_logits(i, data.labels[i]) -= 1.0;
      const int ac = pred[i] == data.labels[i] ? 1 : 0;
      rewards[i] = reward(data.labels[i], pred[i], running.expected[i]);
      running.update(static_cast<std::size_t>(i), ac);
    }
    ce /= n_train;
    d_logits /= static_cast<double>(n_train);

    std::vector<EdgeList> edges;
    for (const auto& nb : p.neighbors) edges.push_back(to_edge_list(nb));
    const std::vector<Eigen::MatrixXd> lps(3, p.log_probs);
    const GraphLearningLoss gl = graph_learning_loss(rewards, edges, lps);
    if (!std::isfinite(ce) || !std::isfinite(gl.loss)) {
      run.finite = false;
      break;
    }
    run.losses.push_back(ce);

    std::array<GcnGradients, 3> gg;
    Eigen::MatrixXd g = d_logits;
    for (int l = 2; l >= 0; --l) {
      gg[l] = zero_gradients(m.gcn[l]);
      g = gcn_backward(m.gcn[l], p.gcn_tapes[l], g, gg[l]);
    }
    Eigen::MatrixXd d_h0 = g;

    const Eigen::MatrixXd d_lp = gl.d_log_probs[0] + gl.d_log_probs[1] + gl.d_log_probs[2];
    const EdgeModelGradients eg = edge_log_probs_backward(m.edges, p.xhat, d_lp);
    MlpGradients proj_grads = m.projection.zero_gradients();
    const Eigen::MatrixXd d_h0_gl =
        m.projection.backward(p.proj_tape, eg.d_embeddings.transpose(), proj_grads).transpose();
    if (config.gl_into_encoder) d_h0 += d_h0_gl;
    MlpGradients enc_grads = m.encoder.zero_gradients();
    m.encoder.backward(p.enc_tape, d_h0.transpose(), enc_grads);

    std::vector<std::span<double>> params = m.encoder.parameter_spans();
    std::vector<std::span<const double>> grads = Mlp::parameter_spans(enc_grads);
    for (auto s : m.projection.parameter_spans()) params.push_back(s);
    for (auto s : Mlp::parameter_spans(proj_grads)) grads.push_back(s);
    for (int l = 0; l < 3; ++l) {
      params.push_back(span_of(m.gcn[l].W));
      grads.push_back(span_of(gg[l].d_W));
      if (m.gcn[l].root.size() > 0) {
        params.push_back(span_of(m.gcn[l].root));
        grads.push_back(span_of(gg[l].d_root));
      }
      params.push_back(span_of(m.gcn[l].bias));
      grads.push_back(span_of(gg[l].d_bias));
    }
    params.emplace_back(&m.edges.log_temperature, 1);
    grads.emplace_back(&eg.d_log_temperature, 1);

    std::vector<std::span<double>> p_params;
    std::vector<std::span<const double>> p_grads;
    double net_p = m.edges.net.p();
    if (config.similarity_space == SimilaritySpace::SnowflakeActivation) {
      params.emplace_back(m.edges.activation.c_raw.data(), 3);
      grads.emplace_back(eg.d_c_raw.data(), 3);
      p_params.emplace_back(&m.edges.activation.p_raw, 1);
      p_grads.emplace_back(&eg.d_p_raw, 1);
    } else if (config.similarity_space == SimilaritySpace::NeuralSnowflake) {
      for (auto s : m.edges.net.weight_spans()) params.push_back(s);
      for (auto s : NeuralSnowflake::weight_spans(eg.net)) grads.push_back(s);
      p_params.emplace_back(&net_p, 1);
      p_grads.emplace_back(&eg.net.d_p, 1);
    }
    adam_step(main_state, params, grads, config.lr);
    if (!p_params.empty()) adam_step(p_state, p_params, p_grads, config.lr_p);
    if (config.similarity_space == SimilaritySpace::NeuralSnowflake) m.edges.net.set_p(net_p);
  }

  const Pass eval = forward_pass(m, data.features, config.k, nullptr);
  if (!eval.logits.allFinite()) run.finite = false;
  const std::vector<int> pred = argmax_rows(eval.logits);
  int correct = 0;
  for (int i = 0; i < n; ++i)
    if (!is_train[i] && pred[i] == data.labels[i]) ++correct;
  run.accuracy = static_cast<double>(correct) / (n - n_train);
  return run;
}

LatentGraphReport run_latent_graph_experiment(const LatentGraphConfig& config) {
  config.validate();
  const LabeledCloud data = make_blobs(config.num_nodes, config.num_features, config.num_classes,
                                       config.cluster_spread, config.class_separation, config.data_seed);
  LatentGraphReport report;
  report.config = config;
  std::vector<double> acc;
  for (std::uint64_t s : config.seeds) {
    report.runs.push_back(run_latent_graph_split(config, data, s));
    acc.push_back(report.runs.back().accuracy);
    report.finite = report.finite && report.runs.back().finite;
  }
  report.mean_accuracy = mean_std(acc, report.std_accuracy);
  return report;
}

void to_json(nlohmann::json& j, const LatentGraphReport& r) {
  std::vector<double> acc;
  for (const auto& run : r.runs) acc.push_back(run.accuracy);
  j = nlohmann::json{{"config", r.config},
                     {"accuracies", acc},
                     {"mean_accuracy", r.mean_accuracy},
                     {"std_accuracy", r.std_accuracy},
                     {"finite", r.finite}};
}

}  // namespace snowflake
