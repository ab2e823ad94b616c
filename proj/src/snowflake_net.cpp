#include "snowflake/snowflake_net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "snowflake/common.hpp"

namespace snowflake {

namespace {

Eigen::ArrayXXd sign_of(const Eigen::ArrayXXd& v) {
  return (v > 0.0).cast<double>() - (v < 0.0).cast<double>();
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Eigen::ArrayXXd fractal_part(const Eigen::ArrayXXd& au, double a) {
  if (a == 1.0) return au;
  return (au > 0.0).select(au.pow(a), 0.0);
}

Eigen::ArrayXXd irregular_part(const Eigen::ArrayXXd& au, double b) {
  if (b == 1.0) return au.log1p();
  return (au > 0.0).select(au.log1p().pow(b), 0.0);
}

void fill_uniform(Eigen::MatrixXd& m, Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0 / static_cast<double>(m.rows() * m.cols()));
  // Row-major draw order so checkpoints and draws line up.
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
}

}  // namespace

Eigen::MatrixXd tensorized_activation(const Eigen::Ref<const Eigen::VectorXd>& u, double a, double b) {
  const Eigen::ArrayXXd au = u.array().abs().matrix();
  Eigen::MatrixXd out(u.size(), 3);
  out.col(0) = (1.0 - (-au).exp()).matrix();
  out.col(1) = fractal_part(au, a).matrix();
  out.col(2) = irregular_part(au, b).matrix();
  return out;
}

NeuralSnowflake::NeuralSnowflake(std::vector<SnowflakeLayer> layers, double p, double skip_weight)
    : layers_(std::move(layers)), p_(p) {
  set_skip_weight(skip_weight);
  check_chain();
}

void NeuralSnowflake::check_chain() const {
  require(!layers_.empty(), "neural snowflake needs at least one layer");
  require(layers_.front().input_dim() == 1, "neural snowflake input dimension must be 1");
  require(layers_.back().output_dim() == 1, "neural snowflake output dimension must be 1");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    require(l.B.cols() == l.A.rows(), "snowflake layer: B columns must match A rows");
    require(l.a > 0.0 && l.a <= 1.0, "snowflake layer: a must lie in (0, 1]");
    require(l.b >= 0.0 && l.b <= 1.0, "snowflake layer: b must lie in [0, 1]");
    if (i > 0)
      require(l.input_dim() == layers_[i - 1].output_dim(), "snowflake layers: inconsistent dimension chain");
  }
}

NeuralSnowflake NeuralSnowflake::init(std::span<const int> dim_chain, std::uint64_t seed,
                                      std::span<const int> hidden) {
  require(dim_chain.size() >= 2, "dimension chain needs at least two entries");
  require(dim_chain.front() == 1 && dim_chain.back() == 1, "dimension chain must start and end at 1");
  for (int d : dim_chain) require(d >= 1, "dimension chain entries must be positive");
  const std::size_t n_layers = dim_chain.size() - 1;
  require(hidden.empty() || hidden.size() == n_layers, "hidden widths must match the layer count");

  Rng rng(seed);
  std::vector<SnowflakeLayer> layers(n_layers);
  for (std::size_t i = 0; i < n_layers; ++i) {
    const int in = dim_chain[i];
    const int out = dim_chain[i + 1];
    const int width = hidden.empty() ? std::max(in, out) : hidden[i];
    require(width >= 1, "hidden widths must be positive");
    auto& l = layers[i];
    l.A.resize(width, in);
    l.B.resize(out, width);
    fill_uniform(l.A, rng);
    fill_uniform(l.B, rng);
    std::uniform_real_distribution<double> c_dist(0.0, 1.0 / 3.0);
    for (int k = 0; k < 3; ++k) l.C(k) = c_dist(rng);
  }
  NeuralSnowflake net(std::move(layers), 1e-8, 0.5);
  net.seed_ = seed;
  return net;
}

NeuralSnowflake NeuralSnowflake::power(double p) {
  SnowflakeLayer l;
  l.A = Eigen::MatrixXd::Ones(1, 1);
  l.B = Eigen::MatrixXd::Ones(1, 1);
  l.C = Eigen::Vector3d(0.0, 1.0, 0.0);
  return NeuralSnowflake({l}, p, 0.0);
}

void NeuralSnowflake::set_skip_weight(double w) { skip_weight_ = std::clamp(w, 0.0, 1.0); }

double NeuralSnowflake::exponent() const { return 1.0 + std::abs(p_); }

double NeuralSnowflake::relaxed_triangle_constant() const { return std::pow(2.0, std::abs(p_)); }

std::vector<int> NeuralSnowflake::dim_chain() const {
  std::vector<int> chain{static_cast<int>(layers_.front().input_dim())};
  for (const auto& l : layers_) chain.push_back(static_cast<int>(l.output_dim()));
  return chain;
}

std::vector<int> NeuralSnowflake::hidden_dims() const {
  std::vector<int> out;
  for (const auto& l : layers_) out.push_back(static_cast<int>(l.hidden_dim()));
  return out;
}

std::size_t NeuralSnowflake::parameter_count() const {
  std::size_t n = 1;
  for (const auto& l : layers_) n += l.A.size() + l.B.size() + 3;
  return n;
}

std::vector<std::span<double>> NeuralSnowflake::weight_spans() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) {
    out.emplace_back(l.A.data(), l.A.size());
    out.emplace_back(l.B.data(), l.B.size());
    out.emplace_back(l.C.data(), 3);
  }
  return out;
}

std::vector<std::span<const double>> NeuralSnowflake::weight_spans(const SnowflakeGradients& g) {
  std::vector<std::span<const double>> out;
  for (const auto& l : g.layers) {
    out.emplace_back(l.d_A.data(), l.d_A.size());
    out.emplace_back(l.d_B.data(), l.d_B.size());
    out.emplace_back(l.d_C.data(), 3);
  }
  return out;
}

SnowflakeGradients NeuralSnowflake::zero_gradients() const {
  SnowflakeGradients g;
  for (const auto& l : layers_) {
    SnowflakeLayerGradients lg;
    lg.d_A = Eigen::MatrixXd::Zero(l.A.rows(), l.A.cols());
    lg.d_B = Eigen::MatrixXd::Zero(l.B.rows(), l.B.cols());
    g.layers.push_back(std::move(lg));
  }
  return g;
}

Eigen::ArrayXd NeuralSnowflake::forward(const Eigen::ArrayXd& t, SnowflakeTape& tape) const {
  require((t >= 0.0).all(), "neural snowflake input must be non-negative");
  tape.layers.resize(layers_.size());
  tape.t = t;
  Eigen::MatrixXd x = t.matrix().transpose();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    auto& rec = tape.layers[i];
    rec.input = x;
    rec.u = (l.A.cwiseAbs() * x).array();
    const Eigen::ArrayXXd au = rec.u.abs();
    rec.bounded = 1.0 - (-au).exp();
    rec.fractal = fractal_part(au, l.a);
    rec.irregular = irregular_part(au, l.b);
    const Eigen::Vector3d c = l.C.cwiseAbs();
    rec.mixed = (c(0) * rec.bounded + c(1) * rec.fractal + c(2) * rec.irregular).matrix();
    x = l.B.cwiseAbs() * rec.mixed;
  }
  tape.last = x.row(0).transpose().array();
  const double q = exponent();
  tape.raw = (tape.last > 0.0).select(tape.last.pow(q), 0.0);
  return skip_weight_ * t + (1.0 - skip_weight_) * tape.raw;
}

Eigen::ArrayXd NeuralSnowflake::forward(const Eigen::ArrayXd& t) const {
  SnowflakeTape tape;
  return forward(t, tape);
}

double NeuralSnowflake::forward(double t) const {
  Eigen::ArrayXd ts(1);
  ts(0) = t;
  return forward(ts)(0);
}

Eigen::ArrayXd NeuralSnowflake::backward(const SnowflakeTape& tape, const Eigen::ArrayXd& upstream,
                                         SnowflakeGradients& grads) const {
  require(upstream.size() == tape.t.size(), "snowflake backward: upstream size mismatch");
  require(grads.layers.size() == layers_.size(), "snowflake backward: gradient shape mismatch");
  const double s = skip_weight_;
  const double q = exponent();
  const double ap = std::abs(p_);
  const Eigen::ArrayXd& last = tape.last;

  grads.d_skip += (upstream * (tape.t - tape.raw)).sum();
  const Eigen::ArrayXd positive = (last > 0.0).cast<double>();
  const Eigen::ArrayXd safe_last = (last > 0.0).select(last, 1.0);
  grads.d_p += (upstream * (1.0 - s) * tape.raw * safe_last.log() * positive).sum() * sign_of(p_);
  Eigen::MatrixXd g =
      (upstream * (1.0 - s) * q * safe_last.pow(ap) * positive).matrix().transpose();  // 1 x batch

  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    const auto& l = layers_[idx];
    const auto& rec = tape.layers[idx];
    auto& lg = grads.layers[idx];
    const Eigen::MatrixXd absB = l.B.cwiseAbs();
    lg.d_B += ((g * rec.mixed.transpose()).array() * sign_of(l.B.array())).matrix();
    const Eigen::ArrayXXd gv = (absB.transpose() * g).array();
    const Eigen::Vector3d c = l.C.cwiseAbs();
    Eigen::Vector3d dc((gv * rec.bounded).sum(), (gv * rec.fractal).sum(), (gv * rec.irregular).sum());
    lg.d_C += (dc.array() * sign_of(Eigen::ArrayXXd(l.C.array()))).matrix();

    const Eigen::ArrayXXd au = rec.u.abs();
    const Eigen::ArrayXXd active = (au > 0.0).cast<double>();
    const Eigen::ArrayXXd safe = (au > 0.0).select(au, 1.0);
    Eigen::ArrayXXd deriv = c(0) * (-au).exp();
    deriv += c(1) * l.a * (l.a == 1.0 ? Eigen::ArrayXXd::Ones(au.rows(), au.cols()) : Eigen::ArrayXXd(safe.pow(l.a - 1.0)));
    if (l.b > 0.0) {
      const Eigen::ArrayXXd lp = safe.log1p();
      deriv += c(2) * l.b * (l.b == 1.0 ? Eigen::ArrayXXd::Ones(au.rows(), au.cols()) : Eigen::ArrayXXd(lp.pow(l.b - 1.0))) /
               (1.0 + au);
    }
    const Eigen::MatrixXd gu = (gv * deriv * active * sign_of(rec.u)).matrix();
    lg.d_A += ((gu * rec.input.transpose()).array() * sign_of(l.A.array())).matrix();
    g = l.A.cwiseAbs().transpose() * gu;
  }
  return upstream * s + g.row(0).transpose().array();
}

SnowflakeGradients NeuralSnowflake::backward(double t) const {
  Eigen::ArrayXd ts(1);
  ts(0) = t;
  SnowflakeTape tape;
  forward(ts, tape);
  SnowflakeGradients g = zero_gradients();
  g.d_input = backward(tape, Eigen::ArrayXd::Ones(1), g)(0);
  return g;
}

double snowflake_metric(const NeuralSnowflake& net, const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& y) {
  require(x.size() == y.size(), "snowflake_metric: dimension mismatch");
  return net.forward((x - y).norm());
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return flat;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  const auto flat = j.get<std::vector<double>>();
  require(flat.size() == static_cast<std::size_t>(rows * cols), "checkpoint: matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  return m;
}

}  // namespace

void to_json(nlohmann::json& j, const NeuralSnowflake& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({{"A", matrix_to_json(l.A)},
                      {"B", matrix_to_json(l.B)},
                      {"C", {l.C(0), l.C(1), l.C(2)}},
                      {"a", l.a},
                      {"b", l.b}});
  }
  j = nlohmann::json{{"dim_chain", net.dim_chain()}, {"hidden", net.hidden_dims()},
                     {"layers", layers},            {"p", net.p()},
                     {"skip_weight", net.skip_weight()}, {"seed", net.seed()}};
}

void from_json(const nlohmann::json& j, NeuralSnowflake& net) {
  const auto chain = j.at("dim_chain").get<std::vector<int>>();
  const auto hidden = j.at("hidden").get<std::vector<int>>();
  const auto& layers_json = j.at("layers");
  require(chain.size() == layers_json.size() + 1 && hidden.size() == layers_json.size(),
          "checkpoint: layer count does not match dim_chain");
  std::vector<SnowflakeLayer> layers;
  for (std::size_t i = 0; i < layers_json.size(); ++i) {
    const auto& lj = layers_json[i];
    SnowflakeLayer l;
    l.A = matrix_from_json(lj.at("A"), hidden[i], chain[i]);
    l.B = matrix_from_json(lj.at("B"), chain[i + 1], hidden[i]);
    const auto c = lj.at("C").get<std::vector<double>>();
    require(c.size() == 3, "checkpoint: C must have 3 entries");
    l.C = Eigen::Vector3d(c[0], c[1], c[2]);
    l.a = lj.value("a", 1.0);
    l.b = lj.value("b", 1.0);
    layers.push_back(std::move(l));
  }
  net = NeuralSnowflake(std::move(layers), j.at("p").get<double>(), j.at("skip_weight").get<double>());
  net.set_seed(j.value("seed", std::uint64_t{0}));
}

}  // namespace snowflake
