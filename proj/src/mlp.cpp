#include "snowflake/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "snowflake/common.hpp"

namespace snowflake {

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), "mlp needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    require(layers_[i].b.size() == layers_[i].W.rows(), "mlp layer: bias size must match rows");
    if (i > 0) require(layers_[i].W.cols() == layers_[i - 1].W.rows(), "mlp: inconsistent shape chain");
  }
}

Mlp Mlp::init(std::span<const int> sizes, std::uint64_t seed) {
  require(sizes.size() >= 2, "mlp sizes need at least input and output");
  for (int s : sizes) require(s >= 1, "mlp sizes must be positive");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const double fan_in = sizes[i];
    std::uniform_real_distribution<double> w(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
    std::uniform_real_distribution<double> b(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    DenseLayer l;
    l.W.resize(sizes[i + 1], sizes[i]);
    l.b.resize(sizes[i + 1]);
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = w(rng);
    for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = b(rng);
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

Mlp Mlp::uniform_width(int input, int hidden, int output, int layers, std::uint64_t seed) {
  require(layers >= 1, "mlp needs at least one layer");
  std::vector<int> sizes{input};
  for (int i = 0; i + 1 < layers; ++i) sizes.push_back(hidden);
  sizes.push_back(output);
  return init(sizes, seed);
}

std::vector<int> Mlp::sizes() const {
  std::vector<int> out{input_dim()};
  for (const auto& l : layers_) out.push_back(static_cast<int>(l.W.rows()));
  return out;
}

int Mlp::input_dim() const { return static_cast<int>(layers_.front().W.cols()); }
int Mlp::output_dim() const { return static_cast<int>(layers_.back().W.rows()); }

Eigen::MatrixXd Mlp::forward(const Eigen::Ref<const Eigen::MatrixXd>& X, MlpTape& tape) const {
  require(X.rows() == input_dim(), "mlp_forward: dimension mismatch");
  tape.inputs.resize(layers_.size());
  tape.pre_activation.resize(layers_.size() - 1);
  Eigen::MatrixXd h = X;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    tape.inputs[i] = h;
    Eigen::MatrixXd z = layers_[i].W * h;
    z.colwise() += layers_[i].b;
    if (i + 1 == layers_.size()) return z;
    tape.pre_activation[i] = z;
    h = z.cwiseMax(0.0);
  }
  return h;  // unreachable
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
  require(X.rows() == input_dim(), "mlp_forward: dimension mismatch");
  Eigen::MatrixXd h = X;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::MatrixXd z = layers_[i].W * h;
    z.colwise() += layers_[i].b;
    h = (i + 1 == layers_.size()) ? std::move(z) : Eigen::MatrixXd(z.cwiseMax(0.0));
  }
  return h;
}

Eigen::VectorXd Mlp::forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return forward_batch(x).col(0);
}

Eigen::MatrixXd Mlp::backward(const MlpTape& tape, const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                              MlpGradients& grads) const {
  require(grads.layers.size() == layers_.size(), "mlp_backward: gradient shape mismatch");
  require(upstream.rows() == output_dim(), "mlp_backward: upstream dimension mismatch");
  Eigen::MatrixXd g = upstream;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    if (idx + 1 < layers_.size()) {
      // ReLU subgradient is 0 at 0.
      g = g.cwiseProduct((tape.pre_activation[idx].array() > 0.0).cast<double>().matrix());
    }
    grads.layers[idx].W.noalias() += g * tape.inputs[idx].transpose();
    grads.layers[idx].b += g.rowwise().sum();
    g = layers_[idx].W.transpose() * g;
  }
  return g;
}

MlpGradients Mlp::zero_gradients() const {
  MlpGradients g;
  for (const auto& l : layers_)
    g.layers.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()), Eigen::VectorXd::Zero(l.b.size())});
  return g;
}

ParamCount Mlp::param_count() const {
  ParamCount pc;
  for (const auto& l : layers_) {
    pc.nonzero_params += static_cast<std::size_t>((l.W.array() != 0.0).count() + (l.b.array() != 0.0).count());
  }
  for (int s : sizes()) pc.width = std::max(pc.width, static_cast<std::size_t>(s));
  pc.depth = layers_.size();
  pc.bound_holds = pc.nonzero_params <= pc.width * pc.width * pc.depth;
  return pc;
}

std::vector<std::span<double>> Mlp::parameter_spans() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) {
    out.emplace_back(l.W.data(), l.W.size());
    out.emplace_back(l.b.data(), l.b.size());
  }
  return out;
}

std::vector<std::span<const double>> Mlp::parameter_spans(const MlpGradients& g) {
  std::vector<std::span<const double>> out;
  for (const auto& l : g.layers) {
    out.emplace_back(l.W.data(), l.W.size());
    out.emplace_back(l.b.data(), l.b.size());
  }
  return out;
}

void to_json(nlohmann::json& j, const Mlp& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    std::vector<double> w;
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) w.push_back(l.W(r, c));
    layers.push_back({{"W", w}, {"b", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
  }
  j = nlohmann::json{{"sizes", net.sizes()}, {"layers", layers}};
}

void from_json(const nlohmann::json& j, Mlp& net) {
  const auto sizes = j.at("sizes").get<std::vector<int>>();
  const auto& lj = j.at("layers");
  require(sizes.size() == lj.size() + 1, "mlp checkpoint: layer count does not match sizes");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i < lj.size(); ++i) {
    const auto w = lj[i].at("W").get<std::vector<double>>();
    const auto b = lj[i].at("b").get<std::vector<double>>();
    const int rows = sizes[i + 1], cols = sizes[i];
    require(w.size() == static_cast<std::size_t>(rows * cols) && b.size() == static_cast<std::size_t>(rows),
            "mlp checkpoint: parameter size mismatch");
    DenseLayer l;
    l.W.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) l.W(r, c) = w[static_cast<std::size_t>(r * cols + c)];
    l.b = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
    layers.push_back(std::move(l));
  }
  net = Mlp(std::move(layers));
}

}  // namespace snowflake
