#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace snowflake {

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

struct MlpGradients {
  std::vector<DenseLayer> layers;
};

/// Cached activations for backward(); points are columns.
struct MlpTape {
  std::vector<Eigen::MatrixXd> inputs;       // input to each affine layer
  std::vector<Eigen::MatrixXd> pre_activation;  // affine output of each hidden layer
};

struct ParamCount {
  std::size_t nonzero_params = 0;
  std::size_t width = 0;
  std::size_t depth = 0;     // number of affine layers
  bool bound_holds = false;  // nonzero_params <= width^2 * depth
};

/// ReLU multilayer perceptron: affine layers with ReLU between them and a
/// plain affine output. Evaluated input -> output; sizes()[0] is the input
/// dimension D and sizes().back() the output dimension d.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  /// Weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), biases U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Mlp init(std::span<const int> sizes, std::uint64_t seed);
  /// Stack of `layers` affine maps: input -> hidden x (layers-1) -> output.
  static Mlp uniform_width(int input, int hidden, int output, int layers, std::uint64_t seed);

  Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& X) const;
  Eigen::MatrixXd forward(const Eigen::Ref<const Eigen::MatrixXd>& X, MlpTape& tape) const;

  /// Accumulates gradients of <upstream, output> into `grads`; returns d/dX.
  Eigen::MatrixXd backward(const MlpTape& tape, const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                           MlpGradients& grads) const;

  MlpGradients zero_gradients() const;

  ParamCount param_count() const;

  std::vector<int> sizes() const;
  int input_dim() const;
  int output_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::vector<std::span<double>> parameter_spans();
  static std::vector<std::span<const double>> parameter_spans(const MlpGradients& g);

 private:
  std::vector<DenseLayer> layers_;
};

/// Checkpoint {sizes, layers: [{W (row-major), b}]}.
void to_json(nlohmann::json& j, const Mlp& net);
void from_json(const nlohmann::json& j, Mlp& net);

}  // namespace snowflake
