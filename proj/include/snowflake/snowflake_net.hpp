#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace snowflake {

/// One layer t_i = |B| (sigma_{a,b}(|A| t_{i-1}) |C|).
///
/// Weights are stored raw; the forward pass uses their absolute values so the
/// effective weights stay non-negative while the optimizer moves freely.
/// a and b are fixed at 1 during training.
struct SnowflakeLayer {
  Eigen::MatrixXd A;  // hidden x input
  Eigen::MatrixXd B;  // output x hidden
  Eigen::Vector3d C = Eigen::Vector3d::Zero();
  double a = 1.0;
  double b = 1.0;

  Eigen::Index input_dim() const { return A.cols(); }
  Eigen::Index hidden_dim() const { return A.rows(); }
  Eigen::Index output_dim() const { return B.rows(); }
};

/// Rows (1 - e^{-|u_j|}, |u_j|^a, log(1 + |u_j|)^b) for each entry of u.
Eigen::MatrixXd tensorized_activation(const Eigen::Ref<const Eigen::VectorXd>& u, double a, double b);

struct SnowflakeLayerGradients {
  Eigen::MatrixXd d_A;
  Eigen::MatrixXd d_B;
  Eigen::Vector3d d_C = Eigen::Vector3d::Zero();
};

struct SnowflakeGradients {
  std::vector<SnowflakeLayerGradients> layers;
  double d_p = 0.0;
  double d_skip = 0.0;
  double d_input = 0.0;  // only filled by the scalar backward()
};

/// Intermediate values recorded by a batched forward pass.
struct SnowflakeTape {
  struct Layer {
    Eigen::MatrixXd input;  // d_in x batch
    Eigen::ArrayXXd u;      // hidden x batch, |A| input
    Eigen::ArrayXXd bounded, fractal, irregular;
    Eigen::MatrixXd mixed;  // hidden x batch, contraction with |C|
  };
  std::vector<Layer> layers;
  Eigen::ArrayXd t;       // network input
  Eigen::ArrayXd last;    // t_I
  Eigen::ArrayXd raw;     // t_I^{1+|p|}
};

class NeuralSnowflake {
 public:
  NeuralSnowflake() = default;
  NeuralSnowflake(std::vector<SnowflakeLayer> layers, double p, double skip_weight);

  /// Random initialization: every raw weight of an r x c matrix is drawn from
  /// U[0, 1/(r c)], p = 1e-8, skip weight 0.5. `hidden` gives the inner width of
  /// each layer; by default max(d_{i-1}, d_i).
  static NeuralSnowflake init(std::span<const int> dim_chain, std::uint64_t seed,
                              std::span<const int> hidden = {});

  /// Single layer with A = B = (1), C = (0, 1, 0): f(t) = t^{1+|p|}.
  static NeuralSnowflake power(double p);

  double forward(double t) const;
  Eigen::ArrayXd forward(const Eigen::ArrayXd& t) const;
  Eigen::ArrayXd forward(const Eigen::ArrayXd& t, SnowflakeTape& tape) const;

  /// Gradients of f(t) with respect to every raw parameter and t.
  SnowflakeGradients backward(double t) const;

  /// Accumulates sum_k upstream_k * d f(t_k) into `grads` (shaped by zero_gradients()).
  /// Returns d/dt_k weighted by upstream_k.
  Eigen::ArrayXd backward(const SnowflakeTape& tape, const Eigen::ArrayXd& upstream,
                          SnowflakeGradients& grads) const;

  SnowflakeGradients zero_gradients() const;

  const std::vector<SnowflakeLayer>& layers() const { return layers_; }
  std::vector<SnowflakeLayer>& layers() { return layers_; }
  double p() const { return p_; }
  void set_p(double p) { p_ = p; }
  double skip_weight() const { return skip_weight_; }
  /// Clamps into [0, 1].
  void set_skip_weight(double w);
  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  double exponent() const;
  /// 2^{|p|}: relaxed triangle constant of the outer (1+|p|) power.
  double relaxed_triangle_constant() const;

  std::vector<int> dim_chain() const;
  std::vector<int> hidden_dims() const;
  /// Number of trainable scalars: all A, B, C entries plus p.
  std::size_t parameter_count() const;

  /// Raw A, B, C blocks in layer order (the main optimizer group, skip excluded).
  std::vector<std::span<double>> weight_spans();
  static std::vector<std::span<const double>> weight_spans(const SnowflakeGradients& g);

 private:
  void check_chain() const;

  std::vector<SnowflakeLayer> layers_;
  double p_ = 0.0;
  double skip_weight_ = 0.0;
  std::uint64_t seed_ = 0;
};

/// f(||x - y||).
double snowflake_metric(const NeuralSnowflake& net, const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& y);

/// Checkpoint {dim_chain, hidden, layers: [{A, B, C, a, b}], p, skip_weight, seed};
/// matrices row-major. Doubles round-trip exactly.
void to_json(nlohmann::json& j, const NeuralSnowflake& net);
void from_json(const nlohmann::json& j, NeuralSnowflake& net);

}  // namespace snowflake
