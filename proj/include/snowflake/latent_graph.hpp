#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "snowflake/mlp.hpp"
#include "snowflake/quasimetric.hpp"
#include "snowflake/snowflake_net.hpp"

namespace snowflake {

// Node-indexed quantities in this module are stored one node per row.

enum class SimilaritySpace { Euclidean, SnowflakeActivation, NeuralSnowflake };

std::string to_string(SimilaritySpace s);
/// Accepts "euclidean", "snowflake_activation", "neural_snowflake" and "snowflake"
/// (the neural snowflake).
SimilaritySpace parse_similarity_space(std::string_view name);

/// log p_ij = -T * dist(x_i, x_j)^2 with T = exp(log_temperature).
struct EdgeProbabilityModel {
  SimilaritySpace space = SimilaritySpace::Euclidean;
  double log_temperature = 0.0;
  SnowflakeActivation activation;
  NeuralSnowflake net;

  double temperature() const;
  double distance(double r) const;  // dist as a function of ||x_i - x_j||
};

/// n x n log-probabilities for embeddings (n x latent). The diagonal is -inf so
/// a node never samples itself.
Eigen::MatrixXd edge_log_probs(const EdgeProbabilityModel& model, const Eigen::Ref<const Eigen::MatrixXd>& embeddings);

struct EdgeModelGradients {
  Eigen::MatrixXd d_embeddings;
  double d_log_temperature = 0.0;
  std::array<double, 3> d_c_raw{};  // snowflake_activation
  double d_p_raw = 0.0;              // snowflake_activation
  SnowflakeGradients net;            // neural_snowflake
};

/// Gradients of sum_ij upstream_ij * log p_ij. Diagonal entries of `upstream` are ignored.
EdgeModelGradients edge_log_probs_backward(const EdgeProbabilityModel& model,
                                           const Eigen::Ref<const Eigen::MatrixXd>& embeddings,
                                           const Eigen::Ref<const Eigen::MatrixXd>& upstream);

/// Indices of the k largest keys log_probs_row_j - log(-log noise_j), largest first.
/// Ties are broken by the lower index.
std::vector<int> gumbel_top_k(const Eigen::Ref<const Eigen::VectorXd>& log_probs_row, int k,
                              const Eigen::Ref<const Eigen::VectorXd>& noise);

/// E(ac) - ac with ac = 1 on a correct prediction.
double reward(int y_true, int y_pred, double expected_accuracy);

/// beta * expected + (1 - beta) * ac.
double update_running_accuracy(double expected_accuracy, int ac, double beta = 0.9);

struct RunningAccuracy {
  std::vector<double> expected;
  double beta = 0.9;

  explicit RunningAccuracy(std::size_t n = 0) : expected(n, 0.5) {}
  void update(std::size_t i, int ac) { expected.at(i) = update_running_accuracy(expected.at(i), ac, beta); }
};

using EdgeList = std::vector<std::pair<int, int>>;

struct GraphLearningLoss {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> d_log_probs;
};

/// sum_i rewards_i * sum_l sum_{(i,j) in edges_l} log_probs_l(i, j) and its gradient.
GraphLearningLoss graph_learning_loss(const Eigen::Ref<const Eigen::VectorXd>& rewards,
                                      const std::vector<EdgeList>& sampled_edges,
                                      const std::vector<Eigen::MatrixXd>& log_probs);

/// Neighbor lists (node i receives from neighbors[i]) as a flat edge list.
EdgeList to_edge_list(const std::vector<std::vector<int>>& neighbors);

/// h'_i = act(mean_{j in N(i) + {i}} h_j W^T + h_i R^T + b).
/// R (the root weight) is optional; with R empty and b = 0 this is plain mean aggregation.
struct GcnLayer {
  Eigen::MatrixXd W;     // out x in
  Eigen::MatrixXd root;  // out x in, or empty
  Eigen::VectorXd bias;  // out, or empty
  bool elu = true;

  static GcnLayer init(int in, int out, bool with_root, bool elu, std::uint64_t seed);
  Eigen::Index input_dim() const { return W.cols(); }
  Eigen::Index output_dim() const { return W.rows(); }
};

struct GcnTape {
  Eigen::MatrixXd input;
  Eigen::MatrixXd aggregated;
  Eigen::MatrixXd pre_activation;
  std::vector<std::vector<int>> neighbors;
};

struct GcnGradients {
  Eigen::MatrixXd d_W;
  Eigen::MatrixXd d_root;
  Eigen::VectorXd d_bias;
};

Eigen::MatrixXd gcn_forward(const GcnLayer& layer, const Eigen::Ref<const Eigen::MatrixXd>& features,
                            const std::vector<std::vector<int>>& neighbors, GcnTape* tape = nullptr);

/// Accumulates parameter gradients of <upstream, output> into `grads`; returns d/dfeatures.
Eigen::MatrixXd gcn_backward(const GcnLayer& layer, const GcnTape& tape, const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                             GcnGradients& grads);

GcnGradients zero_gradients(const GcnLayer& layer);

struct LatentGraphConfig {
  SimilaritySpace similarity_space = SimilaritySpace::NeuralSnowflake;
  int k = 7;
  int latent_dim = 4;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int epochs = 100;
  int num_nodes = 300;
  int num_features = 16;
  int num_classes = 3;
  double cluster_spread = 1.0;
  double class_separation = 3.0;
  double train_fraction = 0.5;
  int hidden = 16;
  double lr = 1e-2;
  double lr_p = 1e-4;
  std::uint64_t data_seed = 0;
  bool gl_into_encoder = false;
  bool root_weight = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const LatentGraphConfig& c);
void from_json(const nlohmann::json& j, LatentGraphConfig& c);

struct LabeledCloud {
  Eigen::MatrixXd features;  // n x F
  std::vector<int> labels;
  int num_classes = 0;
};

/// Gaussian class blobs: centers ~ separation * N(0, I), points ~ center + spread * N(0, I).
LabeledCloud make_blobs(int n, int features, int classes, double spread, double separation, std::uint64_t seed);

struct LatentGraphRun {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  std::vector<double> losses;  // training cross-entropy per epoch
  bool finite = true;
};

struct LatentGraphReport {
  LatentGraphConfig config;
  std::vector<LatentGraphRun> runs;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  bool finite = true;
};

/// One split: train/test partition, model initialization and edge sampling all
/// derive from `seed`.
LatentGraphRun run_latent_graph_split(const LatentGraphConfig& config, const LabeledCloud& data, std::uint64_t seed);

/// Runs every seed of the config on one blob dataset and summarizes test accuracy.
LatentGraphReport run_latent_graph_experiment(const LatentGraphConfig& config);

void to_json(nlohmann::json& j, const LatentGraphReport& r);

}  // namespace snowflake
