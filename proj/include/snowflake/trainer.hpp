#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "snowflake/graphs.hpp"
#include "snowflake/mlp.hpp"
#include "snowflake/optim.hpp"
#include "snowflake/snowflake_net.hpp"

namespace snowflake {

/// How a pair (x, y) is mapped to a predicted distance:
///   mlp_only            ||E(x) - E(y)||        E: 10 affine layers, width 20, R^100 -> R^2
///   snowflake_plus_mlp  f(||E(x) - E(y)||)     E: 5 affine layers, width 20
///   snowflake_direct    f(||x - y||)
/// f is a 2-layer neural snowflake with hidden width 20.
enum class ModelKind { MlpOnly, SnowflakePlusMlp, SnowflakeDirect };

inline constexpr std::array<ModelKind, 3> kAllModelKinds{ModelKind::MlpOnly, ModelKind::SnowflakePlusMlp,
                                                         ModelKind::SnowflakeDirect};

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

inline constexpr int kStandaloneMlpLayers = 10;
inline constexpr int kCompanionMlpLayers = 5;
inline constexpr int kHiddenWidth = 20;

struct PairModel {
  ModelKind kind = ModelKind::SnowflakeDirect;
  std::optional<Mlp> encoder;
  std::optional<NeuralSnowflake> snowflake;

  /// Standard architecture for `kind`; the snowflake's skip weight is 0.
  static PairModel make(ModelKind kind, int ambient_dim, int embed_dim, std::uint64_t seed);

  bool uses_points() const { return encoder.has_value(); }
  double predict(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) const;
  std::size_t parameter_count() const;
};

/// A batch of pairs. `gap` = ||x - y|| is always set; x and y (points as
/// columns) only when the model has an encoder.
struct PairBatch {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
  Eigen::ArrayXd gap;
  Eigen::ArrayXd target;
  Eigen::Index size() const { return target.size(); }
};

struct PairGradients {
  std::optional<MlpGradients> encoder;
  std::optional<SnowflakeGradients> snowflake;
};

struct PairLoss {
  double loss = 0.0;
  PairGradients grads;
};

Eigen::ArrayXd predict(const PairModel& model, const PairBatch& batch);

/// Mean of (prediction - target)^2 over the batch and its gradients.
PairLoss batch_loss(const PairModel& model, const PairBatch& batch);

/// (prediction - target)^2 for a single pair.
PairLoss pair_loss(const PairModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y, double target);

/// Pairs of fresh clamped-Gaussian points with targets. Coordinates are kept
/// in single precision, and gaps and targets are computed from the stored values.
struct PairDataset {
  Eigen::MatrixXf x;
  Eigen::MatrixXf y;
  Eigen::ArrayXd gap;
  Eigen::ArrayXd target;
  Eigen::Index size() const { return target.size(); }
  bool has_points() const { return x.cols() > 0; }

  PairBatch gather(std::span<const Eigen::Index> rows) const;
};

PairDataset make_pair_dataset(Eigen::Index pairs, int dim, MetricId metric, std::uint64_t seed,
                              bool keep_points);

struct ExperimentConfig {
  MetricId metric = MetricId::M1;
  ModelKind kind = ModelKind::SnowflakeDirect;
  int ambient_dim = 100;
  int embed_dim = 2;
  Eigen::Index train_pairs = 200000;
  Eigen::Index test_pairs = 10000;
  Eigen::Index batch = 1000;
  int epochs = 40;
  double lr_main = 1e-4;
  double lr_p = 1e-4;
  std::uint64_t seed = 0;
  std::string pointcloud = "clamped_gaussian";
  std::string pair_sampling = "independent_pairs";

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

struct ExperimentReport {
  ExperimentConfig config;
  double train_mse = 0.0;
  double test_mse = 0.0;
  std::size_t param_count = 0;
  double final_p = 0.0;              // raw p of the snowflake, 0 without one
  bool finite = true;                // every loss seen was finite
  std::vector<double> epoch_losses;  // mean training batch loss per epoch
  double wall_time = 0.0;            // seconds; not serialized with results
};

/// Results-file record: config echo, MSEs, parameter count, final p, finiteness.
void to_json(nlohmann::json& j, const ExperimentReport& r);

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Trains the configured model on resampled pairs with Adam (main weights at
/// lr_main, the snowflake exponent p in its own Adam group at lr_p) and reports
/// train/test MSE. Deterministic for a given config.
ExperimentReport run_experiment(const ExperimentConfig& config, const EpochCallback& on_epoch = {});

/// Least-squares slope of the losses against their index.
double loss_trend_slope(std::span<const double> losses);

}  // namespace snowflake
