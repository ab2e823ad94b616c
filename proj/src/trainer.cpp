#include "snowflake/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "snowflake/common.hpp"

namespace snowflake {

namespace {

constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kTestStream = 3;
constexpr std::uint64_t kShuffleStream = 4;
constexpr Eigen::Index kChunk = 1000;

struct Forward {
  Eigen::ArrayXd pred;
  MlpTape enc_tape;
  SnowflakeTape sf_tape;
  Eigen::MatrixXd diff;  // embed x B
  Eigen::ArrayXd radius;
};

Forward run_forward(const PairModel& model, const PairBatch& batch, bool record) {
  Forward f;
  Eigen::ArrayXd base;
  if (model.encoder) {
    require(batch.x.cols() == batch.size() && batch.y.cols() == batch.size(),
            "pair batch is missing point coordinates");
    const Eigen::Index n = batch.size();
    Eigen::MatrixXd stacked(batch.x.rows(), 2 * n);
    stacked << batch.x, batch.y;
    Eigen::MatrixXd z = record ? model.encoder->forward(stacked, f.enc_tape) : model.encoder->forward_batch(stacked);
    f.diff = z.leftCols(n) - z.rightCols(n);
    f.radius = f.diff.colwise().norm().transpose().array();
    base = f.radius;
  } else {
    base = batch.gap;
  }
  if (model.snowflake) {
    f.pred = record ? model.snowflake->forward(base, f.sf_tape) : model.snowflake->forward(base);
  } else {
    f.pred = base;
  }
  return f;
}

template <class Span>
void append(std::vector<Span>& dst, const std::vector<Span>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::MlpOnly: return "mlp_only";
    case ModelKind::SnowflakePlusMlp: return "snowflake_plus_mlp";
    case ModelKind::SnowflakeDirect: return "snowflake_direct";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : kAllModelKinds)
    if (to_string(k) == name) return k;
  if (name == "snowflake") return ModelKind::SnowflakeDirect;
  if (name == "mlp") return ModelKind::MlpOnly;
  throw InvalidArgument("unknown model kind: " + std::string(name));
}

PairModel PairModel::make(ModelKind kind, int ambient_dim, int embed_dim, std::uint64_t seed) {
  require(ambient_dim > 0 && embed_dim > 0, "dimensions must be positive");
  PairModel m;
  m.kind = kind;
  const std::array<int, 3> chain{1, kHiddenWidth, 1};
  const std::array<int, 2> hidden{kHiddenWidth, kHiddenWidth};
  switch (kind) {
    case ModelKind::MlpOnly:
      m.encoder = Mlp::uniform_width(ambient_dim, kHiddenWidth, embed_dim, kStandaloneMlpLayers,
                                     derive_seed(seed, 1));
      break;
    case ModelKind::SnowflakePlusMlp:
      m.encoder = Mlp::uniform_width(ambient_dim, kHiddenWidth, embed_dim, kCompanionMlpLayers,
                                     derive_seed(seed, 1));
      m.snowflake = NeuralSnowflake::init(chain, derive_seed(seed, 2), hidden);
      m.snowflake->set_skip_weight(0.0);
      break;
    case ModelKind::SnowflakeDirect:
      m.snowflake = NeuralSnowflake::init(chain, derive_seed(seed, 2), hidden);
      m.snowflake->set_skip_weight(0.0);
      break;
  }
  return m;
}

double PairModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y) const {
  double r = 0.0;
  if (encoder) {
    r = (encoder->forward(x) - encoder->forward(y)).norm();
  } else {
    require(x.size() == y.size(), "point dimensions differ");
    r = (x - y).norm();
  }
  return snowflake ? snowflake->forward(r) : r;
}

std::size_t PairModel::parameter_count() const {
  std::size_t n = 0;
  if (encoder) n += encoder->param_count().nonzero_params;
  if (snowflake) n += snowflake->parameter_count();
  return n;
}

Eigen::ArrayXd predict(const PairModel& model, const PairBatch& batch) {
  return run_forward(model, batch, false).pred;
}

PairLoss batch_loss(const PairModel& model, const PairBatch& batch) {
  const Eigen::Index n = batch.size();
  require(n > 0, "empty batch");
  require((batch.target >= 0.0).all(), "targets must be non-negative");
  Forward f = run_forward(model, batch, true);

  PairLoss out;
  const Eigen::ArrayXd resid = f.pred - batch.target;
  out.loss = resid.square().mean();
  Eigen::ArrayXd upstream = 2.0 * resid / static_cast<double>(n);

  if (model.snowflake) {
    out.grads.snowflake = model.snowflake->zero_gradients();
    upstream = model.snowflake->backward(f.sf_tape, upstream, *out.grads.snowflake);
  }
  if (model.encoder) {
    Eigen::ArrayXd scale = Eigen::ArrayXd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k)
      if (f.radius[k] > 0.0) scale[k] = upstream[k] / f.radius[k];
    Eigen::MatrixXd d_diff = f.diff * scale.matrix().asDiagonal();
    Eigen::MatrixXd d_out(d_diff.rows(), 2 * n);
    d_out << d_diff, -d_diff;
    out.grads.encoder = model.encoder->zero_gradients();
    model.encoder->backward(f.enc_tape, d_out, *out.grads.encoder);
  }
  return out;
}

PairLoss pair_loss(const PairModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y, double target) {
  require(target >= 0.0, "target must be non-negative");
  require(x.size() == y.size(), "point dimensions differ");
  PairBatch b;
  b.x = x;
  b.y = y;
  b.gap = Eigen::ArrayXd::Constant(1, (x - y).norm());
  b.target = Eigen::ArrayXd::Constant(1, target);
  return batch_loss(model, b);
}

PairBatch PairDataset::gather(std::span<const Eigen::Index> rows) const {
  PairBatch b;
  const auto n = static_cast<Eigen::Index>(rows.size());
  b.gap.resize(n);
  b.target.resize(n);
  if (has_points()) {
    b.x.resize(x.rows(), n);
    b.y.resize(y.rows(), n);
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index r = rows[k];
    b.gap[k] = gap[r];
    b.target[k] = target[r];
    if (has_points()) {
      b.x.col(k) = x.col(r).cast<double>();
      b.y.col(k) = y.col(r).cast<double>();
    }
  }
  return b;
}

PairDataset make_pair_dataset(Eigen::Index pairs, int dim, MetricId metric, std::uint64_t seed,
                              bool keep_points) {
  require(pairs >= 0 && dim > 0, "invalid dataset shape");
  PairDataset d;
  d.gap.resize(pairs);
  d.target.resize(pairs);
  if (keep_points) {
    d.x.resize(dim, pairs);
    d.y.resize(dim, pairs);
  }
  for (Eigen::Index start = 0, c = 0; start < pairs; start += kChunk, ++c) {
    const Eigen::Index len = std::min(kChunk, pairs - start);
    const auto cu = static_cast<std::uint64_t>(c);
    const Eigen::MatrixXf xs = sample_pointcloud(static_cast<int>(len), dim, derive_seed(seed, 2 * cu)).cast<float>();
    const Eigen::MatrixXf ys = sample_pointcloud(static_cast<int>(len), dim, derive_seed(seed, 2 * cu + 1)).cast<float>();
    for (Eigen::Index k = 0; k < len; ++k) {
      const double s = (xs.col(k).cast<double>() - ys.col(k).cast<double>()).norm();
      d.gap[start + k] = s;
      d.target[start + k] = synthetic_target(metric, s);
    }
    if (keep_points) {
      d.x.middleCols(start, len) = xs;
      d.y.middleCols(start, len) = ys;
    }
  }
  return d;
}

void ExperimentConfig::validate() const {
  require(ambient_dim > 0 && embed_dim > 0, "dimensions must be positive");
  require(train_pairs >= 0 && test_pairs > 0, "pair counts must be positive");
  require(batch > 0, "batch must be positive");
  require(epochs >= 0, "epochs must be non-negative");
  require(lr_main > 0.0 && lr_p > 0.0, "learning rates must be positive");
  require(pointcloud == "clamped_gaussian", "unsupported pointcloud: " + pointcloud);
  require(pair_sampling == "independent_pairs", "unsupported pair_sampling: " + pair_sampling);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"metric_id", to_string(c.metric)},
                     {"model_kind", to_string(c.kind)},
                     {"ambient_dim", c.ambient_dim},
                     {"embed_dim", c.embed_dim},
                     {"train_pairs", c.train_pairs},
                     {"test_pairs", c.test_pairs},
                     {"batch", c.batch},
                     {"epochs", c.epochs},
                     {"lr_main", c.lr_main},
                     {"lr_p", c.lr_p},
                     {"seed", c.seed},
                     {"pointcloud", c.pointcloud},
                     {"pair_sampling", c.pair_sampling}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  ExperimentConfig d;
  if (j.contains("metric_id")) d.metric = parse_metric_id(j.at("metric_id").get<std::string>());
  if (j.contains("model_kind")) d.kind = parse_model_kind(j.at("model_kind").get<std::string>());
  d.ambient_dim = j.value("ambient_dim", d.ambient_dim);
  d.embed_dim = j.value("embed_dim", d.embed_dim);
  d.train_pairs = j.value("train_pairs", d.train_pairs);
  d.test_pairs = j.value("test_pairs", d.test_pairs);
  d.batch = j.value("batch", d.batch);
  d.epochs = j.value("epochs", d.epochs);
  d.lr_main = j.value("lr_main", d.lr_main);
  d.lr_p = j.value("lr_p", d.lr_p);
  d.seed = j.value("seed", d.seed);
  d.pointcloud = j.value("pointcloud", d.pointcloud);
  d.pair_sampling = j.value("pair_sampling", d.pair_sampling);
  c = d;
}

void to_json(nlohmann::json& j, const ExperimentReport& r) {
  j = nlohmann::json{{"config", r.config},
                     {"train_mse", r.train_mse},
                     {"test_mse", r.test_mse},
                     {"param_count", r.param_count},
                     {"final_p", r.final_p},
                     {"finite", r.finite}};
}

namespace {

double dataset_mse(const PairModel& model, const PairDataset& data, Eigen::Index batch) {
  if (data.size() == 0) return 0.0;
  double total = 0.0;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index start = 0; start < data.size(); start += batch) {
    const Eigen::Index len = std::min(batch, data.size() - start);
    rows.resize(static_cast<std::size_t>(len));
    std::iota(rows.begin(), rows.end(), start);
    const PairBatch b = data.gather(rows);
    total += (predict(model, b) - b.target).square().sum();
  }
  return total / static_cast<double>(data.size());
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();

  ExperimentReport report;
  report.config = config;
  PairModel model = PairModel::make(config.kind, config.ambient_dim, config.embed_dim,
                                    derive_seed(config.seed, kModelStream));
  report.param_count = model.parameter_count();

  const bool points = model.uses_points();
  const PairDataset train = make_pair_dataset(config.train_pairs, config.ambient_dim, config.metric,
                                              derive_seed(config.seed, kTrainStream), points);
  const PairDataset test = make_pair_dataset(config.test_pairs, config.ambient_dim, config.metric,
                                             derive_seed(config.seed, kTestStream), points);

  AdamState main_state;
  AdamState p_state;
  Rng shuffle(derive_seed(config.seed, kShuffleStream));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (int epoch = 0; epoch < config.epochs && train.size() > 0 && report.finite; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle);
    double sum = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t len = std::min(static_cast<std::size_t>(config.batch), order.size() - start);
      const PairBatch b = train.gather(std::span<const Eigen::Index>(order).subspan(start, len));
      const PairLoss l = batch_loss(model, b);
      if (!std::isfinite(l.loss)) {
        report.finite = false;
        break;
      }
      sum += l.loss;
      ++steps;

      std::vector<std::span<double>> params;
      std::vector<std::span<const double>> grads;
      if (model.encoder) {
        append(params, model.encoder->parameter_spans());
        append(grads, Mlp::parameter_spans(*l.grads.encoder));
      }
      if (model.snowflake) {
        append(params, model.snowflake->weight_spans());
        append(grads, NeuralSnowflake::weight_spans(*l.grads.snowflake));
      }
      adam_step(main_state, params, grads, config.lr_main);

      if (model.snowflake) {
        double p = model.snowflake->p();
        const double dp = l.grads.snowflake->d_p;
        const std::array<std::span<double>, 1> pp{std::span<double>(&p, 1)};
        const std::array<std::span<const double>, 1> gp{std::span<const double>(&dp, 1)};
        adam_step(p_state, pp, gp, config.lr_p);
        model.snowflake->set_p(p);
      }
    }
    if (!report.finite) break;
    const double mean = sum / std::max(steps, 1);
    report.epoch_losses.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }

  report.train_mse = dataset_mse(model, train, config.batch);
  report.test_mse = dataset_mse(model, test, config.batch);
  if (!std::isfinite(report.train_mse) || !std::isfinite(report.test_mse)) report.finite = false;
  if (model.snowflake) report.final_p = model.snowflake->p();
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

double loss_trend_slope(std::span<const double> losses) {
  const auto n = static_cast<double>(losses.size());
  if (losses.size() < 2) return 0.0;
  const double xbar = (n - 1.0) / 2.0;
  const double ybar = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double dx = static_cast<double>(i) - xbar;
    num += dx * (losses[i] - ybar);
    den += dx * dx;
  }
  return num / den;
}

}  // namespace snowflake
