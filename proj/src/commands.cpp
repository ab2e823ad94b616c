#include "snowflake/commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "snowflake/common.hpp"
#include "snowflake/embedding.hpp"

namespace snowflake {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void write_manifest(const fs::path& dir, const RunManifest& m) {
  write_file(dir / "manifest.json", nlohmann::json(m).dump(2) + "\n");
}

template <class T>
std::vector<std::string> names(const std::vector<T>& items) {
  std::vector<std::string> out;
  for (const auto& i : items) out.push_back(to_string(i));
  return out;
}

}  // namespace

fs::path results_directory(const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv("SNOWFLAKE_RESULTS_DIR"); env && *env) return env;
  return "results";
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), count);
  std::vector<std::exception_ptr> errors(count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            job(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

nlohmann::json to_config_json(const Table2Options& o) {
  nlohmann::json j = o.base;
  j.erase("metric_id");
  j.erase("model_kind");
  j.erase("seed");
  j["metrics"] = names(o.metrics);
  j["models"] = names(o.models);
  j["seeds"] = o.seeds;
  return j;
}

void apply_config_json(const nlohmann::json& j, Table2Options& o) {
  require(j.is_object(), "config must be a JSON object");
  nlohmann::json merged = o.base;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (merged.contains(it.key())) merged[it.key()] = it.value();
  o.base = merged.get<ExperimentConfig>();
  if (j.contains("metrics")) {
    o.metrics.clear();
    for (const auto& m : j.at("metrics")) o.metrics.push_back(parse_metric_id(m.get<std::string>()));
  }
  if (j.contains("models")) {
    o.models.clear();
    for (const auto& m : j.at("models")) o.models.push_back(parse_model_kind(m.get<std::string>()));
  }
  if (j.contains("seeds")) o.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("seed") && !j.contains("seeds")) o.seeds = {j.at("seed").get<std::uint64_t>()};
  if (j.contains("workers")) o.workers = j.at("workers").get<int>();
}

Table2Output run_table2(const Table2Options& options, const fs::path& out_dir, const std::string& config_path,
                        std::ostream* log) {
  require(!options.metrics.empty() && !options.models.empty() && !options.seeds.empty(),
          "table2 needs at least one metric, model and seed");
  options.base.validate();
  fs::create_directories(out_dir);

  Table2Output out;
  out.manifest = RunManifest::make("table2", config_path, to_config_json(options), options.seeds.front());
  out.manifest.outputs = {"results.jsonl", "table2.csv", "loss_traces.csv", "timings.jsonl", "manifest.json"};
  const std::string& hash = out.manifest.config_hash;

  std::vector<ExperimentConfig> jobs;
  for (MetricId m : options.metrics)
    for (ModelKind k : options.models)
      for (std::uint64_t s : options.seeds) {
        ExperimentConfig c = options.base;
        c.metric = m;
        c.kind = k;
        c.seed = s;
        jobs.push_back(c);
      }
  out.reports.resize(jobs.size());
  std::mutex log_mutex;
  parallel_for(jobs.size(), options.workers, [&](std::size_t i) {
    out.reports[i] = run_experiment(jobs[i]);
    if (log) {
      std::lock_guard lock(log_mutex);
      *log << to_string(jobs[i].metric) << ' ' << to_string(jobs[i].kind) << " seed " << jobs[i].seed
           << ": test_mse " << out.reports[i].test_mse << " (" << std::fixed << std::setprecision(1)
           << out.reports[i].wall_time << " s)" << std::defaultfloat << std::setprecision(6) << '\n';
    }
  });

  std::string results, timings;
  std::ostringstream traces;
  traces << "# manifest " << hash << "\nmetric_id,model_kind,seed,epoch,loss\n";
  for (const ExperimentReport& r : out.reports) {
    nlohmann::json line = r;
    line["manifest"] = hash;
    results += line.dump() + "\n";
    timings += nlohmann::json{{"manifest", hash},
                              {"metric_id", to_string(r.config.metric)},
                              {"model_kind", to_string(r.config.kind)},
                              {"seed", r.config.seed},
                              {"wall_time", r.wall_time}}
                   .dump() +
               "\n";
    for (std::size_t e = 0; e < r.epoch_losses.size(); ++e)
      traces << to_string(r.config.metric) << ',' << to_string(r.config.kind) << ',' << r.config.seed << ','
             << e + 1 << ',' << num(r.epoch_losses[e]) << '\n';
    if (!r.finite) out.exit_code = kExitNumeric;
  }

  std::ostringstream grid;
  grid << "# manifest " << hash << "\nmetric_id";
  for (ModelKind k : options.models) grid << ',' << to_string(k);
  grid << '\n';
  std::size_t idx = 0;
  for (MetricId m : options.metrics) {
    grid << to_string(m);
    for (std::size_t k = 0; k < options.models.size(); ++k) {
      double sum = 0.0;
      for (std::size_t s = 0; s < options.seeds.size(); ++s) sum += out.reports[idx++].test_mse;
      grid << ',' << num(sum / static_cast<double>(options.seeds.size()));
    }
    grid << '\n';
  }

  write_file(out_dir / "results.jsonl", results);
  write_file(out_dir / "table2.csv", grid.str());
  write_file(out_dir / "loss_traces.csv", traces.str());
  write_file(out_dir / "timings.jsonl", timings);
  write_manifest(out_dir, out.manifest);
  return out;
}

nlohmann::json to_config_json(const LatentGraphOptions& o) {
  nlohmann::json j = o.base;
  j.erase("similarity_space");
  j["similarity_spaces"] = names(o.spaces);
  return j;
}

void apply_config_json(const nlohmann::json& j, LatentGraphOptions& o) {
  require(j.is_object(), "config must be a JSON object");
  nlohmann::json merged = o.base;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (merged.contains(it.key()) && it.key() != "phi") merged[it.key()] = it.value();
  o.base = merged.get<LatentGraphConfig>();
  auto spaces_from = [&](const nlohmann::json& v) {
    o.spaces.clear();
    if (v.is_string()) {
      o.spaces.push_back(parse_similarity_space(v.get<std::string>()));
    } else {
      for (const auto& s : v) o.spaces.push_back(parse_similarity_space(s.get<std::string>()));
    }
  };
  if (j.contains("similarity_spaces")) spaces_from(j.at("similarity_spaces"));
  else if (j.contains("similarity_space")) spaces_from(j.at("similarity_space"));
  if (j.contains("workers")) o.workers = j.at("workers").get<int>();
}

LatentGraphOutput run_latent_graph_command(const LatentGraphOptions& options, const fs::path& out_dir,
                                           const std::string& config_path, std::ostream* log) {
  require(!options.spaces.empty(), "latent-graph needs at least one similarity space");
  options.base.validate();
  fs::create_directories(out_dir);

  LatentGraphOutput out;
  out.manifest = RunManifest::make("latent-graph", config_path, to_config_json(options), options.base.data_seed);
  out.manifest.outputs = {"results.jsonl", "latent_loss_traces.csv", "manifest.json"};
  const std::string& hash = out.manifest.config_hash;

  const LatentGraphConfig& base = options.base;
  const LabeledCloud data = make_blobs(base.num_nodes, base.num_features, base.num_classes, base.cluster_spread,
                                       base.class_separation, base.data_seed);
  const std::size_t per = base.seeds.size();
  std::vector<LatentGraphRun> runs(options.spaces.size() * per);
  parallel_for(runs.size(), options.workers, [&](std::size_t i) {
    LatentGraphConfig c = base;
    c.similarity_space = options.spaces[i / per];
    runs[i] = run_latent_graph_split(c, data, base.seeds[i % per]);
  });

  std::string results;
  std::ostringstream traces;
  traces << "# manifest " << hash << "\nsimilarity_space,seed,epoch,loss\n";
  for (std::size_t s = 0; s < options.spaces.size(); ++s) {
    LatentGraphReport r;
    r.config = base;
    r.config.similarity_space = options.spaces[s];
    std::vector<double> acc;
    for (std::size_t k = 0; k < per; ++k) {
      const LatentGraphRun& run = runs[s * per + k];
      r.runs.push_back(run);
      r.finite = r.finite && run.finite;
      acc.push_back(run.accuracy);
      for (std::size_t e = 0; e < run.losses.size(); ++e)
        traces << to_string(options.spaces[s]) << ',' << run.seed << ',' << e + 1 << ',' << num(run.losses[e])
               << '\n';
    }
    double mean = 0.0;
    for (double a : acc) mean += a;
    mean /= static_cast<double>(acc.size());
    double ss = 0.0;
    for (double a : acc) ss += (a - mean) * (a - mean);
    r.mean_accuracy = mean;
    r.std_accuracy = acc.size() > 1 ? std::sqrt(ss / static_cast<double>(acc.size() - 1)) : 0.0;
    if (!r.finite) out.exit_code = kExitNumeric;
    if (log)
      *log << to_string(options.spaces[s]) << ": accuracy " << r.mean_accuracy << " +- " << r.std_accuracy << '\n';
    nlohmann::json line = r;
    line["manifest"] = hash;
    results += line.dump() + "\n";
    out.reports.push_back(std::move(r));
  }
  write_file(out_dir / "results.jsonl", results);
  write_file(out_dir / "latent_loss_traces.csv", traces.str());
  write_manifest(out_dir, out.manifest);
  return out;
}

EmbedOutput run_embed_command(const WeightedGraph& graph, double epsilon, const fs::path& out_dir,
                              const std::string& graph_path) {
  graph.validate();
  require(graph.is_connected(), "graph must be connected");
  fs::create_directories(out_dir);
  const double eps = epsilon > 0.0 ? epsilon : critical_exponent(graph.num_nodes(), graph.is_tree());

  EmbedOutput out;
  out.manifest = RunManifest::make("embed", graph_path, nlohmann::json{{"graph", graph}, {"epsilon", eps}}, 0);
  out.manifest.outputs = {"embedding.json", "manifest.json"};

  const DistanceMatrix d = geodesic_distances(graph);
  const EmbedOutcome outcome = schoenberg_embed(d, eps);
  if (const auto* ok = std::get_if<EmbeddingResult>(&outcome)) {
    out.result = *ok;
    out.result["feasible"] = true;
  } else {
    const auto& bad = std::get<Infeasible>(outcome);
    out.result = {{"feasible", false},
                  {"epsilon", eps},
                  {"min_eigenvalue", bad.min_eigenvalue},
                  {"max_eigenvalue", bad.max_eigenvalue}};
  }
  out.result["aspect_ratio"] = aspect_ratio(d);
  out.result["manifest"] = out.manifest.config_hash;
  write_file(out_dir / "embedding.json", out.result.dump(2) + "\n");
  write_manifest(out_dir, out.manifest);
  return out;
}

}  // namespace snowflake
