#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "snowflake/graphs.hpp"
#include "snowflake/latent_graph.hpp"
#include "snowflake/manifest.hpp"
#include "snowflake/trainer.hpp"

namespace snowflake {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitSuiteFailure = 2, kExitNumeric = 3 };

/// Results directory: `explicit_dir` if set, else $SNOWFLAKE_RESULTS_DIR, else "results".
std::filesystem::path results_directory(const std::string& explicit_dir);

struct Table2Options {
  ExperimentConfig base;
  std::vector<MetricId> metrics{kAllMetrics.begin(), kAllMetrics.end()};
  std::vector<ModelKind> models{kAllModelKinds.begin(), kAllModelKinds.end()};
  std::vector<std::uint64_t> seeds{0};
  int workers = 1;
};

/// Effective config document (the hashed part of the manifest).
nlohmann::json to_config_json(const Table2Options& o);
/// Fields absent from `j` keep the values already in `o`.
void apply_config_json(const nlohmann::json& j, Table2Options& o);

struct Table2Output {
  RunManifest manifest;
  std::vector<ExperimentReport> reports;  // metric-major, then model, then seed
  int exit_code = kExitOk;
};

/// Runs every (metric, model, seed) cell and writes results.jsonl, table2.csv,
/// loss_traces.csv, timings.jsonl and manifest.json into `out_dir`.
Table2Output run_table2(const Table2Options& options, const std::filesystem::path& out_dir,
                        const std::string& config_path = {}, std::ostream* log = nullptr);

struct LatentGraphOptions {
  LatentGraphConfig base;
  std::vector<SimilaritySpace> spaces{SimilaritySpace::Euclidean, SimilaritySpace::NeuralSnowflake};
  int workers = 1;
};

nlohmann::json to_config_json(const LatentGraphOptions& o);
void apply_config_json(const nlohmann::json& j, LatentGraphOptions& o);

struct LatentGraphOutput {
  RunManifest manifest;
  std::vector<LatentGraphReport> reports;  // one per similarity space
  int exit_code = kExitOk;
};

/// Writes results.jsonl (one line per similarity space), latent_loss_traces.csv and manifest.json.
LatentGraphOutput run_latent_graph_command(const LatentGraphOptions& options, const std::filesystem::path& out_dir,
                                           const std::string& config_path = {}, std::ostream* log = nullptr);

struct EmbedOutput {
  RunManifest manifest;
  nlohmann::json result;
  int exit_code = kExitOk;
};

/// Embeds the epsilon-snowflake of the graph's geodesic metric (epsilon <= 0
/// selects the critical exponent) and writes embedding.json and manifest.json.
EmbedOutput run_embed_command(const WeightedGraph& graph, double epsilon, const std::filesystem::path& out_dir,
                              const std::string& graph_path = {});

/// Runs `count` independent jobs over `workers` threads; job(i) must only touch slot i.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job);

}  // namespace snowflake
