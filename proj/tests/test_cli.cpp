#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "snowflake/commands.hpp"
#include "snowflake/common.hpp"
#include "snowflake/manifest.hpp"

using namespace snowflake;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("snowflake-test-" + name);
  fs::remove_all(p);
  return p;
}

Table2Options tiny_table2() {
  Table2Options o;
  o.base.train_pairs = 300;
  o.base.test_pairs = 100;
  o.base.batch = 100;
  o.base.epochs = 2;
  o.base.ambient_dim = 10;
  return o;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("git blob hashes") {
  CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  const RunManifest a = RunManifest::make("table2", "a.json", nlohmann::json{{"x", 1}, {"y", 2}}, 0);
  const RunManifest b = RunManifest::make("table2", "b.json", nlohmann::json{{"y", 2}, {"x", 1}}, 0);
  CHECK(a.config_hash == b.config_hash);
  CHECK(a.config_hash != RunManifest::make("table2", "", nlohmann::json{{"x", 2}}, 0).config_hash);
}

TEST_CASE("table2 grid, filter and byte-identical reruns") {
  const fs::path dir = scratch("grid");
  const Table2Output out = run_table2(tiny_table2(), dir);
  CHECK(out.reports.size() == 18);
  CHECK(out.exit_code == kExitOk);
  const std::string grid = slurp(dir / "table2.csv");
  CHECK(count_lines(grid) == 1 + 1 + 6);
  CHECK(grid.find("metric_id,mlp_only,snowflake_plus_mlp,snowflake_direct") != std::string::npos);
  CHECK(count_lines(slurp(dir / "results.jsonl")) == 18);
  for (const char* f : {"results.jsonl", "table2.csv", "loss_traces.csv", "timings.jsonl", "manifest.json"})
    CHECK(slurp(dir / f).find(out.manifest.config_hash) != std::string::npos);

  Table2Options one = tiny_table2();
  one.metrics = {MetricId::M3};
  one.models = {ModelKind::SnowflakeDirect};
  const fs::path d1 = scratch("one"), d2 = scratch("two");
  const Table2Output first = run_table2(one, d1);
  one.workers = 2;
  run_table2(one, d2);
  CHECK(first.reports.size() == 1);
  for (const char* f : {"results.jsonl", "table2.csv", "loss_traces.csv"}) CHECK(slurp(d1 / f) == slurp(d2 / f));
}

TEST_CASE("config precedence: file then flags") {
  Table2Options o;
  apply_config_json(nlohmann::json{{"epochs", 7}, {"train_pairs", 1000}, {"metrics", {"M2"}}}, o);
  apply_config_json(nlohmann::json{{"epochs", 3}}, o);
  CHECK(o.base.epochs == 3);
  CHECK(o.base.train_pairs == 1000);
  CHECK(o.metrics == std::vector<MetricId>{MetricId::M2});
  CHECK_THROWS_AS(apply_config_json(nlohmann::json{{"metrics", {"M9"}}}, o), InvalidArgument);
  CHECK_THROWS(apply_config_json(nlohmann::json{{"epochs", "many"}}, o));
  CHECK_THROWS_AS(apply_config_json(nlohmann::json::array(), o), InvalidArgument);
}

TEST_CASE("results directory resolution") {
  CHECK(results_directory("explicit") == fs::path("explicit"));
  setenv("SNOWFLAKE_RESULTS_DIR", "/tmp/from-env", 1);
  CHECK(results_directory("") == fs::path("/tmp/from-env"));
  unsetenv("SNOWFLAKE_RESULTS_DIR");
  CHECK(results_directory("") == fs::path("results"));
}

TEST_CASE("latent-graph command") {
  LatentGraphOptions o;
  o.base.num_nodes = 60;
  o.base.epochs = 3;
  apply_config_json(nlohmann::json{{"similarity_spaces", {"euclidean", "snowflake"}}}, o);
  const fs::path d1 = scratch("lg1"), d2 = scratch("lg2");
  const LatentGraphOutput a = run_latent_graph_command(o, d1);
  CHECK(a.reports.size() == 2);
  CHECK(a.reports[0].runs.size() == 10);
  CHECK(count_lines(slurp(d1 / "results.jsonl")) == 2);
  const auto line = nlohmann::json::parse(slurp(d1 / "results.jsonl").substr(0, slurp(d1 / "results.jsonl").find('\n')));
  CHECK(line.contains("mean_accuracy"));
  CHECK(line.contains("std_accuracy"));
  CHECK(line.at("manifest") == a.manifest.config_hash);
  o.workers = 3;
  run_latent_graph_command(o, d2);
  CHECK(slurp(d1 / "results.jsonl") == slurp(d2 / "results.jsonl"));
  CHECK(slurp(d1 / "latent_loss_traces.csv") == slurp(d2 / "latent_loss_traces.csv"));
}

TEST_CASE("embed command") {
  const fs::path dir = scratch("embed");
  const EmbedOutput ok = run_embed_command(cycle_graph(4), 0.0, dir);
  CHECK(ok.result.at("feasible") == true);
  CHECK(fs::exists(dir / "embedding.json"));
  const EmbedOutput bad = run_embed_command(cycle_graph(4), 1.0, dir);
  CHECK(bad.result.at("feasible") == false);
}

TEST_CASE("parallel_for propagates failures") {
  std::vector<int> out(8, 0);
  parallel_for(8, 3, [&](std::size_t i) { out[i] = static_cast<int>(i) * 2; });
  CHECK(out[7] == 14);
  CHECK_THROWS(parallel_for(4, 2, [](std::size_t i) {
    if (i == 2) throw NumericError("boom");
  }));
}
