#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "snowflake/commands.hpp"
#include "snowflake/common.hpp"
#include "snowflake/verify.hpp"

using namespace snowflake;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

template <class T>
void set_if(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

std::vector<std::uint64_t> parse_seed_list(const std::vector<std::string>& items) {
  std::vector<std::uint64_t> out;
  for (const auto& s : items) out.push_back(std::stoull(s));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural snowflake metric learning experiments"};
  app.require_subcommand(1);

  std::string out_dir;
  int workers = 1;

  // table2
  auto* t2 = app.add_subcommand("table2", "Synthetic metric-embedding grid (metric x model)");
  std::string t2_config;
  std::vector<std::string> t2_metrics, t2_models, t2_seeds;
  std::optional<long long> t2_train, t2_test, t2_batch;
  std::optional<int> t2_epochs;
  std::optional<double> t2_lr_main, t2_lr_p;
  t2->add_option("config,--config", t2_config, "JSON config file")->check(CLI::ExistingFile);
  t2->add_option("--metrics", t2_metrics, "Subset of M1..M6")->delimiter(',');
  t2->add_option("--models", t2_models, "Subset of mlp_only, snowflake_plus_mlp, snowflake_direct")->delimiter(',');
  t2->add_option("--seeds", t2_seeds, "Seed list")->delimiter(',');
  t2->add_option("--train-pairs", t2_train);
  t2->add_option("--test-pairs", t2_test);
  t2->add_option("--batch", t2_batch);
  t2->add_option("--epochs", t2_epochs);
  t2->add_option("--lr-main", t2_lr_main);
  t2->add_option("--lr-p", t2_lr_p);
  bool paper_scale = false;
  t2->add_flag("--paper-scale", paper_scale, "4,000,000 training pairs");

  // verify
  auto* vf = app.add_subcommand("verify", "Run an oracle/property suite");
  std::string suite;
  std::uint64_t verify_seed = 0;
  vf->add_option("suite", suite, "metric-axioms | thm1-universality | gradients")->required();
  vf->add_option("--seed", verify_seed);

  // latent-graph
  auto* lg = app.add_subcommand("latent-graph", "Latent graph inference on synthetic blobs");
  std::string lg_config;
  std::vector<std::string> lg_spaces, lg_seeds;
  std::optional<int> lg_k, lg_latent, lg_epochs, lg_nodes, lg_classes;
  std::optional<double> lg_lr;
  std::optional<bool> lg_gl_encoder;
  lg->add_option("config,--config", lg_config, "JSON config file")->check(CLI::ExistingFile);
  lg->add_option("--similarity", lg_spaces, "euclidean, snowflake_activation, neural_snowflake (alias snowflake)")
      ->delimiter(',');
  lg->add_option("--seeds", lg_seeds, "Seed list")->delimiter(',');
  lg->add_option("--k", lg_k);
  lg->add_option("--latent-dim", lg_latent);
  lg->add_option("--epochs", lg_epochs);
  lg->add_option("--nodes", lg_nodes);
  lg->add_option("--classes", lg_classes);
  lg->add_option("--lr", lg_lr);
  lg->add_flag("--gl-into-encoder{true},--no-gl-into-encoder{false}", lg_gl_encoder,
               "Let the graph-learning loss reach the shared encoder");

  // embed
  auto* em = app.add_subcommand("embed", "Euclidean embedding of a graph metric snowflake");
  std::string graph_path;
  double epsilon = 0.0;
  em->add_option("graph", graph_path, "Graph JSON {coords, edges, weights}")->required()->check(CLI::ExistingFile);
  em->add_option("--epsilon", epsilon, "Snowflake exponent; default is the critical exponent");

  for (auto* sub : {t2, vf, lg, em}) sub->add_option("--out", out_dir, "Output directory");
  for (auto* sub : {t2, lg}) sub->add_option("--workers", workers, "Concurrent runs")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const auto dir = results_directory(out_dir);
    if (*t2) {
      Table2Options o;
      if (!t2_config.empty()) apply_config_json(read_json_file(t2_config), o);
      json flags = json::object();
      if (paper_scale) flags["train_pairs"] = 4000000;
      set_if(flags, "train_pairs", t2_train);
      set_if(flags, "test_pairs", t2_test);
      set_if(flags, "batch", t2_batch);
      set_if(flags, "epochs", t2_epochs);
      set_if(flags, "lr_main", t2_lr_main);
      set_if(flags, "lr_p", t2_lr_p);
      if (!t2_metrics.empty()) flags["metrics"] = t2_metrics;
      if (!t2_models.empty()) flags["models"] = t2_models;
      if (!t2_seeds.empty()) flags["seeds"] = parse_seed_list(t2_seeds);
      if (t2->count("--workers")) flags["workers"] = workers;
      apply_config_json(flags, o);
      const auto result = run_table2(o, dir, t2_config, &std::cerr);
      std::cout << "wrote " << result.reports.size() << " runs to " << dir.string() << " (manifest "
                << result.manifest.config_hash << ")\n";
      return result.exit_code;
    }
    if (*vf) {
      const SuiteReport r = run_verify_suite(suite, verify_seed);
      const json j = r;
      std::cout << j.dump(2) << '\n';
      if (!out_dir.empty() || std::getenv("SNOWFLAKE_RESULTS_DIR")) {
        std::filesystem::create_directories(dir);
        std::ofstream(dir / ("verify-" + suite + ".json")) << j.dump(2) << '\n';
      }
      return r.passed() ? kExitOk : kExitSuiteFailure;
    }
    if (*lg) {
      LatentGraphOptions o;
      if (!lg_config.empty()) apply_config_json(read_json_file(lg_config), o);
      json flags = json::object();
      set_if(flags, "k", lg_k);
      set_if(flags, "latent_dim", lg_latent);
      set_if(flags, "epochs", lg_epochs);
      set_if(flags, "num_nodes", lg_nodes);
      set_if(flags, "num_classes", lg_classes);
      set_if(flags, "lr", lg_lr);
      set_if(flags, "gl_into_encoder", lg_gl_encoder);
      if (!lg_spaces.empty()) flags["similarity_spaces"] = lg_spaces;
      if (!lg_seeds.empty()) flags["seeds"] = parse_seed_list(lg_seeds);
      if (lg->count("--workers")) flags["workers"] = workers;
      apply_config_json(flags, o);
      const auto result = run_latent_graph_command(o, dir, lg_config, &std::cerr);
      std::cout << "wrote " << result.reports.size() << " reports to " << dir.string() << " (manifest "
                << result.manifest.config_hash << ")\n";
      return result.exit_code;
    }
    if (*em) {
      const WeightedGraph g = read_json_file(graph_path).get<WeightedGraph>();
      const auto result = run_embed_command(g, epsilon, dir, graph_path);
      std::cout << result.result.dump(2) << '\n';
      return result.exit_code;
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitOk;
}
