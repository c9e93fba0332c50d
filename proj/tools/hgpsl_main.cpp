// hgpsl: fetch, inspect, train, gradient-check and export hierarchical
// graph pooling models.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "hgpsl/commands.hpp"

namespace {

hgpsl::RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  if (path.empty()) {
    hgpsl::RunConfig cfg = hgpsl::default_run_config();
    for (const auto& o : overrides) hgpsl::apply_override(cfg, o);
    return cfg;
  }
  return hgpsl::load_run_config(path, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical graph pooling with structure learning"};
  app.require_subcommand(1);

  std::string cache_dir = hgpsl::default_cache_dir().string();
  app.add_option("--cache-dir", cache_dir, "Dataset cache (default $HGPSL_CACHE or ~/.cache/hgpsl)");

  std::string dataset_name;
  std::string base_url = hgpsl::default_base_url();
  auto* fetch = app.add_subcommand("fetch", "Download and unpack a benchmark dataset");
  fetch->add_option("dataset", dataset_name, "Dataset name, e.g. PROTEINS")->required();
  fetch->add_option("--base-url", base_url, "Archive host");

  std::string stats_target;
  auto* stats = app.add_subcommand("stats", "Print dataset statistics");
  stats->add_option("dataset", stats_target, "Cached dataset name or TU directory")->required();

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("config", config_path, "key = value run configuration");
    if (required) opt->required();
    sub->add_option("--set", overrides, "Override one config key (key=value), repeatable");
  };

  auto* train = app.add_subcommand("train", "Run the multi-seed experiment");
  add_config(train, true);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  add_config(gradcheck, false);

  std::string checkpoint;
  hgpsl::Index graph_index = 0;
  std::string format = "dot";
  std::string out_dir = "export";
  auto* pool_export = app.add_subcommand("pool-export", "Write the pooled graphs of one input per level");
  add_config(pool_export, true);
  pool_export->add_option("--checkpoint", checkpoint, "Parameter file written by train")->required();
  pool_export->add_option("--graph", graph_index, "Graph index in the dataset")->required();
  pool_export->add_option("--format", format, "dot or json");
  pool_export->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  return hgpsl::run_guarded(
      [&]() -> int {
        if (*fetch) return hgpsl::cmd_fetch(dataset_name, base_url, cache_dir, std::cout);
        if (*stats) return hgpsl::cmd_stats(stats_target, cache_dir, std::cout);
        hgpsl::RunConfig cfg = load_config(config_path, overrides);
        if (app.count("--cache-dir") > 0) cfg.cache_dir = cache_dir;
        if (*train) return hgpsl::cmd_train(std::move(cfg), std::cout);
        if (*gradcheck) return hgpsl::cmd_gradcheck(cfg, std::cout);
        return hgpsl::cmd_pool_export(std::move(cfg), checkpoint, graph_index, format, out_dir, std::cout);
      },
      std::cerr);
}
