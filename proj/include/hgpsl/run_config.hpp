#pragma once

// Flat `key = value` experiment files. Every key is known and type-checked
// at load; `--set key=value` overrides go through the same path.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hgpsl/graph_data.hpp"
#include "hgpsl/model.hpp"
#include "hgpsl/training.hpp"

namespace hgpsl {

struct RunConfig {
  std::string dataset;  // TU name, or synth:<kind>
  std::optional<std::filesystem::path> data_dir;
  std::filesystem::path cache_dir;
  std::optional<FeatureScheme> feature_scheme;
  Index synth_count = 200;
  Index synth_min_size = 8;
  Index synth_max_size = 20;
  std::uint64_t synth_seed = 0;

  ModelConfig model;
  OptimSettings optim;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::filesystem::path output_dir = "runs";

  Index gradcheck_nodes = 6;
  Index gradcheck_features = 3;
  std::uint64_t gradcheck_seed = 0;
  double gradcheck_eps = 1e-5;
  double gradcheck_tolerance = 1e-4;
  Index gradcheck_entries = 16;  // probed entries per parameter, 0 = all

  bool is_synthetic() const { return dataset.rfind("synth:", 0) == 0; }
};

RunConfig default_run_config();

// Applies one `key=value` assignment; throws ConfigError for unknown keys
// or values that fail to parse.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
void apply_override(RunConfig& cfg, const std::string& assignment);

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

// Canonical text form; parse_run_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& cfg);

// Loads the configured dataset (TU directory or synthetic corpus) and fills
// model.num_classes / model.feature_dim from it.
Dataset load_dataset(RunConfig& cfg);

}  // namespace hgpsl
