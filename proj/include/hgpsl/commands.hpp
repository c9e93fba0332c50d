#pragma once

// Subcommand bodies behind the hgpsl binary. Each returns a process exit
// status: 0 on success, 1 for runtime, transport or format failures (and a
// failed gradient check), 2 for configuration, usage or lookup errors.

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "hgpsl/run_config.hpp"

namespace hgpsl {

// Maps the exception taxonomy onto exit codes, printing the message to err.
int run_guarded(const std::function<int()>& body, std::ostream& err);

int cmd_fetch(const std::string& name, const std::string& base_url, const std::filesystem::path& cache_dir,
              std::ostream& out);

// `dataset` is either a directory in TU layout or a name under cache_dir.
int cmd_stats(const std::string& dataset, const std::filesystem::path& cache_dir, std::ostream& out);

int cmd_train(RunConfig config, std::ostream& out);

struct GradCheckOutcome {
  double max_rel_error = 0.0;
  int attempts = 0;
  bool passed = false;
};

// Random graph of gradcheck_nodes nodes with gradcheck_features features,
// full-model loss checked against central differences. A failing sample whose
// worst entry is not locally smooth sits on a kink and is redrawn, at most
// three times.
GradCheckOutcome gradcheck_model(const RunConfig& config);
int cmd_gradcheck(const RunConfig& config, std::ostream& out);

int cmd_pool_export(RunConfig config, const std::filesystem::path& checkpoint, Index graph_index,
                    const std::string& format, const std::filesystem::path& out_dir, std::ostream& out);

}  // namespace hgpsl
