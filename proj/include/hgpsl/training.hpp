#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hgpsl/graph_data.hpp"
#include "hgpsl/model.hpp"

namespace hgpsl {

struct OptimSettings {
  double learning_rate = 0.001;
  double weight_decay = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Index batch_size = 64;
  int patience = 100;
  int max_epochs = 1000;
};

struct OptimState {
  OptimSettings settings;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

OptimState make_optim_state(const ParameterSet& params, const OptimSettings& settings);

// One Adam update with weight decay folded into the gradient:
// g += wd * theta; m, v updated; theta -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(ParameterSet& params, std::span<const Tensor> grads, OptimState& state);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean per graph
  double valid_loss = 0.0;  // mean per graph
  double valid_acc = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_valid_loss = 0.0;
  double test_accuracy = 0.0;
  double wall_seconds = 0.0;
};

struct LossAndGrad {
  double loss = 0.0;  // summed over the graphs
  std::vector<Tensor> grads;
};

// Summed cross-entropy over `indices` and its gradient w.r.t. every parameter.
LossAndGrad loss_and_grad(const ParameterSet& params, const ModelConfig& config, const Dataset& dataset,
                          std::span<const Index> indices);

struct EvalResult {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

EvalResult evaluate_loss(const ParameterSet& params, const ModelConfig& config, const Dataset& dataset,
                         std::span<const Index> indices);

// Fraction of graphs whose predicted class equals the label. Throws
// ContractError for an empty index list.
double evaluate(const ParameterSet& params, const ModelConfig& config, const Dataset& dataset,
                std::span<const Index> indices);

struct TrainResult {
  ParameterSet params;  // from the best-validation-loss epoch
  TrainReport report;
};

// Trains from `init` until the validation loss has not improved for
// `patience` consecutive epochs (at least one) or max_epochs is reached.
// Batches are reshuffled each epoch from `seed`.
TrainResult train(const Dataset& dataset, const SplitSpec& split, const ModelConfig& config,
                  const OptimSettings& settings, ParameterSet init, std::uint64_t seed);

struct SeedResult {
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  int best_epoch = 0;
};

struct ExperimentSummary {
  std::vector<SeedResult> runs;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

// For every seed: fresh split, fresh init, train, test. When output_dir is
// set, writes metrics_<tag>_seed<S>.csv, checkpoint_<tag>_seed<S>.bin and
// summary_<tag>.csv there.
ExperimentSummary run_experiment(const Dataset& dataset, const ModelConfig& config, const OptimSettings& settings,
                                 std::span<const std::uint64_t> seeds,
                                 const std::optional<std::filesystem::path>& output_dir = std::nullopt,
                                 const std::string& tag = "full");

void write_metrics_csv(const std::filesystem::path& path, const TrainReport& report);
void write_summary_csv(const std::filesystem::path& path, const ExperimentSummary& summary);

}  // namespace hgpsl
