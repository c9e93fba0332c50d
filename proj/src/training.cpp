#include "hgpsl/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace hgpsl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_double(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

OptimState make_optim_state(const ParameterSet& params, const OptimSettings& settings) {
  OptimState s;
  s.settings = settings;
  for (const auto& p : params.values) {
    s.m.push_back(Tensor::Zero(p.rows(), p.cols()));
    s.v.push_back(Tensor::Zero(p.rows(), p.cols()));
  }
  return s;
}

void adam_step(ParameterSet& params, std::span<const Tensor> grads, OptimState& state) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and state counts differ");
  }
  const auto& o = state.settings;
  ++state.step;
  const double bc1 = 1.0 - std::pow(o.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = params.values[i];
    detail::require_shape(grads[i].rows() == theta.rows() && grads[i].cols() == theta.cols(), "adam_step",
                          theta.rows(), theta.cols(), grads[i].rows(), grads[i].cols());
    const Tensor g = grads[i] + o.weight_decay * theta;
    state.m[i] = o.beta1 * state.m[i] + (1.0 - o.beta1) * g;
    state.v[i] = o.beta2 * state.v[i] + (1.0 - o.beta2) * g.cwiseProduct(g);
    const auto m_hat = state.m[i].array() / bc1;
    const auto v_hat = state.v[i].array() / bc2;
    theta.array() -= o.learning_rate * m_hat / (v_hat.sqrt() + o.epsilon);
  }
}

LossAndGrad loss_and_grad(const ParameterSet& params, const ModelConfig& config, const Dataset& dataset,
                          std::span<const Index> indices) {
  if (indices.empty()) throw ContractError("loss_and_grad: empty batch");
  ad::Tape tape;
  const BoundParams bound = bind(tape, params);
  std::vector<ad::Var> logits;
  std::vector<Index> labels;
  for (Index i : indices) {
    const auto& g = dataset.graphs.at(static_cast<std::size_t>(i));
    logits.push_back(forward(tape, g, bound, config).logits);
    labels.push_back(g.label);
  }
  const ad::Var loss = cross_entropy_loss(logits, labels);
  tape.backward(loss);
  LossAndGrad out;
  out.loss = loss.value()(0, 0);
  for (const auto& v : bound.vars()) out.grads.push_back(v.grad());
  return out;
}

EvalResult evaluate_loss(const ParameterSet& params, const ModelConfig& config, const Dataset& dataset,
                         std::span<const Index> indices) {
  if (indices.empty()) throw ContractError("evaluate: empty index list");
  double loss = 0.0;
  Index correct = 0;
  constexpr std::size_t kChunk = 64;
  for (std::size_t b = 0; b < indices.size(); b += kChunk) {
    ad::Tape tape;
    const BoundParams bound = bind(tape, params, false);
    for (std::size_t i = b; i < std::min(indices.size(), b + kChunk); ++i) {
      const auto& g = dataset.graphs.at(static_cast<std::size_t>(indices[i]));
      const ad::Var logits = forward(tape, g, bound, config).logits;
      const Index label[] = {g.label};
      loss += ad::cross_entropy(logits, label).value()(0, 0);
      if (predict(logits.value()) == g.label) ++correct;
    }
  }
  const double n = double(indices.size());
  return {loss / n, double(correct) / n};
}

double evaluate(const ParameterSet& params, const ModelConfig& config, const Dataset& dataset,
                std::span<const Index> indices) {
  return evaluate_loss(params, config, dataset, indices).accuracy;
}

TrainResult train(const Dataset& dataset, const SplitSpec& split, const ModelConfig& config,
                  const OptimSettings& settings, ParameterSet init, std::uint64_t seed) {
  if (split.train_idx.empty() || split.valid_idx.empty()) throw ContractError("train: empty train or validation set");
  if (settings.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (settings.max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  const auto t0 = Clock::now();

  TrainResult result;
  ParameterSet params = std::move(init);
  OptimState state = make_optim_state(params, settings);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Index> order = split.train_idx;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  const int patience = std::max(settings.patience, 1);

  for (int epoch = 1; epoch <= settings.max_epochs; ++epoch) {
    const auto te = Clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double train_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(settings.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(settings.batch_size));
      const auto lg = loss_and_grad(params, config, dataset, std::span<const Index>(order).subspan(b, e - b));
      train_loss += lg.loss;
      adam_step(params, lg.grads, state);
    }
    const EvalResult valid = evaluate_loss(params, config, dataset, split.valid_idx);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss / double(order.size());
    rec.valid_loss = valid.mean_loss;
    rec.valid_acc = valid.accuracy;
    rec.seconds = seconds_since(te);
    result.report.epochs.push_back(rec);

    if (valid.mean_loss < best) {
      best = valid.mean_loss;
      stale = 0;
      result.params = params;
      result.report.best_epoch = epoch;
      result.report.best_valid_loss = best;
    } else if (++stale >= patience) {
      break;
    }
  }
  if (!split.test_idx.empty()) {
    result.report.test_accuracy = evaluate(result.params, config, dataset, split.test_idx);
  }
  result.report.wall_seconds = seconds_since(t0);
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_loss,valid_loss,valid_acc,seconds\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << fmt_double(e.train_loss, 8) << ',' << fmt_double(e.valid_loss, 8) << ','
        << fmt_double(e.valid_acc) << ',' << fmt_double(e.seconds, 4) << '\n';
  }
}

void write_summary_csv(const std::filesystem::path& path, const ExperimentSummary& summary) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "seed,test_acc,best_epoch\n";
  for (const auto& r : summary.runs) out << r.seed << ',' << fmt_double(r.test_accuracy) << ',' << r.best_epoch << '\n';
}

ExperimentSummary run_experiment(const Dataset& dataset, const ModelConfig& config, const OptimSettings& settings,
                                 std::span<const std::uint64_t> seeds,
                                 const std::optional<std::filesystem::path>& output_dir, const std::string& tag) {
  if (seeds.empty()) throw ConfigError("run_experiment needs at least one seed");
  if (output_dir) std::filesystem::create_directories(*output_dir);
  ExperimentSummary summary;
  for (std::uint64_t seed : seeds) {
    const SplitSpec sp = split(dataset, seed);
    TrainResult tr = train(dataset, sp, config, settings, init_params(config, seed), seed);
    summary.runs.push_back({seed, tr.report.test_accuracy, tr.report.best_epoch});
    if (output_dir) {
      const std::string stem = tag + "_seed" + std::to_string(seed);
      write_metrics_csv(*output_dir / ("metrics_" + stem + ".csv"), tr.report);
      save_checkpoint(*output_dir / ("checkpoint_" + stem + ".bin"), tr.params);
    }
  }
  double sum = 0.0;
  for (const auto& r : summary.runs) sum += r.test_accuracy;
  summary.mean = sum / double(summary.runs.size());
  double var = 0.0;
  for (const auto& r : summary.runs) var += (r.test_accuracy - summary.mean) * (r.test_accuracy - summary.mean);
  summary.stddev = std::sqrt(var / double(summary.runs.size()));
  if (output_dir) write_summary_csv(*output_dir / ("summary_" + tag + ".csv"), summary);
  return summary;
}

}  // namespace hgpsl
