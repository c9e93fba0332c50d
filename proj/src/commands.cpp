#include "hgpsl/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "hgpsl/errors.hpp"
#include "hgpsl/pool_export.hpp"

namespace hgpsl {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string tag_for(Variant v) {
  std::string t = to_string(v);
  for (auto& ch : t) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return t;
}

GraphInstance random_graph(Index n, Index features, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 1; i < n; ++i) {
    edges.emplace_back(std::uniform_int_distribution<Index>(0, i - 1)(rng), i);
    for (Index j = 0; j < i; ++j) {
      if (coin(rng)) edges.emplace_back(j, i);
    }
  }
  GraphInstance g;
  g.adjacency = adjacency_from_edges(n, edges);
  g.features = Tensor(n, features);
  for (Index i = 0; i < g.features.size(); ++i) g.features.data()[i] = unit(rng);
  g.label = 0;
  return g;
}

}  // namespace

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const LookupError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const IndexError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const TransportError& e) {
    err << "transport error: " << e.what() << '\n';
    return 1;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_fetch(const std::string& name, const std::string& base_url, const std::filesystem::path& cache_dir,
              std::ostream& out) {
  const auto result = fetch_dataset(name, base_url, cache_dir);
  if (result.cache_hit) out << "cache hit: " << name << " already present\n";
  out << result.directory.string() << '\n';
  return 0;
}

int cmd_stats(const std::string& dataset, const std::filesystem::path& cache_dir, std::ostream& out) {
  std::filesystem::path dir = dataset;
  if (!std::filesystem::is_directory(dir)) {
    dir = cache_dir / dataset;
    if (!std::filesystem::is_directory(dir)) {
      throw LookupError("dataset '" + dataset + "' is neither a directory nor cached under " + cache_dir.string() +
                        " (run `hgpsl fetch " + dataset + "` first)");
    }
  }
  const Dataset ds = parse_tu_dataset(dir);
  const DatasetStats s = compute_stats(ds);
  out << "dataset           " << ds.name << '\n';
  out << "graphs            " << s.num_graphs << '\n';
  out << "nodes             " << s.num_nodes << '\n';
  out << "avg nodes         " << fixed(s.avg_nodes, 2) << '\n';
  out << "avg edges         " << fixed(s.avg_edges_undirected, 2) << '\n';
  out << "avg edges (both)  " << fixed(s.avg_edges_directed, 2) << '\n';
  out << "classes           " << s.num_classes << '\n';
  return 0;
}

int cmd_train(RunConfig config, std::ostream& out) {
  const Dataset ds = load_dataset(config);
  config.model.validate();
  const std::string tag = tag_for(config.model.variant);
  std::filesystem::create_directories(config.output_dir);
  {
    std::ofstream copy(config.output_dir / ("config_" + tag + ".txt"));
    copy << to_text(config);
  }
  out << "dataset " << ds.name << ": " << ds.graphs.size() << " graphs, " << ds.num_classes << " classes, "
      << ds.feature_dim << " features\n";
  const auto summary = run_experiment(ds, config.model, config.optim, config.seeds, config.output_dir, tag);
  for (const auto& r : summary.runs) {
    out << "seed " << r.seed << ": test accuracy " << fixed(r.test_accuracy, 4) << " (best epoch " << r.best_epoch
        << ")\n";
  }
  out << "accuracy " << fixed(summary.mean, 4) << " ± " << fixed(summary.stddev, 4) << '\n';
  out << "summary written to " << (config.output_dir / ("summary_" + tag + ".csv")).string() << '\n';
  return 0;
}

GradCheckOutcome gradcheck_model(const RunConfig& config) {
  ModelConfig model = config.model;
  model.feature_dim = config.gradcheck_features;
  model.validate();

  GradCheckOutcome outcome;
  constexpr int kMaxAttempts = 3;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    outcome.attempts = attempt + 1;
    std::mt19937_64 rng(config.gradcheck_seed + static_cast<std::uint64_t>(attempt));
    GraphInstance graph = random_graph(config.gradcheck_nodes, config.gradcheck_features, rng);
    graph.label = std::uniform_int_distribution<Index>(0, model.num_classes - 1)(rng);
    const ParameterSet init = init_params(model, rng());

    const ad::LossBuilder loss = [&](ad::Tape& tape, std::span<const ad::Var> vars) {
      BoundParams bound(init, std::vector<ad::Var>(vars.begin(), vars.end()));
      const auto result = forward(tape, graph, bound, model);
      const std::vector<ad::Var> logits{result.logits};
      const std::vector<Index> labels{graph.label};
      return cross_entropy_loss(logits, labels);
    };
    const auto report = ad::grad_check(loss, init.values, config.gradcheck_eps, config.gradcheck_entries);
    outcome.max_rel_error = report.max_rel_error;
    outcome.passed = report.max_rel_error < config.gradcheck_tolerance;
    if (outcome.passed) break;

    const bool kink = !ad::locally_smooth(loss, init.values, report.worst_param, report.worst_entry,
                                          config.gradcheck_eps, config.gradcheck_tolerance);
    if (!kink) break;
  }
  return outcome;
}

int cmd_gradcheck(const RunConfig& config, std::ostream& out) {
  const auto outcome = gradcheck_model(config);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", outcome.max_rel_error);
  out << "max relative error " << buf << " (tolerance " << config.gradcheck_tolerance << ", "
      << outcome.attempts << (outcome.attempts == 1 ? " sample" : " samples") << ")\n";
  out << (outcome.passed ? "gradcheck passed\n" : "gradcheck FAILED\n");
  return outcome.passed ? 0 : 1;
}

int cmd_pool_export(RunConfig config, const std::filesystem::path& checkpoint, Index graph_index,
                    const std::string& format, const std::filesystem::path& out_dir, std::ostream& out) {
  const ExportFormat fmt = parse_export_format(format);
  const Dataset ds = load_dataset(config);
  if (graph_index < 0 || graph_index >= static_cast<Index>(ds.graphs.size())) {
    throw IndexError("graph index " + std::to_string(graph_index) + " outside [0, " +
                     std::to_string(ds.graphs.size()) + ")");
  }
  const ParameterSet params = load_checkpoint(checkpoint);
  const ParameterSet expected = init_params(config.model, 0);
  if (params.names != expected.names) throw ConfigError("checkpoint parameters do not match the configured model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.values[i].rows() != expected.values[i].rows() || params.values[i].cols() != expected.values[i].cols()) {
      throw ConfigError("checkpoint tensor " + params.names[i] + " has shape " +
                        std::to_string(params.values[i].rows()) + "x" + std::to_string(params.values[i].cols()) +
                        ", configured model expects " + std::to_string(expected.values[i].rows()) + "x" +
                        std::to_string(expected.values[i].cols()));
    }
  }

  ad::Tape tape;
  const BoundParams bound = bind(tape, params, false);
  const auto result = forward(tape, ds.graphs[static_cast<std::size_t>(graph_index)], bound, config.model);
  const std::string stem = "graph" + std::to_string(graph_index);
  const auto paths = write_level_exports(result.levels, out_dir, stem, fmt);
  for (std::size_t k = 0; k < paths.size(); ++k) {
    out << "level " << k + 1 << ": " << result.levels[k].node_ids.size() << " nodes -> " << paths[k].string()
        << '\n';
  }
  return 0;
}

}  // namespace hgpsl
