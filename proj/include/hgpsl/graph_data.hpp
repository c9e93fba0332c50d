#pragma once

// Graph datasets: TU benchmark parsing, node feature encoding, seeded
// train/valid/test splits, synthetic corpora, and the archive fetcher.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hgpsl/tensor.hpp"

namespace hgpsl {

// Symmetric adjacency without self-loops, one feature row per node.
struct GraphInstance {
  SparseMatrix adjacency;
  Tensor features;
  Index label = 0;

  Index num_nodes() const { return adjacency.rows(); }
};

struct Dataset {
  std::string name;
  std::vector<GraphInstance> graphs;
  Index num_classes = 0;
  Index feature_dim = 0;
};

struct SplitSpec {
  std::uint64_t seed = 0;
  std::vector<Index> train_idx;
  std::vector<Index> valid_idx;
  std::vector<Index> test_idx;
};

enum class FeatureScheme { OneHotLabel, Attributes, OneHotPlusAttributes, Constant };

FeatureScheme parse_feature_scheme(const std::string& text);
std::string to_string(FeatureScheme scheme);

// Node-level raw data as stored in the TU files, indexed by global node id.
struct NodeData {
  Index num_nodes = 0;
  std::optional<std::vector<long>> labels;
  std::optional<Tensor> attributes;  // num_nodes x a
};

// Onehot columns follow the sorted distinct label values; attributes are
// appended after the onehot block.
Tensor encode_features(const NodeData& nodes, FeatureScheme scheme);

// Attributes plus onehot when both exist, otherwise whichever exists,
// otherwise a constant column.
FeatureScheme default_feature_scheme(const NodeData& nodes);

// Reads <dir>/<DS>_A.txt, _graph_indicator.txt, _graph_labels.txt and the
// optional _node_labels.txt / _node_attributes.txt.
Dataset parse_tu_dataset(const std::filesystem::path& dir, std::optional<FeatureScheme> scheme = std::nullopt);

struct DatasetStats {
  Index num_graphs = 0;
  Index num_nodes = 0;
  double avg_nodes = 0.0;
  double avg_edges_undirected = 0.0;  // each edge counted once
  double avg_edges_directed = 0.0;    // both stored directions counted
  Index num_classes = 0;
};

DatasetStats compute_stats(const Dataset& dataset);

// Seeded 80/10/10 partition: floor(0.8 n) / floor(0.1 n) / remainder.
SplitSpec split(Index n, std::uint64_t seed);
inline SplitSpec split(const Dataset& dataset, std::uint64_t seed) {
  return split(static_cast<Index>(dataset.graphs.size()), seed);
}

enum class SynthKind { CyclesVsCliquePairs, TreesVsCycles };

SynthKind parse_synth_kind(const std::string& text);

// Balanced two-class corpus with a single all-ones feature column, so the
// classes differ only in topology. Node order within each graph is shuffled.
Dataset synth_dataset(SynthKind kind, Index count, Index min_size, Index max_size, std::uint64_t seed);

Dataset make_dataset(std::string name, std::vector<GraphInstance> graphs);

// Builds a symmetric loop-free adjacency from an undirected edge list.
SparseMatrix adjacency_from_edges(Index n, const std::vector<std::pair<Index, Index>>& edges);

// ---------------------------------------------------------------------------

struct FetchResult {
  std::filesystem::path directory;
  bool cache_hit = false;
};

// Known benchmark archive names (case-sensitive, as published).
const std::vector<std::string>& known_datasets();

std::string default_base_url();

// Cache directory: $HGPSL_CACHE when set, else ~/.cache/hgpsl.
std::filesystem::path default_cache_dir();

// Downloads <base_url>/<name>.zip into cache_dir and unpacks it, unless
// <cache_dir>/<name> already holds the mandatory files.
FetchResult fetch_dataset(const std::string& name, const std::string& base_url,
                          const std::filesystem::path& cache_dir);

bool has_tu_manifest(const std::filesystem::path& dir, const std::string& name);

}  // namespace hgpsl
