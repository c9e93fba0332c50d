#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hgpsl/autodiff.hpp"
#include "hgpsl/graph_data.hpp"
#include "hgpsl/hgp_ops.hpp"

namespace hgpsl {

enum class Variant {
  Full,  // sparsemax structure learning
  NSL,   // no structure learning: induced adjacency, symmetric-normalized conv everywhere
  HOP,   // uniform weights over the h-hop neighborhood of the induced adjacency
  DEN,   // softmax structure learning
};

Variant parse_variant(const std::string& text);
std::string to_string(Variant v);

struct ModelConfig {
  int num_levels = 3;
  Index hidden_dim = 128;
  double pooling_ratio = 0.8;
  double lambda = 1.0;
  std::optional<int> hop_limit = 2;
  Variant variant = Variant::Full;
  std::vector<Index> mlp_dims = {256, 128, 64};
  std::string conv_activation = "relu";
  std::string readout_activation = "relu";
  std::string mlp_activation = "relu";
  Index num_classes = 2;
  Index feature_dim = 1;

  Normalization normalization() const {
    return variant == Variant::DEN ? Normalization::Softmax : Normalization::Sparsemax;
  }
  bool learns_structure() const { return variant == Variant::Full || variant == Variant::DEN; }

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

// Named parameter tensors in a fixed order.
struct ParameterSet {
  std::vector<std::string> names;
  std::vector<Tensor> values;

  std::size_t size() const { return values.size(); }
  std::size_t index_of(const std::string& name) const;
  Tensor& at(const std::string& name) { return values[index_of(name)]; }
  const Tensor& at(const std::string& name) const { return values[index_of(name)]; }
};

// conv{k}.weight (d_in x d), attn{k}.a (1 x 2d) when the variant learns
// structure, mlp{i}.weight / mlp{i}.bias for each dense layer. Weights are
// uniform in +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
ParameterSet init_params(const ModelConfig& config, std::uint64_t seed);

// Parameters registered on a tape, addressable by name.
class BoundParams {
 public:
  BoundParams(const ParameterSet& set, std::vector<ad::Var> vars);
  ad::Var get(const std::string& name) const { return vars_[set_->index_of(name)]; }
  std::span<const ad::Var> vars() const { return vars_; }

 private:
  const ParameterSet* set_;
  std::vector<ad::Var> vars_;
};

BoundParams bind(ad::Tape& tape, const ParameterSet& params, bool requires_grad = true);

struct LevelOutput {
  Index input_nodes = 0;
  std::vector<Index> idx;       // selected rows of this level's input
  std::vector<Index> node_ids;  // original ids of the selected nodes
  SparseMatrix structure;       // structure over the selected nodes
  Tensor features;              // post-convolution features (before pooling)
  Tensor readout;               // 1 x 2d
};

struct ForwardResult {
  ad::Var logits;  // 1 x c, before softmax
  std::vector<LevelOutput> levels;
};

// Per level: convolution, readout, information score, top-rank pooling, then
// structure learning on the pooled subgraph. Logits come from the MLP applied
// to the sum of the level readouts.
ForwardResult forward(ad::Tape& tape, const GraphInstance& graph, const BoundParams& params,
                      const ModelConfig& config);

// Sum over the batch of -log softmax(logits_i)[label_i]; each logits entry is 1 x c.
ad::Var cross_entropy_loss(std::span<const ad::Var> logits, std::span<const Index> labels);

// Argmax, lowest index on ties.
Index predict(const Tensor& logits);

// Text header of "name rows cols" lines, a blank line, then little-endian
// doubles for every tensor in header order.
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::filesystem::path& path);

}  // namespace hgpsl
