#include "hgpsl/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace hgpsl {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

Variant parse_variant(const std::string& text) {
  if (text == "full") return Variant::Full;
  if (text == "NSL" || text == "nsl") return Variant::NSL;
  if (text == "HOP" || text == "hop") return Variant::HOP;
  if (text == "DEN" || text == "den") return Variant::DEN;
  throw ConfigError("unknown variant '" + text + "' (expected full, NSL, HOP or DEN)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NSL: return "NSL";
    case Variant::HOP: return "HOP";
    case Variant::DEN: return "DEN";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (num_levels < 1 || num_levels > 5) throw ConfigError("num_levels must lie in [1, 5]");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be at least 1");
  if (!(pooling_ratio > 0.0 && pooling_ratio <= 1.0)) throw ConfigError("pooling_ratio must lie in (0, 1]");
  if (lambda < 0.0) throw ConfigError("lambda must be nonnegative");
  if (hop_limit && *hop_limit < 1) throw ConfigError("hop_limit must be at least 1");
  if (num_classes < 1) throw ConfigError("num_classes must be at least 1");
  if (feature_dim < 1) throw ConfigError("feature_dim must be at least 1");
  for (Index d : mlp_dims) {
    if (d < 1) throw ConfigError("mlp_dims entries must be positive");
  }
  for (const auto* act : {&conv_activation, &readout_activation, &mlp_activation}) {
    if (*act != "relu" && *act != "tanh" && *act != "identity") throw ConfigError("unknown activation '" + *act + "'");
  }
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw LookupError("no parameter named '" + name + "'");
}

ParameterSet init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ParameterSet ps;
  auto glorot = [&](const std::string& name, Index rows, Index cols, Index fan_in, Index fan_out) {
    const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(rows, cols);
    for (Index i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
    ps.names.push_back(name);
    ps.values.push_back(std::move(t));
  };
  const Index d = config.hidden_dim;
  for (int k = 1; k <= config.num_levels; ++k) {
    const Index d_in = k == 1 ? config.feature_dim : d;
    glorot("conv" + std::to_string(k) + ".weight", d_in, d, d_in, d);
  }
  if (config.learns_structure()) {
    for (int k = 1; k <= config.num_levels; ++k) glorot("attn" + std::to_string(k) + ".a", 1, 2 * d, 2 * d, 1);
  }
  Index in = 2 * d;
  std::vector<Index> dims = config.mlp_dims;
  dims.push_back(config.num_classes);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    glorot("mlp" + std::to_string(i) + ".weight", in, dims[i], in, dims[i]);
    ps.names.push_back("mlp" + std::to_string(i) + ".bias");
    ps.values.push_back(Tensor::Zero(1, dims[i]));
    in = dims[i];
  }
  return ps;
}

BoundParams::BoundParams(const ParameterSet& set, std::vector<ad::Var> vars) : set_(&set), vars_(std::move(vars)) {
  if (vars_.size() != set.size()) throw ShapeError("BoundParams: one Var per parameter required");
}

BoundParams bind(ad::Tape& tape, const ParameterSet& params, bool requires_grad) {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const auto& v : params.values) vars.push_back(tape.leaf(v, requires_grad));
  return {params, std::move(vars)};
}

ForwardResult forward(ad::Tape& tape, const GraphInstance& graph, const BoundParams& params,
                      const ModelConfig& config) {
  const Index n = graph.num_nodes();
  if (n == 0) throw ContractError("forward: graph has no nodes");
  if (graph.features.rows() != n) throw ShapeError("forward: feature rows differ from node count");
  if (graph.features.cols() != config.feature_dim) {
    throw ShapeError("forward: graph has " + std::to_string(graph.features.cols()) + " features, model expects " +
                     std::to_string(config.feature_dim));
  }

  ForwardResult out;
  ad::Var h = tape.constant(graph.features);
  std::vector<Index> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), Index(0));

  // Induced adjacency of the original graph, carried through every level.
  SparseMatrix adjacency = graph.adjacency;
  // Structure for the next convolution; unset at level 1 and for NSL.
  std::optional<LearnedStructure> learned;
  std::optional<ad::Var> z;

  for (int k = 1; k <= config.num_levels; ++k) {
    const std::string level = std::to_string(k);
    const ad::Var w = params.get("conv" + level + ".weight");
    const bool plain = !learned.has_value();

    const ad::Var conv = plain ? sym_norm_conv(adjacency, h, w, config.conv_activation)
                               : learned_struct_conv(*learned, h, w, config.conv_activation);
    const ad::Var r = readout(conv, config.readout_activation);
    z = z ? ad::add(*z, r) : r;

    const Vec scores = plain ? node_info_score(adjacency, conv.value(), ScoreMode::Layer1Degree)
                             : node_info_score(learned->matrix, conv.value(), ScoreMode::LearnedRowSum);
    // Full/DEN pool over the learned structure after level 1; NSL/HOP keep the induced adjacency.
    const SparseMatrix& pool_structure =
        (config.learns_structure() && learned) ? learned->matrix : adjacency;
    PoolResult pool = top_rank_pool(scores, config.pooling_ratio, conv, pool_structure);

    adjacency = extract_submatrix(adjacency, std::span<const Index>(pool.idx));
    LevelOutput lvl;
    lvl.input_nodes = conv.rows();
    lvl.idx = pool.idx;
    lvl.node_ids.reserve(pool.idx.size());
    for (Index i : pool.idx) lvl.node_ids.push_back(ids[static_cast<std::size_t>(i)]);
    ids = lvl.node_ids;
    lvl.features = conv.value();
    lvl.readout = r.value();

    switch (config.variant) {
      case Variant::NSL:
        learned.reset();
        lvl.structure = adjacency;
        break;
      case Variant::HOP:
        learned = hop_structure(adjacency, config.hop_limit);
        lvl.structure = learned->matrix;
        break;
      case Variant::Full:
      case Variant::DEN: {
        StructureLearnParams sl;
        sl.attention = params.get("attn" + level + ".a");
        sl.lambda = config.lambda;
        sl.hop_limit = config.hop_limit;
        sl.normalization = config.normalization();
        learned = structure_learn(pool.pooled_features, pool.pooled_structure, sl);
        lvl.structure = learned->matrix;
        break;
      }
    }
    h = pool.pooled_features;
    out.levels.push_back(std::move(lvl));
  }

  ad::Var x = *z;
  const std::size_t layers = config.mlp_dims.size() + 1;
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string name = "mlp" + std::to_string(i);
    x = ad::add_row(ad::matmul(x, params.get(name + ".weight")), params.get(name + ".bias"));
    if (i + 1 < layers) x = ad::activate(x, config.mlp_activation);
  }
  out.logits = x;
  return out;
}

ad::Var cross_entropy_loss(std::span<const ad::Var> logits, std::span<const Index> labels) {
  if (logits.empty()) throw ContractError("cross_entropy_loss: empty batch");
  if (logits.size() != labels.size()) throw ShapeError("cross_entropy_loss: one label per graph required");
  std::optional<ad::Var> total;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const ad::Var li = ad::cross_entropy(logits[i], labels.subspan(i, 1));
    total = total ? ad::add(*total, li) : li;
  }
  return *total;
}

Index predict(const Tensor& logits) {
  if (logits.size() == 0) throw ContractError("predict: empty logits");
  Index best = 0;
  for (Index i = 1; i < logits.size(); ++i) {
    if (logits.data()[i] > logits.data()[best]) best = i;
  }
  return best;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out << params.names[i] << ' ' << params.values[i].rows() << ' ' << params.values[i].cols() << '\n';
  }
  out << '\n';
  for (const auto& t : params.values) {
    out.write(reinterpret_cast<const char*>(t.data()), std::streamsize(t.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  ParameterSet ps;
  std::string line;
  while (true) {
    if (!std::getline(in, line)) throw FormatError("checkpoint header not terminated by a blank line");
    if (line.empty()) break;
    std::istringstream ls(line);
    std::string name;
    Index rows = -1, cols = -1;
    if (!(ls >> name >> rows >> cols) || rows < 0 || cols < 0) {
      throw FormatError("bad checkpoint header line '" + line + "'");
    }
    ps.names.push_back(name);
    ps.values.emplace_back(rows, cols);
  }
  for (auto& t : ps.values) {
    in.read(reinterpret_cast<char*>(t.data()), std::streamsize(t.size() * sizeof(double)));
    if (!in) throw FormatError("checkpoint payload truncated");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint has trailing bytes");
  return ps;
}

}  // namespace hgpsl
