#include "hgpsl/graph_data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace hgpsl {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view text, const fs::path& file, std::size_t line) {
  const std::string t = trim(text);
  T value{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw FormatError(file.filename().string() + ":" + std::to_string(line) + ": cannot parse '" + t + "'");
  }
  return value;
}

// Calls fn(line_text, line_number) for every nonblank line.
template <typename Fn>
void for_each_line(const fs::path& file, Fn&& fn) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open " + file.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    fn(std::string_view(line), number);
  }
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    parts.push_back(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return parts;
}

// Dataset prefix: prefer the directory name, else the unique *_A.txt file.
std::string detect_prefix(const fs::path& dir) {
  const std::string base = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
  if (fs::exists(dir / (base + "_A.txt"))) return base;
  std::vector<std::string> found;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string f = e.path().filename().string();
      if (f.size() > 6 && f.ends_with("_A.txt")) found.push_back(f.substr(0, f.size() - 6));
    }
  }
  if (found.size() == 1) return found.front();
  throw FormatError("missing mandatory file " + (dir / (base + "_A.txt")).string());
}

fs::path require_file(const fs::path& dir, const std::string& prefix, const std::string& suffix) {
  const fs::path p = dir / (prefix + suffix);
  if (!fs::exists(p)) throw FormatError("missing mandatory file " + p.filename().string());
  return p;
}

}  // namespace

FeatureScheme parse_feature_scheme(const std::string& text) {
  if (text == "onehot-label") return FeatureScheme::OneHotLabel;
  if (text == "attributes") return FeatureScheme::Attributes;
  if (text == "onehot-plus-attributes") return FeatureScheme::OneHotPlusAttributes;
  if (text == "constant") return FeatureScheme::Constant;
  throw ConfigError("unknown feature scheme '" + text + "'");
}

std::string to_string(FeatureScheme scheme) {
  switch (scheme) {
    case FeatureScheme::OneHotLabel: return "onehot-label";
    case FeatureScheme::Attributes: return "attributes";
    case FeatureScheme::OneHotPlusAttributes: return "onehot-plus-attributes";
    case FeatureScheme::Constant: return "constant";
  }
  return "?";
}

FeatureScheme default_feature_scheme(const NodeData& nodes) {
  if (nodes.labels && nodes.attributes) return FeatureScheme::OneHotPlusAttributes;
  if (nodes.attributes) return FeatureScheme::Attributes;
  if (nodes.labels) return FeatureScheme::OneHotLabel;
  return FeatureScheme::Constant;
}

Tensor encode_features(const NodeData& nodes, FeatureScheme scheme) {
  const Index n = nodes.num_nodes;
  const bool want_labels = scheme == FeatureScheme::OneHotLabel || scheme == FeatureScheme::OneHotPlusAttributes;
  const bool want_attrs = scheme == FeatureScheme::Attributes || scheme == FeatureScheme::OneHotPlusAttributes;
  if (want_labels && !nodes.labels) throw ConfigError("feature scheme " + to_string(scheme) + " needs node labels");
  if (want_attrs && !nodes.attributes) {
    throw ConfigError("feature scheme " + to_string(scheme) + " needs node attributes");
  }
  if (scheme == FeatureScheme::Constant) return Tensor::Ones(n, 1);

  std::map<long, Index> label_col;
  if (want_labels) {
    if (static_cast<Index>(nodes.labels->size()) != n) throw FormatError("node label count differs from node count");
    for (long v : *nodes.labels) label_col.emplace(v, 0);
    Index c = 0;
    for (auto& [v, col] : label_col) col = c++;
  }
  const Index onehot = static_cast<Index>(label_col.size());
  const Index attrs = want_attrs ? nodes.attributes->cols() : 0;
  if (want_attrs && nodes.attributes->rows() != n) throw FormatError("node attribute count differs from node count");

  Tensor out = Tensor::Zero(n, onehot + attrs);
  for (Index i = 0; i < n; ++i) {
    if (want_labels) out(i, label_col.at((*nodes.labels)[static_cast<std::size_t>(i)])) = 1.0;
    if (want_attrs) out.row(i).tail(attrs) = nodes.attributes->row(i);
  }
  return out;
}

SparseMatrix adjacency_from_edges(Index n, const std::vector<std::pair<Index, Index>>& edges) {
  std::vector<Eigen::Triplet<double, Index>> trips;
  trips.reserve(edges.size() * 2);
  std::set<std::pair<Index, Index>> seen;
  for (auto [u, v] : edges) {
    if (u == v) continue;
    if (u < 0 || v < 0 || u >= n || v >= n) throw IndexError("edge endpoint out of range");
    const auto key = std::minmax(u, v);
    if (!seen.insert(key).second) continue;
    trips.emplace_back(u, v, 1.0);
    trips.emplace_back(v, u, 1.0);
  }
  return sparse_from_triplets(n, n, trips);
}

Dataset make_dataset(std::string name, std::vector<GraphInstance> graphs) {
  Dataset ds;
  ds.name = std::move(name);
  ds.graphs = std::move(graphs);
  Index max_label = -1;
  for (const auto& g : ds.graphs) {
    if (g.features.rows() != g.adjacency.rows()) throw ShapeError("graph feature rows differ from node count");
    if (ds.feature_dim == 0) ds.feature_dim = g.features.cols();
    if (g.features.cols() != ds.feature_dim) throw ShapeError("graphs disagree on feature dimension");
    max_label = std::max(max_label, g.label);
  }
  ds.num_classes = max_label + 1;
  return ds;
}

Dataset parse_tu_dataset(const fs::path& dir, std::optional<FeatureScheme> scheme) {
  if (!fs::is_directory(dir)) throw FormatError("dataset directory not found: " + dir.string());
  const std::string prefix = detect_prefix(dir);
  const fs::path a_file = require_file(dir, prefix, "_A.txt");
  const fs::path ind_file = require_file(dir, prefix, "_graph_indicator.txt");
  const fs::path glabel_file = require_file(dir, prefix, "_graph_labels.txt");

  // Graph membership of each global node.
  std::vector<long> indicator;
  for_each_line(ind_file, [&](std::string_view l, std::size_t no) { indicator.push_back(parse_number<long>(l, ind_file, no)); });
  std::vector<long> graph_labels;
  for_each_line(glabel_file, [&](std::string_view l, std::size_t no) {
    graph_labels.push_back(parse_number<long>(l, glabel_file, no));
  });
  const auto num_graphs = static_cast<Index>(graph_labels.size());
  const auto num_nodes = static_cast<Index>(indicator.size());

  std::vector<Index> graph_of(static_cast<std::size_t>(num_nodes));
  std::vector<Index> local_of(static_cast<std::size_t>(num_nodes));
  std::vector<Index> size_of(static_cast<std::size_t>(num_graphs), 0);
  for (Index v = 0; v < num_nodes; ++v) {
    const long g = indicator[static_cast<std::size_t>(v)];
    if (g < 1 || g > num_graphs) {
      throw FormatError(ind_file.filename().string() + ":" + std::to_string(v + 1) + ": graph id " + std::to_string(g) +
                        " outside [1, " + std::to_string(num_graphs) + "]");
    }
    graph_of[static_cast<std::size_t>(v)] = g - 1;
    local_of[static_cast<std::size_t>(v)] = size_of[static_cast<std::size_t>(g - 1)]++;
  }

  std::vector<std::vector<std::pair<Index, Index>>> edges(static_cast<std::size_t>(num_graphs));
  for_each_line(a_file, [&](std::string_view l, std::size_t no) {
    const auto parts = split_commas(l);
    if (parts.size() != 2) {
      throw FormatError(a_file.filename().string() + ":" + std::to_string(no) + ": expected 'i, j'");
    }
    const long u = parse_number<long>(parts[0], a_file, no);
    const long v = parse_number<long>(parts[1], a_file, no);
    if (u < 1 || v < 1 || u > num_nodes || v > num_nodes) {
      throw FormatError(a_file.filename().string() + ":" + std::to_string(no) + ": dangling node reference");
    }
    const Index gu = graph_of[static_cast<std::size_t>(u - 1)];
    if (gu != graph_of[static_cast<std::size_t>(v - 1)]) {
      throw FormatError(a_file.filename().string() + ":" + std::to_string(no) + ": edge joins different graphs");
    }
    edges[static_cast<std::size_t>(gu)].emplace_back(local_of[static_cast<std::size_t>(u - 1)],
                                                     local_of[static_cast<std::size_t>(v - 1)]);
  });

  NodeData nodes;
  nodes.num_nodes = num_nodes;
  const fs::path nlabel_file = dir / (prefix + "_node_labels.txt");
  if (fs::exists(nlabel_file)) {
    std::vector<long> labels;
    for_each_line(nlabel_file, [&](std::string_view l, std::size_t no) {
      labels.push_back(parse_number<long>(split_commas(l).front(), nlabel_file, no));
    });
    if (static_cast<Index>(labels.size()) != num_nodes) throw FormatError(nlabel_file.filename().string() + ": one label per node expected");
    nodes.labels = std::move(labels);
  }
  const fs::path attr_file = dir / (prefix + "_node_attributes.txt");
  if (fs::exists(attr_file)) {
    std::vector<std::vector<double>> rows;
    for_each_line(attr_file, [&](std::string_view l, std::size_t no) {
      std::vector<double> row;
      for (auto part : split_commas(l)) row.push_back(parse_number<double>(part, attr_file, no));
      if (!rows.empty() && row.size() != rows.front().size()) {
        throw FormatError(attr_file.filename().string() + ":" + std::to_string(no) + ": ragged attribute row");
      }
      rows.push_back(std::move(row));
    });
    if (static_cast<Index>(rows.size()) != num_nodes) throw FormatError(attr_file.filename().string() + ": one row per node expected");
    Tensor attrs(num_nodes, rows.empty() ? 0 : static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < num_nodes; ++i) {
      for (Index j = 0; j < attrs.cols(); ++j) attrs(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    nodes.attributes = std::move(attrs);
  }

  const Tensor features = encode_features(nodes, scheme.value_or(default_feature_scheme(nodes)));

  // Dense 0-based class ids in sorted order of the raw labels.
  std::map<long, Index> class_of;
  for (long y : graph_labels) class_of.emplace(y, 0);
  Index next = 0;
  for (auto& [raw, id] : class_of) id = next++;

  std::vector<GraphInstance> graphs(static_cast<std::size_t>(num_graphs));
  std::vector<Index> fill(static_cast<std::size_t>(num_graphs), 0);
  for (Index g = 0; g < num_graphs; ++g) {
    auto& gi = graphs[static_cast<std::size_t>(g)];
    gi.features.resize(size_of[static_cast<std::size_t>(g)], features.cols());
    gi.label = class_of.at(graph_labels[static_cast<std::size_t>(g)]);
  }
  for (Index v = 0; v < num_nodes; ++v) {
    const Index g = graph_of[static_cast<std::size_t>(v)];
    graphs[static_cast<std::size_t>(g)].features.row(fill[static_cast<std::size_t>(g)]++) = features.row(v);
  }
  for (Index g = 0; g < num_graphs; ++g) {
    graphs[static_cast<std::size_t>(g)].adjacency =
        adjacency_from_edges(size_of[static_cast<std::size_t>(g)], edges[static_cast<std::size_t>(g)]);
  }
  Dataset ds = make_dataset(prefix, std::move(graphs));
  ds.num_classes = static_cast<Index>(class_of.size());
  ds.feature_dim = features.cols();
  return ds;
}

DatasetStats compute_stats(const Dataset& dataset) {
  DatasetStats s;
  s.num_graphs = static_cast<Index>(dataset.graphs.size());
  s.num_classes = dataset.num_classes;
  Index directed = 0;
  for (const auto& g : dataset.graphs) {
    s.num_nodes += g.num_nodes();
    directed += g.adjacency.nonZeros();
  }
  if (s.num_graphs > 0) {
    s.avg_nodes = double(s.num_nodes) / double(s.num_graphs);
    s.avg_edges_directed = double(directed) / double(s.num_graphs);
    s.avg_edges_undirected = s.avg_edges_directed / 2.0;
  }
  return s;
}

SplitSpec split(Index n, std::uint64_t seed) {
  if (n < 10) throw SizeError("split needs at least 10 graphs, got " + std::to_string(n));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(n * 8 / 10);
  const auto n_valid = static_cast<std::size_t>(n / 10);
  SplitSpec s;
  s.seed = seed;
  s.train_idx.assign(order.begin(), order.begin() + long(n_train));
  s.valid_idx.assign(order.begin() + long(n_train), order.begin() + long(n_train + n_valid));
  s.test_idx.assign(order.begin() + long(n_train + n_valid), order.end());
  return s;
}

SynthKind parse_synth_kind(const std::string& text) {
  if (text == "cycles-vs-cliquepairs") return SynthKind::CyclesVsCliquePairs;
  if (text == "trees-vs-cycles") return SynthKind::TreesVsCycles;
  throw ConfigError("unknown synthetic dataset kind '" + text + "'");
}

namespace {

using EdgeList = std::vector<std::pair<Index, Index>>;

EdgeList cycle_edges(Index n) {
  EdgeList e;
  for (Index i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return e;
}

// Two cliques of sizes floor(n/2) and ceil(n/2) joined by one bridge edge.
EdgeList clique_pair_edges(Index n) {
  const Index a = n / 2;
  EdgeList e;
  auto clique = [&](Index lo, Index hi) {
    for (Index i = lo; i < hi; ++i) {
      for (Index j = i + 1; j < hi; ++j) e.emplace_back(i, j);
    }
  };
  clique(0, a);
  clique(a, n);
  e.emplace_back(a - 1, a);
  return e;
}

EdgeList random_tree_edges(Index n, std::mt19937_64& rng) {
  EdgeList e;
  for (Index i = 1; i < n; ++i) {
    std::uniform_int_distribution<Index> parent(0, i - 1);
    e.emplace_back(parent(rng), i);
  }
  return e;
}

GraphInstance relabeled(Index n, const EdgeList& edges, Index label, std::mt19937_64& rng) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index(0));
  std::shuffle(perm.begin(), perm.end(), rng);
  EdgeList mapped;
  mapped.reserve(edges.size());
  for (auto [u, v] : edges) mapped.emplace_back(perm[static_cast<std::size_t>(u)], perm[static_cast<std::size_t>(v)]);
  GraphInstance g;
  g.adjacency = adjacency_from_edges(n, mapped);
  g.features = Tensor::Ones(n, 1);
  g.label = label;
  return g;
}

}  // namespace

Dataset synth_dataset(SynthKind kind, Index count, Index min_size, Index max_size, std::uint64_t seed) {
  if (count < 0) throw ConfigError("synthetic count must be nonnegative");
  if (min_size < 3 || max_size < min_size) throw ConfigError("synthetic size range must satisfy 3 <= min <= max");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> size_dist(min_size, max_size);
  std::vector<GraphInstance> graphs;
  graphs.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    const Index label = i % 2;
    const Index n = size_dist(rng);
    EdgeList edges;
    if (kind == SynthKind::CyclesVsCliquePairs) {
      edges = label == 0 ? cycle_edges(n) : clique_pair_edges(std::max<Index>(n, 4));
    } else {
      edges = label == 0 ? random_tree_edges(n, rng) : cycle_edges(n);
    }
    const Index nodes = (kind == SynthKind::CyclesVsCliquePairs && label == 1) ? std::max<Index>(n, 4) : n;
    graphs.push_back(relabeled(nodes, edges, label, rng));
  }
  Dataset ds = make_dataset(kind == SynthKind::CyclesVsCliquePairs ? "cycles-vs-cliquepairs" : "trees-vs-cycles",
                            std::move(graphs));
  ds.num_classes = 2;
  ds.feature_dim = 1;
  return ds;
}

}  // namespace hgpsl
