#include "hgpsl/hgp_ops.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace hgpsl {

namespace {

void require_square(const char* op, const SparseMatrix& s) {
  if (s.rows() != s.cols()) {
    throw ShapeError(std::string(op) + ": structure must be square, got " +
                     detail::shape_str(s.rows(), s.cols()));
  }
}

}  // namespace

double KktReport::max_residual() const {
  return std::max({stationarity, sum_residual, primal_violation, dual_violation, slackness});
}

SparseMatrix normalized_adjacency(const SparseMatrix& adjacency) {
  require_square("normalized_adjacency", adjacency);
  const Index n = adjacency.rows();
  Vec degree = Vec::Ones(n);
  for (Index r = 0; r < n; ++r) {
    for (SparseMatrix::InnerIterator it(adjacency, r); it; ++it) {
      if (it.col() != r) degree(r) += it.value();
    }
  }
  const Vec inv_sqrt = degree.cwiseSqrt().cwiseInverse();
  std::vector<Eigen::Triplet<double, Index>> trips;
  trips.reserve(static_cast<std::size_t>(adjacency.nonZeros() + n));
  for (Index r = 0; r < n; ++r) {
    trips.emplace_back(r, r, inv_sqrt(r) * inv_sqrt(r));
    for (SparseMatrix::InnerIterator it(adjacency, r); it; ++it) {
      if (it.col() != r) trips.emplace_back(r, it.col(), it.value() * inv_sqrt(r) * inv_sqrt(it.col()));
    }
  }
  return sparse_from_triplets(n, n, trips);
}

ad::Var sym_norm_conv(const SparseMatrix& adjacency, ad::Var h, ad::Var w, const std::string& activation) {
  require_square("sym_norm_conv", adjacency);
  detail::require_shape(h.rows() == adjacency.rows(), "sym_norm_conv", adjacency.rows(), adjacency.cols(),
                        h.rows(), h.cols());
  const SparseMatrix norm = normalized_adjacency(adjacency);
  return ad::activate(ad::spmm(norm, ad::matmul(h, w)), activation);
}

ad::Var learned_struct_conv(const LearnedStructure& s, ad::Var h, ad::Var w, const std::string& activation) {
  require_square("learned_struct_conv", s.matrix);
  detail::require_shape(h.rows() == s.matrix.rows(), "learned_struct_conv", s.matrix.rows(),
                        s.matrix.cols(), h.rows(), h.cols());
  const ad::Var hw = ad::matmul(h, w);
  const ad::Var mixed = s.values ? ad::spmm_values(s.matrix, *s.values, hw) : ad::spmm(s.matrix, hw);
  return ad::activate(mixed, activation);
}

Vec node_info_score(const SparseMatrix& structure, const Tensor& h, ScoreMode mode) {
  require_square("node_info_score", structure);
  detail::require_shape(h.rows() == structure.rows(), "node_info_score", structure.rows(), structure.cols(),
                        h.rows(), h.cols());
  const Index n = h.rows();
  Tensor recon = spmm(structure, h);
  if (mode == ScoreMode::Layer1Degree) {
    // D^-1 A h; an isolated node reconstructs to zero.
    for (Index r = 0; r < n; ++r) {
      double degree = 0.0;
      for (SparseMatrix::InnerIterator it(structure, r); it; ++it) degree += it.value();
      if (degree > 0.0) {
        recon.row(r) /= degree;
      } else {
        recon.row(r).setZero();
      }
    }
  }
  return row_l1_norm(h - recon);
}

Index pooled_size(Index n, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("pooling ratio must lie in (0, 1]");
  if (n <= 0) return 0;
  // The small slack keeps products such as 0.1 * 30 from rounding up an extra node.
  const auto k = static_cast<Index>(std::ceil(ratio * double(n) - 1e-9));
  return std::clamp<Index>(k, 1, n);
}

std::vector<Index> top_rank(const Vec& scores, double ratio) {
  const Index n = scores.size();
  if (n == 0) throw ContractError("top_rank: empty score vector");
  const Index k = pooled_size(n, ratio);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

PoolResult top_rank_pool(const Vec& scores, double ratio, ad::Var h, const SparseMatrix& structure) {
  require_square("top_rank_pool", structure);
  if (scores.size() != h.rows() || structure.rows() != h.rows()) {
    throw ShapeError("top_rank_pool: scores, features and structure disagree on node count");
  }
  PoolResult out;
  out.idx = top_rank(scores, ratio);
  out.pooled_features = ad::gather_rows(h, out.idx);
  out.pooled_structure = extract_submatrix(structure, std::span<const Index>(out.idx));
  return out;
}

SparseMatrix hop_neighborhood(const SparseMatrix& structure, std::optional<int> hops) {
  require_square("hop_neighborhood", structure);
  const Index n = structure.rows();
  std::vector<Eigen::Triplet<double, Index>> trips;
  if (!hops) {
    trips.reserve(static_cast<std::size_t>(n * n));
    for (Index p = 0; p < n; ++p) {
      for (Index q = 0; q < n; ++q) trips.emplace_back(p, q, 1.0);
    }
    return sparse_from_triplets(n, n, trips);
  }
  if (*hops < 1) throw ConfigError("hop limit must be at least 1");

  // Edges are followed in both directions: learned structures need not be symmetric.
  std::vector<std::vector<Index>> nbrs(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    for (SparseMatrix::InnerIterator it(structure, r); it; ++it) {
      if (it.col() == r) continue;
      nbrs[static_cast<std::size_t>(r)].push_back(it.col());
      nbrs[static_cast<std::size_t>(it.col())].push_back(r);
    }
  }
  std::vector<int> dist(static_cast<std::size_t>(n), -1);
  std::vector<Index> touched;
  std::deque<Index> queue;
  for (Index src = 0; src < n; ++src) {
    dist[static_cast<std::size_t>(src)] = 0;
    touched.assign(1, src);
    queue.assign(1, src);
    while (!queue.empty()) {
      const Index u = queue.front();
      queue.pop_front();
      const int du = dist[static_cast<std::size_t>(u)];
      if (du == *hops) continue;
      for (Index v : nbrs[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(v)] >= 0) continue;
        dist[static_cast<std::size_t>(v)] = du + 1;
        touched.push_back(v);
        queue.push_back(v);
      }
    }
    for (Index v : touched) {
      trips.emplace_back(src, v, 1.0);
      dist[static_cast<std::size_t>(v)] = -1;
    }
  }
  return sparse_from_triplets(n, n, trips);
}

ad::Var attention_scores(ad::Var h, ad::Var attention, double lambda, const SparseMatrix& structure,
                         const SparseMatrix& mask) {
  require_square("attention_scores", structure);
  require_square("attention_scores", mask);
  if (structure.rows() != h.rows() || mask.rows() != h.rows()) {
    throw ShapeError("attention_scores: structure, mask and features disagree on node count");
  }
  const Index nnz = mask.nonZeros();
  std::vector<Index> rows(static_cast<std::size_t>(nnz)), cols(static_cast<std::size_t>(nnz));
  Tensor bias(nnz, 1);
  for (Index r = 0; r < mask.rows(); ++r) {
    for (Index k = mask.outerIndexPtr()[r]; k < mask.outerIndexPtr()[r + 1]; ++k) {
      const Index c = mask.innerIndexPtr()[k];
      rows[static_cast<std::size_t>(k)] = r;
      cols[static_cast<std::size_t>(k)] = c;
      bias(k, 0) = lambda * sparse_at(structure, r, c);
    }
  }
  ad::Tape& tape = *h.tape();
  const ad::Var scores = ad::relu(ad::pair_scores(h, attention, rows, cols));
  return ad::add(scores, tape.constant(std::move(bias)));
}

LearnedStructure structure_learn(ad::Var h, const SparseMatrix& structure, const StructureLearnParams& params) {
  require_square("structure_learn", structure);
  if (params.lambda < 0.0) throw ConfigError("lambda must be nonnegative");
  const Index n = structure.rows();
  const SparseMatrix mask = hop_neighborhood(structure, params.hop_limit);
  const ad::Var scores = attention_scores(h, params.attention, params.lambda, structure, mask);
  const auto offsets = row_offsets(mask);
  const ad::Var normalized = params.normalization == Normalization::Sparsemax
                                 ? ad::segment_sparsemax(scores, offsets)
                                 : ad::segment_softmax(scores, offsets);

  // Keep only nonzero weights; gather their differentiable values in CSR order.
  std::vector<Index> keep;
  std::vector<Eigen::Triplet<double, Index>> trips;
  const Tensor& w = normalized.value();
  for (Index r = 0; r < n; ++r) {
    for (Index k = mask.outerIndexPtr()[r]; k < mask.outerIndexPtr()[r + 1]; ++k) {
      if (w(k, 0) != 0.0) {
        keep.push_back(k);
        trips.emplace_back(r, mask.innerIndexPtr()[k], w(k, 0));
      }
    }
  }
  LearnedStructure out;
  out.matrix = sparse_from_triplets(n, n, trips);
  if (out.matrix.nonZeros() != static_cast<Index>(keep.size())) {
    throw NumericError("structure_learn: pruned pattern lost entries");
  }
  out.values = ad::gather_rows(normalized, keep);
  return out;
}

LearnedStructure hop_structure(const SparseMatrix& structure, std::optional<int> hops) {
  SparseMatrix mask = hop_neighborhood(structure, hops);
  for (Index r = 0; r < mask.rows(); ++r) {
    const Index b = mask.outerIndexPtr()[r], e = mask.outerIndexPtr()[r + 1];
    for (Index k = b; k < e; ++k) mask.valuePtr()[k] = 1.0 / double(e - b);
  }
  return {std::move(mask), std::nullopt};
}

ad::Var readout(ad::Var h, const std::string& activation) {
  if (h.rows() == 0) throw ContractError("readout: graph has no nodes");
  return ad::activate(ad::concat_cols(ad::row_mean(h), ad::col_max(h)), activation);
}

KktReport kkt_check(const Vec& z, const Vec& p) {
  if (z.size() != p.size()) throw ShapeError("kkt_check: z and p differ in length");
  KktReport rep;
  rep.beta = tau_threshold(z).tau;
  rep.alpha = p - z + Vec::Constant(z.size(), rep.beta);
  rep.stationarity = (p - z - rep.alpha + Vec::Constant(z.size(), rep.beta)).cwiseAbs().maxCoeff();
  rep.sum_residual = std::abs(p.sum() - 1.0);
  rep.primal_violation = std::max(0.0, -p.minCoeff());
  rep.dual_violation = std::max(0.0, -rep.alpha.minCoeff());
  rep.slackness = rep.alpha.cwiseProduct(p).cwiseAbs().maxCoeff();
  return rep;
}

}  // namespace hgpsl
