#pragma once

// Building blocks of the hierarchical pooling operator: graph convolution,
// node information scores, top-rank pooling, attention-based structure
// learning over a hop-limited candidate set, readout, and a KKT residual
// checker for the sparsemax projection.

#include <optional>
#include <string>
#include <vector>

#include "hgpsl/autodiff.hpp"
#include "hgpsl/simplex.hpp"
#include "hgpsl/tensor.hpp"

namespace hgpsl {

enum class Normalization { Sparsemax, Softmax };

enum class ScoreMode {
  Layer1Degree,   // ||(I - D^-1 A) H||_1 row-wise
  LearnedRowSum,  // ||(I - S) H||_1 row-wise, S row-stochastic
};

struct StructureLearnParams {
  ad::Var attention;                // 1 x 2d
  double lambda = 1.0;              // weight of existing edges
  std::optional<int> hop_limit = 2;  // nullopt: every node pair is a candidate
  Normalization normalization = Normalization::Sparsemax;
};

// A row-stochastic structure over pooled nodes. `values`, when present, is the
// differentiable nnz x 1 column aligned with matrix's CSR storage.
struct LearnedStructure {
  SparseMatrix matrix;
  std::optional<ad::Var> values;
};

struct PoolResult {
  std::vector<Index> idx;
  ad::Var pooled_features;
  SparseMatrix pooled_structure;
};

struct KktReport {
  double stationarity = 0.0;    // ||p - z - alpha + beta 1||_inf
  double sum_residual = 0.0;    // |sum p - 1|
  double primal_violation = 0.0;  // max(0, -min p)
  double dual_violation = 0.0;    // max(0, -min alpha)
  double slackness = 0.0;         // max |alpha_i p_i|
  double beta = 0.0;
  Vec alpha;

  double max_residual() const;
};

// D^-1/2 (A + I) D^-1/2 with D the degree diagonal of A + I.
SparseMatrix normalized_adjacency(const SparseMatrix& adjacency);

ad::Var sym_norm_conv(const SparseMatrix& adjacency, ad::Var h, ad::Var w,
                      const std::string& activation = "relu");

// sigma(S h w). No degree normalization: S rows already sum to one.
ad::Var learned_struct_conv(const LearnedStructure& s, ad::Var h, ad::Var w,
                            const std::string& activation = "relu");

Vec node_info_score(const SparseMatrix& structure, const Tensor& h, ScoreMode mode);

// ceil(r * n), never below one for n >= 1.
Index pooled_size(Index n, double ratio);

// The ceil(r n) highest scores, lowest index first on ties, returned in
// ascending index order.
std::vector<Index> top_rank(const Vec& scores, double ratio);

PoolResult top_rank_pool(const Vec& scores, double ratio, ad::Var h, const SparseMatrix& structure);

inline Vec sparsemax_row(const Vec& z) { return sparsemax(z); }
inline Vec softmax_row(const Vec& z) { return softmax(z); }

// mask(p, q) = 1 iff the hop distance between p and q is at most `hops`
// (diagonal always set). nullopt yields the all-pairs pattern.
SparseMatrix hop_neighborhood(const SparseMatrix& structure, std::optional<int> hops);

// E(p, q) = relu(a [h_p || h_q]^T) + lambda * A(p, q) for every stored entry
// of mask, as an nnz(mask) x 1 column in mask's CSR order.
ad::Var attention_scores(ad::Var h, ad::Var attention, double lambda, const SparseMatrix& structure,
                         const SparseMatrix& mask);

// Row-normalizes attention scores over each node's hop candidates. Entries
// that normalize to exactly zero are dropped from the returned structure.
LearnedStructure structure_learn(ad::Var h, const SparseMatrix& structure, const StructureLearnParams& params);

// Uniform row-stochastic weights over the h-hop reachable set.
LearnedStructure hop_structure(const SparseMatrix& structure, std::optional<int> hops);

// sigma(mean over nodes || max over nodes), 1 x 2d.
ad::Var readout(ad::Var h, const std::string& activation = "relu");

KktReport kkt_check(const Vec& z, const Vec& p);

}  // namespace hgpsl
