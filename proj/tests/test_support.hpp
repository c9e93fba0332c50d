#pragma once

// Helpers shared by the unit tests and the acceptance binary: reference
// oracles written without the library code paths, random inputs, and
// permutation utilities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <random>
#include <utility>
#include <vector>

#include "hgpsl/autodiff.hpp"
#include "hgpsl/graph_data.hpp"
#include "hgpsl/tensor.hpp"

namespace hgpsl::testing {

inline Tensor dense(const SparseMatrix& s) { return Tensor(s); }

inline Tensor random_tensor(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
  return t;
}

inline SparseMatrix random_sparse(Index rows, Index cols, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution keep(density);
  std::vector<Eigen::Triplet<double, Index>> trips;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      if (keep(rng)) trips.emplace_back(r, c, u(rng));
    }
  }
  return sparse_from_triplets<double>(rows, cols, trips);
}

// Connected random graph: a random spanning tree plus extra edges.
inline GraphInstance random_graph(Index n, Index features, std::mt19937_64& rng, double extra_density = 0.2) {
  std::bernoulli_distribution coin(extra_density);
  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 1; i < n; ++i) {
    edges.emplace_back(std::uniform_int_distribution<Index>(0, i - 1)(rng), i);
    for (Index j = 0; j < i; ++j) {
      if (coin(rng)) edges.emplace_back(j, i);
    }
  }
  GraphInstance g;
  g.adjacency = adjacency_from_edges(n, edges);
  g.features = random_tensor(n, features, rng);
  return g;
}

// Relabels node i as perm[i].
inline GraphInstance permute_graph(const GraphInstance& g, const std::vector<Index>& perm) {
  const Index n = g.num_nodes();
  std::vector<Eigen::Triplet<double, Index>> trips;
  for (Index r = 0; r < n; ++r) {
    for (SparseMatrix::InnerIterator it(g.adjacency, r); it; ++it) trips.emplace_back(perm[r], perm[it.col()], it.value());
  }
  GraphInstance out;
  out.adjacency = sparse_from_triplets<double>(n, n, trips);
  out.features = Tensor(n, g.features.cols());
  for (Index r = 0; r < n; ++r) out.features.row(perm[r]) = g.features.row(r);
  out.label = g.label;
  return out;
}

inline std::vector<Index> random_permutation(Index n, std::mt19937_64& rng) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

struct SimplexProjection {
  Vec p;
  std::vector<bool> support;
};

// Euclidean projection onto the simplex by enumerating every nonempty
// support set: on support S the candidate is z_i - (sum_S z - 1)/|S|, zero
// elsewhere; among candidates inside the simplex the closest to z wins.
inline SimplexProjection exhaustive_simplex_projection(const Vec& z) {
  const Index n = z.size();
  SimplexProjection best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    double sum = 0.0;
    int count = 0;
    for (Index i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        sum += z(i);
        ++count;
      }
    }
    const double shift = (sum - 1.0) / count;
    Vec p = Vec::Zero(n);
    bool feasible = true;
    for (Index i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        p(i) = z(i) - shift;
        if (p(i) < 0.0) feasible = false;
      }
    }
    if (!feasible) continue;
    const double dist = (p - z).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best.p = p;
      best.support.assign(static_cast<std::size_t>(n), false);
      for (Index i = 0; i < n; ++i) best.support[static_cast<std::size_t>(i)] = p(i) > 0.0;
    }
  }
  return best;
}

// Neighbors within `hops` steps by repeated dense boolean products.
inline std::vector<std::vector<bool>> dense_reachability(const SparseMatrix& adjacency, int hops) {
  const Index n = adjacency.rows();
  Tensor a = dense(adjacency);
  std::vector<std::vector<bool>> reach(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n)));
  Tensor frontier = Tensor::Identity(n, n);
  for (Index i = 0; i < n; ++i) reach[i][i] = true;
  for (int h = 0; h < hops; ++h) {
    frontier = (frontier * (a + a.transpose())).cwiseSign();
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (frontier(i, j) != 0.0) reach[i][j] = true;
      }
    }
  }
  return reach;
}

// Gradient check that sets kinks apart from wrong gradients: when the worst
// entry is not locally smooth the sample point is rejected (empty result).
inline std::optional<double> smooth_grad_check(const ad::LossBuilder& f, std::span<const Tensor> params,
                                               double tolerance, double eps = 1e-5, Index max_entries = 0) {
  const auto report = ad::grad_check(f, params, eps, max_entries);
  if (report.max_rel_error < tolerance) return report.max_rel_error;
  if (!ad::locally_smooth(f, params, report.worst_param, report.worst_entry, eps, tolerance)) return std::nullopt;
  return report.max_rel_error;
}

}  // namespace hgpsl::testing
