#pragma once

// Dense and sparse matrix types plus the handful of primitives the rest of
// the library is written against. Everything is templated on the scalar; the
// library itself only instantiates double.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hgpsl/errors.hpp"

namespace hgpsl {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// CSR storage: row offsets, sorted column indices per row.
template <typename Scalar>
using Sparse = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, Index>;

using Tensor = Matrix<double>;
using Vec = Vector<double>;
using SparseMatrix = Sparse<double>;

namespace detail {

inline std::string shape_str(Index r, Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

inline void require_shape(bool ok, const char* op, Index ar, Index ac, Index br, Index bc) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(ar, ac) + " and " +
                     shape_str(br, bc));
  }
}

}  // namespace detail

template <typename DA, typename DB>
Matrix<typename DA::Scalar> matmul(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::require_shape(a.cols() == b.rows(), "matmul", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix<typename DA::Scalar> out = a * b;
  return out;
}

template <typename Scalar, typename D>
Matrix<Scalar> spmm(const Sparse<Scalar>& s, const Eigen::MatrixBase<D>& d) {
  detail::require_shape(s.cols() == d.rows(), "spmm", s.rows(), s.cols(), d.rows(), d.cols());
  Matrix<Scalar> out = s * d;
  return out;
}

// Entry i = sum_j |m(i, j)|.
template <typename D>
Vector<typename D::Scalar> row_l1_norm(const Eigen::MatrixBase<D>& m) {
  return m.cwiseAbs().rowwise().sum();
}

inline void check_index_list(std::span<const Index> idx, Index bound) {
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= bound) {
      throw IndexError("index " + std::to_string(idx[i]) + " out of range [0, " +
                       std::to_string(bound) + ")");
    }
    if (i > 0 && idx[i] <= idx[i - 1]) {
      throw IndexError("index list must be strictly increasing");
    }
  }
}

// result(r, c) = s(idx[r], idx[c]).
template <typename Scalar>
Sparse<Scalar> extract_submatrix(const Sparse<Scalar>& s, std::span<const Index> idx) {
  if (s.rows() != s.cols()) {
    throw ShapeError("extract_submatrix: matrix must be square, got " +
                     detail::shape_str(s.rows(), s.cols()));
  }
  check_index_list(idx, s.rows());
  std::vector<Index> remap(static_cast<std::size_t>(s.cols()), -1);
  for (std::size_t i = 0; i < idx.size(); ++i) remap[static_cast<std::size_t>(idx[i])] = Index(i);

  const auto n = static_cast<Index>(idx.size());
  std::vector<Eigen::Triplet<Scalar, Index>> trips;
  for (Index r = 0; r < n; ++r) {
    for (typename Sparse<Scalar>::InnerIterator it(s, idx[static_cast<std::size_t>(r)]); it; ++it) {
      const Index c = remap[static_cast<std::size_t>(it.col())];
      if (c >= 0 && it.value() != Scalar(0)) trips.emplace_back(r, c, it.value());
    }
  }
  Sparse<Scalar> out(n, n);
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

// Builds a compressed matrix from triplets, summing duplicates and dropping
// exact zeros.
template <typename Scalar>
Sparse<Scalar> sparse_from_triplets(Index rows, Index cols,
                                    const std::vector<Eigen::Triplet<Scalar, Index>>& trips) {
  Sparse<Scalar> out(rows, cols);
  out.setFromTriplets(trips.begin(), trips.end());
  out.prune(Scalar(0), Scalar(0));
  out.makeCompressed();
  return out;
}

template <typename Scalar>
Sparse<Scalar> sparse_identity(Index n) {
  Sparse<Scalar> out(n, n);
  out.setIdentity();
  out.makeCompressed();
  return out;
}

// Row offsets of a compressed matrix as a span (length rows + 1).
template <typename Scalar>
std::span<const Index> row_offsets(const Sparse<Scalar>& s) {
  return {s.outerIndexPtr(), static_cast<std::size_t>(s.outerSize() + 1)};
}

template <typename Scalar>
std::span<const Index> col_indices(const Sparse<Scalar>& s) {
  return {s.innerIndexPtr(), static_cast<std::size_t>(s.nonZeros())};
}

// Stored value of s(r, c), or zero.
template <typename Scalar>
Scalar sparse_at(const Sparse<Scalar>& s, Index r, Index c) {
  const Index* begin = s.innerIndexPtr() + s.outerIndexPtr()[r];
  const Index* end = s.innerIndexPtr() + s.outerIndexPtr()[r + 1];
  const Index* it = std::lower_bound(begin, end, c);
  if (it == end || *it != c) return Scalar(0);
  return s.valuePtr()[it - s.innerIndexPtr()];
}

// Checks the CSR structural invariants: sorted strictly increasing columns,
// no stored zeros, compressed layout.
template <typename Scalar>
bool is_canonical_csr(const Sparse<Scalar>& s) {
  if (!s.isCompressed()) return false;
  const auto off = row_offsets(s);
  if (off.front() != 0 || off.back() != s.nonZeros()) return false;
  for (Index r = 0; r < s.rows(); ++r) {
    if (off[r + 1] < off[r]) return false;
    for (Index k = off[r]; k < off[r + 1]; ++k) {
      const Index c = s.innerIndexPtr()[k];
      if (c < 0 || c >= s.cols()) return false;
      if (k > off[r] && c <= s.innerIndexPtr()[k - 1]) return false;
      if (s.valuePtr()[k] == Scalar(0)) return false;
    }
  }
  return true;
}

}  // namespace hgpsl
