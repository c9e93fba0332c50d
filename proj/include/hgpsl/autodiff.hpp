#pragma once

// Define-by-run reverse-mode differentiation. A Tape owns every node created
// during one forward pass; Var is a cheap handle into it. Sparse operands,
// index lists, and labels are constants captured by the backward closures.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hgpsl/tensor.hpp"

namespace hgpsl::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Receives the upstream gradient of a node and pushes contributions into its
// parents through Tape::accumulate.
using BackwardFn = std::function<void(const Tensor& upstream, Tape& tape)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Appends an operation result. Parents must already live on this tape, so
  // insertion order is a topological order.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and runs every backward rule once, in reverse
  // insertion order. Throws ContractError unless loss is 1x1.
  void backward(Var loss);

  void zero_grad();

  // Adds g into the gradient buffer of v (no-op for constants).
  void accumulate(Var v, const Tensor& g);

  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  Var check(Var v) const;

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Operation set. Shape mismatches throw ShapeError.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var mul(Var a, Var b);  // elementwise
// a (r x c) plus a 1 x c row added to every row.
Var add_row(Var a, Var row);
Var matmul(Var a, Var b);
// s is constant.
Var spmm(const SparseMatrix& s, Var d);
// Sparse product whose stored values are a differentiable nnz x 1 column,
// aligned with the CSR order of `pattern`. Pattern values are ignored.
Var spmm_values(const SparseMatrix& pattern, Var values, Var d);
Var relu(Var a);
Var tanh(Var a);
Var log(Var a);
Var sum(Var a);
Var concat_cols(Var a, Var b);
// Mean of all rows: 1 x cols.
Var row_mean(Var a);
// Column-wise maximum over rows: 1 x cols. Ties go to the lowest row.
Var col_max(Var a);
// Rows a(idx[i], :); indices may repeat.
Var gather_rows(Var a, std::span<const Index> idx);
Var softmax_rows(Var a);
Var sparsemax_rows(Var a);
// Softmax / sparsemax over contiguous segments of an n x 1 column.
// offsets has one entry per segment plus the end; every segment nonempty.
Var segment_softmax(Var values, std::span<const Index> offsets);
Var segment_sparsemax(Var values, std::span<const Index> offsets);
// Per-pair attention logits: out(k) = a[0:d] . h(rows[k]) + a[d:2d] . h(cols[k]).
Var pair_scores(Var h, Var a, std::span<const Index> rows, std::span<const Index> cols);
// Sum over the batch of -log softmax(logits_i)[labels_i]; logits is b x c.
Var cross_entropy(Var logits, std::span<const Index> labels);

Var activate(Var a, const std::string& activation);

// ---------------------------------------------------------------------------
// Finite-difference checking.

// Builds the scalar loss from parameters that were registered on `tape`.
using LossBuilder = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  Index worst_entry = 0;
};

// Compares the taped gradient against central differences for every entry of
// every parameter: max |g_analytic - g_central| / max(1, |g_central|).
// max_entries > 0 probes only that many evenly spaced entries per parameter.
GradCheckReport grad_check(const LossBuilder& f, std::span<const Tensor> params, double eps = 1e-5,
                           Index max_entries = 0);

// (f(theta + eps e_k) - f(theta - eps e_k)) / 2 eps for entry k of params[p].
double central_difference(const LossBuilder& f, std::span<const Tensor> params, std::size_t p, Index k,
                          double eps);

// False when entry k of params[p] sits on or within eps of a kink: the
// one-sided slopes disagree, or the central difference moves between eps and
// eps/2, by at least `tolerance` relative to max(1, |slope|).
bool locally_smooth(const LossBuilder& f, std::span<const Tensor> params, std::size_t p, Index k, double eps,
                    double tolerance);

}  // namespace hgpsl::ad
