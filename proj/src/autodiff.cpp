#include "hgpsl/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "hgpsl/simplex.hpp"

namespace hgpsl::ad {

namespace {

void same_shape(const char* op, Var a, Var b) {
  detail::require_shape(a.rows() == b.rows() && a.cols() == b.cols(), op, a.rows(), a.cols(),
                        b.rows(), b.cols());
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("operation on an unbound Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape()) throw ContractError("operands live on different tapes");
  return tape_of(a);
}

void require_segments(const char* op, Var values, std::span<const Index> offsets) {
  if (values.cols() != 1) throw ShapeError(std::string(op) + ": values must be a column");
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != values.rows()) {
    throw ShapeError(std::string(op) + ": offsets do not cover the values");
  }
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    if (offsets[s + 1] <= offsets[s]) throw ContractError(std::string(op) + ": empty segment");
  }
}

// Sparsemax Jacobian-vector product. On the support S:
// dz_i = g_i - sum_{j in S} g_j / |S|; zero off the support.
template <typename Seg, typename Out>
void sparsemax_backward(const Seg& out, const Seg& g, Out&& dz) {
  double gsum = 0.0;
  Index support = 0;
  for (Index i = 0; i < out.size(); ++i) {
    if (out(i) > 0.0) {
      gsum += g(i);
      ++support;
    }
  }
  const double mean = support > 0 ? gsum / double(support) : 0.0;
  for (Index i = 0; i < out.size(); ++i) dz(i) = out(i) > 0.0 ? g(i) - mean : 0.0;
}

}  // namespace

// ---------------------------------------------------------------------------

const Tensor& Var::value() const { return tape_->nodes_.at(id_).value; }

const Tensor& Var::grad() const {
  const auto& node = tape_->nodes_.at(id_);
  if (!node.has_grad) throw ContractError("gradient requested before backward()");
  return node.grad;
}

bool Var::requires_grad() const { return tape_->nodes_.at(id_).requires_grad; }

Var Tape::check(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw ContractError("Var does not belong to this tape");
  return v;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.allFinite()) throw NumericError("leaf value is not finite");
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  if (!value.allFinite()) throw NumericError("operation produced a non-finite value");
  bool needs = false;
  for (const auto& p : parents) needs = needs || check(p).requires_grad();
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs;
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Tensor& g) {
  auto& node = nodes_.at(check(v).id_);
  if (!node.requires_grad) return;
  detail::require_shape(g.rows() == node.value.rows() && g.cols() == node.value.cols(), "accumulate",
                        g.rows(), g.cols(), node.value.rows(), node.value.cols());
  node.grad += g;
}

void Tape::zero_grad() {
  for (auto& node : nodes_) {
    node.grad.setZero(node.value.rows(), node.value.cols());
    node.has_grad = true;
  }
}

void Tape::backward(Var loss) {
  check(loss);
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("backward: loss must be 1x1, got " + detail::shape_str(loss.rows(), loss.cols()));
  }
  for (auto& node : nodes_) {
    node.grad.setZero(node.value.rows(), node.value.cols());
    node.has_grad = true;
  }
  auto& root = nodes_[loss.id_];
  if (!root.requires_grad) return;
  root.grad(0, 0) = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.requires_grad || !node.backward) continue;
    if (node.grad.isZero(0.0)) continue;
    // The closure may append nothing, so references stay valid.
    node.backward(node.grad, *this);
  }
}

// ---------------------------------------------------------------------------

Var add(Var a, Var b) {
  auto& t = tape_of(a, b);
  same_shape("add", a, b);
  const Var parents[] = {a, b};
  return t.record(a.value() + b.value(), parents, [a, b](const Tensor& g, Tape& tp) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  auto& t = tape_of(a, b);
  same_shape("sub", a, b);
  const Var parents[] = {a, b};
  return t.record(a.value() - b.value(), parents, [a, b](const Tensor& g, Tape& tp) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  });
}

Var scale(Var a, double s) {
  auto& t = tape_of(a);
  const Var parents[] = {a};
  return t.record(a.value() * s, parents, [a, s](const Tensor& g, Tape& tp) { tp.accumulate(a, g * s); });
}

Var mul(Var a, Var b) {
  auto& t = tape_of(a, b);
  same_shape("mul", a, b);
  const Var parents[] = {a, b};
  return t.record(a.value().cwiseProduct(b.value()), parents, [a, b](const Tensor& g, Tape& tp) {
    tp.accumulate(a, g.cwiseProduct(b.value()));
    tp.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var add_row(Var a, Var row) {
  auto& t = tape_of(a, row);
  detail::require_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row", a.rows(), a.cols(),
                        row.rows(), row.cols());
  Tensor out = a.value();
  out.rowwise() += row.value().row(0);
  const Var parents[] = {a, row};
  return t.record(std::move(out), parents, [a, row](const Tensor& g, Tape& tp) {
    tp.accumulate(a, g);
    tp.accumulate(row, g.colwise().sum());
  });
}

Var matmul(Var a, Var b) {
  auto& t = tape_of(a, b);
  Tensor out = hgpsl::matmul(a.value(), b.value());
  const Var parents[] = {a, b};
  return t.record(std::move(out), parents, [a, b](const Tensor& g, Tape& tp) {
    if (a.requires_grad()) tp.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) tp.accumulate(b, a.value().transpose() * g);
  });
}

Var spmm(const SparseMatrix& s, Var d) {
  auto& t = tape_of(d);
  Tensor out = hgpsl::spmm(s, d.value());
  const Var parents[] = {d};
  return t.record(std::move(out), parents, [s, d](const Tensor& g, Tape& tp) {
    Tensor dd = s.transpose() * g;
    tp.accumulate(d, dd);
  });
}

Var spmm_values(const SparseMatrix& pattern, Var values, Var d) {
  auto& t = tape_of(values, d);
  if (values.cols() != 1 || values.rows() != pattern.nonZeros()) {
    throw ShapeError("spmm_values: values must be nnz x 1 (nnz = " + std::to_string(pattern.nonZeros()) +
                     "), got " + detail::shape_str(values.rows(), values.cols()));
  }
  SparseMatrix s = pattern;
  std::copy(values.value().data(), values.value().data() + values.rows(), s.valuePtr());
  Tensor out = hgpsl::spmm(s, d.value());
  const Var parents[] = {values, d};
  return t.record(std::move(out), parents, [s, values, d](const Tensor& g, Tape& tp) {
    if (d.requires_grad()) {
      Tensor dd = s.transpose() * g;
      tp.accumulate(d, dd);
    }
    if (values.requires_grad()) {
      Tensor dv(values.rows(), 1);
      const Tensor& dv_in = d.value();
      for (Index r = 0; r < s.outerSize(); ++r) {
        for (Index k = s.outerIndexPtr()[r]; k < s.outerIndexPtr()[r + 1]; ++k) {
          dv(k, 0) = g.row(r).dot(dv_in.row(s.innerIndexPtr()[k]));
        }
      }
      tp.accumulate(values, dv);
    }
  });
}

Var relu(Var a) {
  auto& t = tape_of(a);
  const Var parents[] = {a};
  return t.record(a.value().cwiseMax(0.0), parents, [a](const Tensor& g, Tape& tp) {
    // relu'(0) = 0
    Tensor mask = (a.value().array() > 0.0).cast<double>().matrix();
#ifdef HGPSL_CORRUPT_BACKWARD
    mask *= 1.5;
#endif
    tp.accumulate(a, g.cwiseProduct(mask));
  });
}

Var tanh(Var a) {
  auto& t = tape_of(a);
  Tensor out = a.value().array().tanh().matrix();
  const Var parents[] = {a};
  return t.record(out, parents, [a, out](const Tensor& g, Tape& tp) {
    tp.accumulate(a, (g.array() * (1.0 - out.array().square())).matrix());
  });
}

Var log(Var a) {
  auto& t = tape_of(a);
  if ((a.value().array() <= 0.0).any()) throw NumericError("log of a non-positive value");
  const Var parents[] = {a};
  return t.record(a.value().array().log().matrix(), parents, [a](const Tensor& g, Tape& tp) {
    tp.accumulate(a, (g.array() / a.value().array()).matrix());
  });
}

Var sum(Var a) {
  auto& t = tape_of(a);
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  const Var parents[] = {a};
  return t.record(std::move(out), parents, [a](const Tensor& g, Tape& tp) {
    tp.accumulate(a, Tensor::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var concat_cols(Var a, Var b) {
  auto& t = tape_of(a, b);
  detail::require_shape(a.rows() == b.rows(), "concat_cols", a.rows(), a.cols(), b.rows(), b.cols());
  Tensor out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Var parents[] = {a, b};
  return t.record(std::move(out), parents, [a, b](const Tensor& g, Tape& tp) {
    tp.accumulate(a, g.leftCols(a.cols()));
    tp.accumulate(b, g.rightCols(b.cols()));
  });
}

Var row_mean(Var a) {
  auto& t = tape_of(a);
  if (a.rows() == 0) throw ContractError("row_mean: no rows");
  const Var parents[] = {a};
  Tensor out = a.value().colwise().mean();
  return t.record(std::move(out), parents, [a](const Tensor& g, Tape& tp) {
    Tensor da = g.replicate(a.rows(), 1) / double(a.rows());
    tp.accumulate(a, da);
  });
}

Var col_max(Var a) {
  auto& t = tape_of(a);
  if (a.rows() == 0) throw ContractError("col_max: no rows");
  const Tensor& v = a.value();
  Tensor out(1, v.cols());
  std::vector<Index> arg(static_cast<std::size_t>(v.cols()), 0);
  for (Index c = 0; c < v.cols(); ++c) {
    Index best = 0;
    for (Index r = 1; r < v.rows(); ++r) {
      if (v(r, c) > v(best, c)) best = r;
    }
    arg[static_cast<std::size_t>(c)] = best;
    out(0, c) = v(best, c);
  }
  const Var parents[] = {a};
  return t.record(std::move(out), parents, [a, arg](const Tensor& g, Tape& tp) {
    Tensor da = Tensor::Zero(a.rows(), a.cols());
    for (Index c = 0; c < a.cols(); ++c) da(arg[static_cast<std::size_t>(c)], c) = g(0, c);
    tp.accumulate(a, da);
  });
}

Var gather_rows(Var a, std::span<const Index> idx) {
  auto& t = tape_of(a);
  std::vector<Index> rows(idx.begin(), idx.end());
  Tensor out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) {
      throw IndexError("gather_rows: row " + std::to_string(rows[i]) + " out of range");
    }
    out.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  const Var parents[] = {a};
  return t.record(std::move(out), parents, [a, rows = std::move(rows)](const Tensor& g, Tape& tp) {
    Tensor da = Tensor::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) da.row(rows[i]) += g.row(static_cast<Index>(i));
    tp.accumulate(a, da);
  });
}

Var softmax_rows(Var a) {
  auto& t = tape_of(a);
  if (a.cols() == 0) throw ContractError("softmax_rows: empty rows");
  Tensor out(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) out.row(r) = softmax(a.value().row(r)).transpose();
  const Var parents[] = {a};
  return t.record(out, parents, [a, out](const Tensor& g, Tape& tp) {
    Tensor da(a.rows(), a.cols());
    for (Index r = 0; r < a.rows(); ++r) {
      const double dot = g.row(r).dot(out.row(r));
      da.row(r) = out.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    tp.accumulate(a, da);
  });
}

Var sparsemax_rows(Var a) {
  auto& t = tape_of(a);
  if (a.cols() == 0) throw ContractError("sparsemax_rows: empty rows");
  Tensor out(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) out.row(r) = sparsemax(a.value().row(r)).transpose();
  const Var parents[] = {a};
  return t.record(out, parents, [a, out](const Tensor& g, Tape& tp) {
    Tensor da(a.rows(), a.cols());
    for (Index r = 0; r < a.rows(); ++r) {
      Vec o = out.row(r).transpose();
      Vec gr = g.row(r).transpose();
      Vec dz(o.size());
      sparsemax_backward(o, gr, dz);
      da.row(r) = dz.transpose();
    }
    tp.accumulate(a, da);
  });
}

Var segment_softmax(Var values, std::span<const Index> offsets) {
  auto& t = tape_of(values);
  require_segments("segment_softmax", values, offsets);
  std::vector<Index> off(offsets.begin(), offsets.end());
  Tensor out(values.rows(), 1);
  const auto& v = values.value();
  for (std::size_t s = 0; s + 1 < off.size(); ++s) {
    const Index b = off[s], len = off[s + 1] - off[s];
    out.col(0).segment(b, len) = softmax(v.col(0).segment(b, len));
  }
  const Var parents[] = {values};
  return t.record(out, parents, [values, out, off](const Tensor& g, Tape& tp) {
    Tensor dv(values.rows(), 1);
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      const Index b = off[s], len = off[s + 1] - off[s];
      const auto o = out.col(0).segment(b, len);
      const auto gs = g.col(0).segment(b, len);
      const double dot = gs.dot(o);
      dv.col(0).segment(b, len) = o.cwiseProduct((gs.array() - dot).matrix());
    }
    tp.accumulate(values, dv);
  });
}

Var segment_sparsemax(Var values, std::span<const Index> offsets) {
  auto& t = tape_of(values);
  require_segments("segment_sparsemax", values, offsets);
  std::vector<Index> off(offsets.begin(), offsets.end());
  Tensor out(values.rows(), 1);
  const auto& v = values.value();
  for (std::size_t s = 0; s + 1 < off.size(); ++s) {
    const Index b = off[s], len = off[s + 1] - off[s];
    out.col(0).segment(b, len) = sparsemax(v.col(0).segment(b, len));
  }
  const Var parents[] = {values};
  return t.record(out, parents, [values, out, off](const Tensor& g, Tape& tp) {
    Tensor dv(values.rows(), 1);
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      const Index b = off[s], len = off[s + 1] - off[s];
      Vec o = out.col(0).segment(b, len);
      Vec gs = g.col(0).segment(b, len);
      Vec dz(len);
      sparsemax_backward(o, gs, dz);
      dv.col(0).segment(b, len) = dz;
    }
    tp.accumulate(values, dv);
  });
}

Var pair_scores(Var h, Var a, std::span<const Index> rows, std::span<const Index> cols) {
  auto& t = tape_of(h, a);
  const Index d = h.cols();
  detail::require_shape(a.rows() == 1 && a.cols() == 2 * d, "pair_scores", h.rows(), h.cols(), a.rows(),
                        a.cols());
  if (rows.size() != cols.size()) throw ShapeError("pair_scores: rows/cols length mismatch");
  std::vector<Index> rs(rows.begin(), rows.end()), cs(cols.begin(), cols.end());
  for (std::size_t k = 0; k < rs.size(); ++k) {
    if (rs[k] < 0 || rs[k] >= h.rows() || cs[k] < 0 || cs[k] >= h.rows()) {
      throw IndexError("pair_scores: node index out of range");
    }
  }
  // Project each node once, then combine per pair.
  const Vec left = h.value() * a.value().leftCols(d).transpose();
  const Vec right = h.value() * a.value().rightCols(d).transpose();
  Tensor out(static_cast<Index>(rs.size()), 1);
  for (std::size_t k = 0; k < rs.size(); ++k) out(static_cast<Index>(k), 0) = left(rs[k]) + right(cs[k]);

  const Var parents[] = {h, a};
  return t.record(std::move(out), parents, [h, a, d, rs = std::move(rs), cs = std::move(cs)](const Tensor& g,
                                                                                             Tape& tp) {
    // Per-node totals of upstream gradient on each side.
    Vec gl = Vec::Zero(h.rows()), gr = Vec::Zero(h.rows());
    for (std::size_t k = 0; k < rs.size(); ++k) {
      gl(rs[k]) += g(static_cast<Index>(k), 0);
      gr(cs[k]) += g(static_cast<Index>(k), 0);
    }
    if (h.requires_grad()) {
      Tensor dh = gl * a.value().leftCols(d) + gr * a.value().rightCols(d);
      tp.accumulate(h, dh);
    }
    if (a.requires_grad()) {
      Tensor da(1, 2 * d);
      da.leftCols(d) = gl.transpose() * h.value();
      da.rightCols(d) = gr.transpose() * h.value();
      tp.accumulate(a, da);
    }
  });
}

Var cross_entropy(Var logits, std::span<const Index> labels) {
  auto& t = tape_of(logits);
  if (static_cast<Index>(labels.size()) != logits.rows()) {
    throw ShapeError("cross_entropy: one label per logits row required");
  }
  std::vector<Index> ys(labels.begin(), labels.end());
  const Tensor& z = logits.value();
  Tensor probs(z.rows(), z.cols());
  double loss = 0.0;
  for (Index i = 0; i < z.rows(); ++i) {
    const Index y = ys[static_cast<std::size_t>(i)];
    if (y < 0 || y >= z.cols()) {
      throw IndexError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(z.cols()) + ")");
    }
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    loss += lse - z(i, y);
    probs.row(i) = (z.row(i).array() - lse).exp().matrix();
  }
  Tensor out(1, 1);
  out(0, 0) = loss;
  const Var parents[] = {logits};
  return t.record(std::move(out), parents, [logits, probs, ys = std::move(ys)](const Tensor& g, Tape& tp) {
    Tensor dz = probs;
    for (std::size_t i = 0; i < ys.size(); ++i) dz(static_cast<Index>(i), ys[i]) -= 1.0;
    tp.accumulate(logits, dz * g(0, 0));
  });
}

Var activate(Var a, const std::string& activation) {
  if (activation == "relu") return relu(a);
  if (activation == "tanh") return tanh(a);
  if (activation == "identity" || activation == "none") return a;
  throw ConfigError("unknown activation '" + activation + "'");
}

// ---------------------------------------------------------------------------

namespace {

double evaluate_loss(const LossBuilder& f, const std::vector<Tensor>& ps) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& p : ps) vars.push_back(tape.leaf(p));
  return f(tape, vars).value()(0, 0);
}

double probe_difference(const LossBuilder& f, std::vector<Tensor>& probe, std::size_t p, Index k, double eps) {
  const double orig = probe[p].data()[k];
  probe[p].data()[k] = orig + eps;
  const double up = evaluate_loss(f, probe);
  probe[p].data()[k] = orig - eps;
  const double down = evaluate_loss(f, probe);
  probe[p].data()[k] = orig;
  return (up - down) / (2.0 * eps);
}

}  // namespace

double central_difference(const LossBuilder& f, std::span<const Tensor> params, std::size_t p, Index k,
                          double eps) {
  if (p >= params.size() || k < 0 || k >= params[p].size()) throw IndexError("central_difference: entry out of range");
  std::vector<Tensor> probe(params.begin(), params.end());
  return probe_difference(f, probe, p, k, eps);
}

bool locally_smooth(const LossBuilder& f, std::span<const Tensor> params, std::size_t p, Index k, double eps,
                    double tolerance) {
  if (p >= params.size() || k < 0 || k >= params[p].size()) throw IndexError("locally_smooth: entry out of range");
  std::vector<Tensor> probe(params.begin(), params.end());
  const double orig = probe[p].data()[k];
  auto at = [&](double offset) {
    probe[p].data()[k] = orig + offset;
    const double v = evaluate_loss(f, probe);
    probe[p].data()[k] = orig;
    return v;
  };
  const double center = at(0.0);
  const double up = at(eps), down = at(-eps);
  const double half_up = at(eps / 2.0), half_down = at(-eps / 2.0);
  const double forward = (up - center) / eps;
  const double backward = (center - down) / eps;
  const double wide = (up - down) / (2.0 * eps);
  const double narrow = (half_up - half_down) / eps;
  const double scale = std::max(1.0, std::abs(wide));
  return std::abs(forward - backward) < tolerance * scale && std::abs(wide - narrow) < tolerance * scale;
}

GradCheckReport grad_check(const LossBuilder& f, std::span<const Tensor> params, double eps, Index max_entries) {
  if (!(eps > 0.0)) throw ContractError("grad_check: eps must be positive");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.leaf(p));
    Var loss = f(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(v.grad());
  }

  GradCheckReport report;
  std::vector<Tensor> probe(params.begin(), params.end());
  for (std::size_t p = 0; p < probe.size(); ++p) {
    const Index size = probe[p].size();
    const Index count = max_entries > 0 ? std::min(size, max_entries) : size;
    for (Index j = 0; j < count; ++j) {
      const Index k = count == size ? j : j * size / count;
      const double central = probe_difference(f, probe, p, k, eps);
      const double err = std::abs(analytic[p].data()[k] - central) / std::max(1.0, std::abs(central));
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = p;
        report.worst_entry = k;
      }
    }
  }
  return report;
}

}  // namespace hgpsl::ad
