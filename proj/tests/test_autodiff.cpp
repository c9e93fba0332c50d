#include <gtest/gtest.h>

#include <functional>

#include "hgpsl/autodiff.hpp"
#include "hgpsl/simplex.hpp"
#include "op_cases.hpp"
#include "test_support.hpp"

namespace hgpsl {
namespace {

using ad::Tape;
using ad::Var;
using testing::op_cases;
using testing::OpCase;

Tensor row(std::initializer_list<double> xs) {
  Tensor t(1, static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) t(0, i++) = x;
  return t;
}

TEST(Record, AddZeroIsIdentity) {
  Tape tape;
  const Tensor x = row({1.5, -2.0, 3.0});
  EXPECT_EQ(ad::add(tape.leaf(x), tape.constant(Tensor::Zero(1, 3))).value(), x);
}

TEST(Record, MatmulIdentity) {
  Tape tape;
  std::mt19937_64 rng(1);
  const Tensor x = testing::random_tensor(3, 2, rng);
  EXPECT_EQ(ad::matmul(tape.constant(Tensor::Identity(3, 3)), tape.leaf(x)).value(), x);
}

TEST(Record, Relu) {
  Tape tape;
  EXPECT_EQ(ad::relu(tape.leaf(row({-1, 2}))).value(), row({0, 2}));
}

TEST(Backward, SumGivesOnes) {
  Tape tape;
  Var x = tape.leaf(Tensor::Constant(3, 4, 0.3));
  tape.backward(ad::sum(x));
  EXPECT_EQ(x.grad(), Tensor::Ones(3, 4));
}

TEST(Backward, HalfSquaredNormGivesInput) {
  Tape tape;
  const Tensor v = row({0.5, -1.25, 2.0});
  Var x = tape.leaf(v);
  tape.backward(ad::scale(ad::sum(ad::mul(x, x)), 0.5));
  EXPECT_EQ(x.grad(), v);
}

TEST(Backward, SumRelu) {
  Tape tape;
  Var x = tape.leaf(row({-1, 2}));
  tape.backward(ad::sum(ad::relu(x)));
  EXPECT_EQ(x.grad(), row({0, 1}));
}

TEST(Backward, ReluAtZeroHasZeroDerivative) {
  Tape tape;
  Var x = tape.leaf(row({0.0}));
  tape.backward(ad::sum(ad::relu(x)));
  EXPECT_EQ(x.grad()(0, 0), 0.0);
}

TEST(Backward, NonScalarLossThrows) {
  Tape tape;
  Var x = tape.leaf(row({1, 2}));
  EXPECT_THROW(tape.backward(x), ContractError);
}

TEST(Backward, SparsemaxSingletonSupportBlocksGradient) {
  Tape tape;
  Var z = tape.leaf(row({2, 0}));
  const Var p = ad::sparsemax_rows(z);
  EXPECT_EQ(p.value(), row({1, 0}));
  tape.backward(ad::sum(ad::mul(p, tape.constant(row({3.0, -7.0})))));
  EXPECT_EQ(z.grad(), row({0, 0}));
}

TEST(Backward, ColMaxRoutesToLowestArgmax) {
  Tape tape;
  Tensor v(3, 2);
  v << 1, 5, 4, 5, 4, 2;
  Var x = tape.leaf(v);
  const Var m = ad::col_max(x);
  EXPECT_EQ(m.value(), row({4, 5}));
  tape.backward(ad::sum(m));
  Tensor expected(3, 2);
  expected << 0, 1, 1, 0, 0, 0;
  EXPECT_EQ(x.grad(), expected);
}

TEST(Backward, DuplicatedUseAccumulates) {
  std::mt19937_64 rng(2);
  const Tensor a = testing::random_tensor(3, 3, rng);
  const Tensor w = testing::random_tensor(3, 3, rng);
  auto loss = [&](Tape& tape, Var left, Var right) {
    return ad::sum(ad::mul(ad::tanh(ad::matmul(left, right)), tape.constant(w)));
  };
  Tape shared;
  Var x = shared.leaf(a);
  shared.backward(loss(shared, x, x));

  Tape split;
  Var x1 = split.leaf(a);
  Var x2 = split.leaf(a);
  split.backward(loss(split, x1, x2));
  EXPECT_LE((x.grad() - (x1.grad() + x2.grad())).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Backward, RepeatedBackwardIsBitIdentical) {
  std::mt19937_64 rng(3);
  Tape tape;
  Var x = tape.leaf(testing::random_tensor(4, 3, rng));
  Var w = tape.leaf(testing::random_tensor(3, 5, rng));
  const Var loss = ad::sum(ad::sparsemax_rows(ad::tanh(ad::matmul(x, w))));
  tape.backward(loss);
  const Tensor gx = x.grad(), gw = w.grad();
  tape.zero_grad();
  EXPECT_TRUE(x.grad().isZero(0.0));
  tape.backward(loss);
  EXPECT_EQ(x.grad(), gx);
  EXPECT_EQ(w.grad(), gw);
}

TEST(Ops, ShapeErrors) {
  Tape tape;
  Var a = tape.leaf(Tensor::Zero(2, 3));
  Var b = tape.leaf(Tensor::Zero(3, 2));
  EXPECT_THROW(ad::add(a, b), ShapeError);
  EXPECT_THROW(ad::mul(a, b), ShapeError);
  EXPECT_THROW(ad::matmul(a, a), ShapeError);
  EXPECT_THROW(ad::concat_cols(a, b), ShapeError);
  EXPECT_THROW(ad::add_row(a, b), ShapeError);
  EXPECT_THROW(ad::spmm(sparse_identity<double>(2), b), ShapeError);
}

TEST(Ops, NonFiniteResultThrows) {
  Tape tape;
  Var x = tape.leaf(row({-1.0}));
  EXPECT_THROW(ad::log(x), NumericError);
}

TEST(Ops, IndexErrors) {
  Tape tape;
  Var a = tape.leaf(Tensor::Zero(2, 3));
  const std::vector<Index> bad = {0, 2};
  EXPECT_THROW(ad::gather_rows(a, bad), IndexError);
  const std::vector<Index> label = {3};
  EXPECT_THROW(ad::cross_entropy(tape.leaf(Tensor::Zero(1, 3)), label), IndexError);
}

TEST(CrossEntropy, UniformLogitsGiveLogClasses) {
  Tape tape;
  const std::vector<Index> labels = {1, 0};
  const Var loss = ad::cross_entropy(tape.leaf(Tensor::Zero(2, 4)), labels);
  EXPECT_NEAR(loss.value()(0, 0), 2.0 * std::log(4.0), 1e-15);
}

TEST(GradCheck, HalfSquaredNorm) {
  std::mt19937_64 rng(4);
  const std::vector<Tensor> params = {testing::random_tensor(3, 4, rng)};
  const auto report = ad::grad_check(
      [](Tape&, std::span<const Var> p) { return ad::scale(ad::sum(ad::mul(p[0], p[0])), 0.5); }, params);
  EXPECT_LT(report.max_rel_error, 1e-9);
}

TEST(GradCheck, ConstantFunction) {
  const std::vector<Tensor> params = {Tensor::Ones(2, 2)};
  const auto report = ad::grad_check(
      [](Tape& tape, std::span<const Var>) { return tape.constant(Tensor::Constant(1, 1, 3.0)); }, params);
  EXPECT_EQ(report.max_rel_error, 0.0);
}

TEST(GradCheck, DetectsWrongGradient) {
  const std::vector<Tensor> params = {Tensor::Constant(1, 3, 0.7)};
  const auto report = ad::grad_check(
      [](Tape& tape, std::span<const Var> p) {
        // value sum(x), recorded gradient 2
        const Var s = ad::sum(p[0]);
        const std::vector<Var> parents = {p[0]};
        return tape.record(s.value(), parents, [v = p[0]](const Tensor& up, Tape& t) {
          t.accumulate(v, Tensor::Constant(v.rows(), v.cols(), 2.0 * up(0, 0)));
        });
      },
      params);
  EXPECT_NEAR(report.max_rel_error, 1.0, 1e-6);
}

// ---------------------------------------------------------------------------

class PerOpGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(PerOpGradient, MatchesCentralDifferences) {
  const OpCase op = op_cases()[GetParam()];
  std::mt19937_64 rng(1000 + GetParam());
  int checked = 0;
  int draws = 0;
  while (checked < 20) {
    ASSERT_LT(++draws, 2000) << op.name << ": no smooth sample found";
    const auto params = op.sample(rng);
    if (!op.smooth(params)) continue;
    const auto report = ad::grad_check(op.build, params, 1e-6);
    EXPECT_LT(report.max_rel_error, 1e-5) << op.name << " at sample " << checked;
    ++checked;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, PerOpGradient, ::testing::Range<std::size_t>(0, op_cases().size()),
                         [](const ::testing::TestParamInfo<std::size_t>& info) {
                           return op_cases()[info.param].name;
                         });

TEST(Activate, KnownNames) {
  Tape tape;
  Var x = tape.leaf(row({-1.0, 0.5}));
  EXPECT_EQ(ad::activate(x, "relu").value(), row({0.0, 0.5}));
  EXPECT_EQ(ad::activate(x, "identity").value(), row({-1.0, 0.5}));
  EXPECT_NEAR(ad::activate(x, "tanh").value()(0, 1), std::tanh(0.5), 1e-15);
  EXPECT_THROW(ad::activate(x, "gelu"), ConfigError);
}

}  // namespace
}  // namespace hgpsl
