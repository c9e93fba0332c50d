#pragma once

// Normalizations onto the probability simplex: the sorting-based sparsemax
// threshold, sparsemax itself, and a max-shifted softmax.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hgpsl/tensor.hpp"

namespace hgpsl {

template <typename Scalar>
struct ThresholdResult {
  Scalar tau;
  Index rho;  // support size
};

// Sort z descending into u; rho is the largest j with
// u_j + (1 - sum_{i<=j} u_i) / j > 0, and tau = (sum_{i<=rho} u_i - 1) / rho.
template <typename D>
ThresholdResult<typename D::Scalar> tau_threshold(const Eigen::MatrixBase<D>& z) {
  using Scalar = typename D::Scalar;
  const Index n = z.size();
  if (n == 0) throw ContractError("tau_threshold: empty input");
  const Vector<Scalar> zz = z;
  std::vector<Scalar> u(zz.data(), zz.data() + n);
  std::sort(u.begin(), u.end(), std::greater<Scalar>());

  Scalar cumsum = 0;
  Scalar support_sum = u[0];
  Index rho = 1;
  for (Index j = 1; j <= n; ++j) {
    cumsum += u[static_cast<std::size_t>(j - 1)];
    if (u[static_cast<std::size_t>(j - 1)] + (Scalar(1) - cumsum) / Scalar(j) > Scalar(0)) {
      rho = j;
      support_sum = cumsum;
    }
  }
  return {(support_sum - Scalar(1)) / Scalar(rho), rho};
}

template <typename D>
Vector<typename D::Scalar> sparsemax(const Eigen::MatrixBase<D>& z) {
  using Scalar = typename D::Scalar;
  if (z.size() == 0) throw ContractError("sparsemax: empty input");
  // Centering on the max makes z and z + c share every later rounding step.
  Vector<Scalar> zz = z;
  zz.array() -= zz.maxCoeff();
  const auto t = tau_threshold(zz);
  return (zz.array() - t.tau).cwiseMax(Scalar(0)).matrix();
}

template <typename D>
Vector<typename D::Scalar> softmax(const Eigen::MatrixBase<D>& z) {
  using Scalar = typename D::Scalar;
  if (z.size() == 0) throw ContractError("softmax: empty input");
  Vector<Scalar> e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace hgpsl
