// SPDX-License-Identifier: Apache-2.0
#pragma once

// Central finite-difference oracle for reverse-mode gradients. Intended for
// the 64-bit build; the FD quotient is formed in double either way.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "compstyle/ops.hpp"
#include "compstyle/tensor.hpp"

namespace compstyle::test {

struct GradCheckResult {
  double worst_relative_error = 0.0;  // over inputs, ||analytic - fd|| / max(||analytic||, ||fd||)
  std::size_t input_index = 0;
};

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

inline double evaluate(const ScalarFn& fn, const std::vector<Tensor>& inputs) {
  NoGradGuard guard;
  return static_cast<double>(fn(inputs).item());
}

/// Compares d fn / d inputs from backward() with central differences of
/// step `h`. Inputs are modified in place during probing and restored.
inline GradCheckResult grad_check(const ScalarFn& fn, std::vector<Tensor> inputs, double h = 1e-3) {
  for (auto& t : inputs) {
    t.zero_grad();
    t.set_requires_grad(true);
  }
  fn(inputs).backward();
  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].data();
    std::vector<double> analytic(values.size(), 0.0);
    if (inputs[k].has_grad())
      for (std::size_t i = 0; i < values.size(); ++i) analytic[i] = inputs[k].grad()[i];
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Real saved = values[i];
      values[i] = static_cast<Real>(saved + h);
      const double up = evaluate(fn, inputs);
      values[i] = static_cast<Real>(saved - h);
      const double down = evaluate(fn, inputs);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    const double rel = std::sqrt(diff2) / denom;
    if (rel > result.worst_relative_error) {
      result.worst_relative_error = rel;
      result.input_index = k;
    }
  }
  return result;
}

/// Scalarizes a tensor-valued op with a fixed random projection.
inline Tensor project(const Tensor& y, const Tensor& weights) { return sum(mul(y, weights)); }

}  // namespace compstyle::test
