// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "compstyle/tensor.hpp"

COMPSTYLE_NAMESPACE_BEGIN

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update of `params` from `grads` (shape-aligned).
/// Moments are kept in 64-bit precision.
void adam_step(std::span<Tensor> params, std::span<const std::span<const Real>> grads,
               AdamState& state, double lr);

/// Adam over a fixed parameter list, reading each parameter's accumulated
/// gradient (missing gradients count as zero).
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr) : params_(std::move(params)), lr_(lr) {}

  void zero_grad();
  void step();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  const AdamState& state() const { return state_; }
  std::span<const Tensor> params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  double lr_;
  AdamState state_;
};

COMPSTYLE_NAMESPACE_END
