// SPDX-License-Identifier: Apache-2.0
#include "compstyle/optim.hpp"

#include <cmath>

#include "compstyle/error.hpp"

COMPSTYLE_NAMESPACE_BEGIN

void adam_step(std::span<Tensor> params, std::span<const std::span<const Real>> grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size())
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " params but " +
                         std::to_string(grads.size()) + " gradients");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!grads[i].empty() && static_cast<std::int64_t>(grads[i].size()) != params[i].numel())
      throw DimensionError("adam_step: gradient " + std::to_string(i) + " size mismatch");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(static_cast<std::size_t>(params[i].numel()), 0.0);
      state.v[i].assign(static_cast<std::size_t>(params[i].numel()), 0.0);
    }
  } else if (state.m.size() != params.size()) {
    throw DimensionError("adam_step: state was built for a different parameter list");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g.empty() ? 0.0 : static_cast<double>(g[j]);
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] = static_cast<Real>(static_cast<double>(w[j]) - lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  std::vector<std::span<const Real>> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.push_back(p.grad());
  adam_step(params_, grads, state_, lr_);
}

COMPSTYLE_NAMESPACE_END
