// SPDX-License-Identifier: Apache-2.0
#include "compstyle/style.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "compstyle/error.hpp"
#include "compstyle/ops.hpp"

COMPSTYLE_NAMESPACE_BEGIN

namespace {

constexpr Real kSigmaFloor = Real(1e-5);
// Keeps the square root of a zero spread differentiable.
constexpr Real kVarianceFloor = Real(1e-12);

void require_batch(const Tensor& f, const char* op) {
  if (f.rank() != 4) throw DimensionError(std::string(op) + " needs [B,C,H,W], got " + shape_string(f.shape()));
  if (f.dim(0) < 2)
    throw InsufficientBatchError(std::string(op) + " needs a batch of at least 2, got " + std::to_string(f.dim(0)));
}

void require_perm(const std::vector<int>& perm, std::int64_t batch) {
  if (static_cast<std::int64_t>(perm.size()) != batch)
    throw DimensionError("permutation length " + std::to_string(perm.size()) + " vs batch " + std::to_string(batch));
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i] != static_cast<int>(i)) throw IndexError("not a permutation of the batch indices");
}

Tensor one_minus(const Tensor& t) { return add_scalar(neg(t), Real(1)); }

}  // namespace

StyleStats style_stats(const Tensor& f) {
  auto [mu, sigma] = instance_stats(f);
  return {std::move(mu), std::move(sigma)};
}

StyleNoiseScale batch_style_variance(const StyleStats& stats) {
  if (stats.mu.rank() != 2 || stats.mu.dim(0) < 2)
    throw InsufficientBatchError("batch style variance needs at least 2 instances");
  return {batch_variance(stats.sigma), batch_variance(stats.mu)};
}

StyleNoiseScale batch_style_variance(const Tensor& f) {
  require_batch(f, "batch_style_variance");
  return batch_style_variance(style_stats(f));
}

StyleNoiseScale zero_noise_scale(std::int64_t channels) {
  return {Tensor::zeros({channels}), Tensor::zeros({channels})};
}

Tensor apply_style(const Tensor& f, const StyleStats& stats, const StyleParams& p, const StyleNoiseScale& scale) {
  if (f.rank() != 4) throw DimensionError("apply_style needs [B,C,H,W], got " + shape_string(f.shape()));
  const std::int64_t b = f.dim(0), c = f.dim(1);
  const Shape bc{b, c};
  for (const Tensor* t : {&p.gamma_mix, &p.beta_mix, &p.eps_gamma, &p.eps_beta})
    if (t->shape() != bc)
      throw DimensionError("style parameter " + shape_string(t->shape()) + " vs feature " + shape_string(f.shape()));
  if (scale.sigma_gamma.shape() != Shape{c} || scale.sigma_beta.shape() != Shape{c})
    throw DimensionError("noise scale length does not match channel count " + std::to_string(c));

  const Tensor inv = reciprocal(clamp_min(stats.sigma, kSigmaFloor));
  const Tensor normalized = channel_affine(f, inv, neg(mul(stats.mu, inv)));
  const Tensor gamma = add(p.gamma_mix, mul(broadcast_rows(scale.sigma_gamma, b), p.eps_gamma));
  const Tensor beta = add(p.beta_mix, mul(broadcast_rows(scale.sigma_beta, b), p.eps_beta));
  return channel_affine(normalized, gamma, beta);
}

Tensor apply_style(const Tensor& f, const StyleParams& p, const StyleNoiseScale& scale) {
  return apply_style(f, style_stats(f), p, scale);
}

StyleHookParams identity_hook(std::int64_t batch, std::int64_t channels) {
  StyleHookParams h;
  h.lambda = Tensor::full({batch}, Real(1));
  h.perm.resize(static_cast<std::size_t>(batch));
  std::iota(h.perm.begin(), h.perm.end(), 0);
  h.eps_gamma = Tensor::zeros({batch, channels});
  h.eps_beta = Tensor::zeros({batch, channels});
  return h;
}

StyleHookParams random_hook(std::int64_t batch, std::int64_t channels, Rng& rng, double alpha) {
  StyleHookParams h;
  std::vector<Real> lambda(static_cast<std::size_t>(batch));
  for (auto& v : lambda) v = static_cast<Real>(rng.beta(alpha, alpha));
  h.lambda = Tensor::from({batch}, std::move(lambda));
  h.perm = rng.permutation(static_cast<int>(batch));
  std::vector<Real> eg(static_cast<std::size_t>(batch * channels)), eb(eg.size());
  for (auto& v : eg) v = static_cast<Real>(rng.normal());
  for (auto& v : eb) v = static_cast<Real>(rng.normal());
  h.eps_gamma = Tensor::from({batch, channels}, std::move(eg));
  h.eps_beta = Tensor::from({batch, channels}, std::move(eb));
  return h;
}

StyleParams resolve_hook(const StyleStats& stats, const StyleHookParams& hook) {
  const std::int64_t b = stats.mu.dim(0);
  if (hook.lambda.shape() != Shape{b})
    throw DimensionError("lambda " + shape_string(hook.lambda.shape()) + " vs batch " + std::to_string(b));
  require_perm(hook.perm, b);
  const Tensor rest = one_minus(hook.lambda);
  const auto mix = [&](const Tensor& s) {
    return add(scale_rows(s, hook.lambda), scale_rows(gather_rows(s, hook.perm), rest));
  };
  return {mix(stats.sigma), mix(stats.mu), hook.eps_gamma, hook.eps_beta, hook.lambda, hook.perm};
}

Tensor apply_hook(const Tensor& f, const StyleHookParams& hook, const StyleNoiseScale* scale) {
  const StyleStats stats = style_stats(f);
  const StyleParams p = resolve_hook(stats, hook);
  if (scale) return apply_style(f, stats, p, *scale);
  return apply_style(f, stats, p, batch_style_variance(stats));
}

Tensor mixstyle_with(const Tensor& f, const Tensor& lambda, const std::vector<int>& perm) {
  require_batch(f, "mixstyle");
  const std::int64_t b = f.dim(0), c = f.dim(1);
  StyleHookParams hook{lambda, perm, Tensor::zeros({b, c}), Tensor::zeros({b, c})};
  const StyleNoiseScale none = zero_noise_scale(c);
  return apply_hook(f, hook, &none);
}

Tensor mixstyle(const Tensor& f, double alpha, Rng& rng) {
  require_batch(f, "mixstyle");
  if (!(alpha > 0.0)) throw ConfigError("mixstyle alpha must be > 0");
  const std::int64_t b = f.dim(0);
  std::vector<Real> lambda(static_cast<std::size_t>(b));
  for (auto& v : lambda) v = static_cast<Real>(rng.beta(alpha, alpha));
  return mixstyle_with(f, Tensor::from({b}, std::move(lambda)), rng.permutation(static_cast<int>(b)));
}

Tensor dsu(const Tensor& f, Rng& rng) {
  require_batch(f, "dsu");
  const std::int64_t b = f.dim(0), c = f.dim(1);
  const StyleStats stats = style_stats(f);
  const StyleNoiseScale spread = batch_style_variance(stats);
  std::vector<Real> eg(static_cast<std::size_t>(b * c)), eb(eg.size());
  for (std::size_t i = 0; i < eg.size(); ++i) {
    eg[i] = static_cast<Real>(rng.normal());
    eb[i] = static_cast<Real>(rng.normal());
  }
  const auto spread_std = [b](const Tensor& var) { return broadcast_rows(sqrt(clamp_min(var, kVarianceFloor)), b); };
  StyleParams p;
  p.gamma_mix = add(stats.sigma, mul(spread_std(spread.sigma_gamma), Tensor::from({b, c}, std::move(eg))));
  p.beta_mix = add(stats.mu, mul(spread_std(spread.sigma_beta), Tensor::from({b, c}, std::move(eb))));
  p.eps_gamma = Tensor::zeros({b, c});
  p.eps_beta = Tensor::zeros({b, c});
  p.lambda = Tensor::full({b}, Real(1));
  p.perm.resize(static_cast<std::size_t>(b));
  std::iota(p.perm.begin(), p.perm.end(), 0);
  return apply_style(f, stats, p, zero_noise_scale(c));
}

COMPSTYLE_NAMESPACE_END
