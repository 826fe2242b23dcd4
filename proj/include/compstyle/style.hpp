// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "compstyle/rng.hpp"
#include "compstyle/tensor.hpp"

COMPSTYLE_NAMESPACE_BEGIN

/// Per-instance, per-channel feature statistics, each [B,C].
struct StyleStats {
  Tensor mu;
  Tensor sigma;
};

StyleStats style_stats(const Tensor& f);

/// Batch spread of the style statistics, each [C].
struct StyleNoiseScale {
  Tensor sigma_gamma;  // population variance of sigma over the batch
  Tensor sigma_beta;   // population variance of mu over the batch
};

/// Throws InsufficientBatchError when B < 2.
StyleNoiseScale batch_style_variance(const Tensor& f);
StyleNoiseScale batch_style_variance(const StyleStats& stats);
StyleNoiseScale zero_noise_scale(std::int64_t channels);

/// Resolved target style: gamma_mix, beta_mix, eps_gamma, eps_beta are [B,C];
/// lambda [B] and perm record how the targets were mixed.
struct StyleParams {
  Tensor gamma_mix;
  Tensor beta_mix;
  Tensor eps_gamma;
  Tensor eps_beta;
  Tensor lambda;
  std::vector<int> perm;
};

/// Instance-normalises f (sigma floored at 1e-5), then applies
/// (gamma_mix + Sg * eps_gamma) * f_hat + (beta_mix + Sb * eps_beta).
Tensor apply_style(const Tensor& f, const StyleParams& p, const StyleNoiseScale& scale);
/// Same, reusing statistics already computed for f.
Tensor apply_style(const Tensor& f, const StyleStats& stats, const StyleParams& p, const StyleNoiseScale& scale);

/// Style relative to the feature it is applied to: target statistics are
/// lambda * stats + (1 - lambda) * stats[perm].
struct StyleHookParams {
  Tensor lambda;     // [B] in [0,1]
  std::vector<int> perm;
  Tensor eps_gamma;  // [B,C]
  Tensor eps_beta;   // [B,C]
};

/// lambda = 1, identity permutation, zero noise.
StyleHookParams identity_hook(std::int64_t batch, std::int64_t channels);
/// lambda ~ Beta(alpha, alpha), eps ~ N(0,1), uniform random permutation.
StyleHookParams random_hook(std::int64_t batch, std::int64_t channels, Rng& rng, double alpha = 0.1);

/// Throws DimensionError when the hook does not fit the statistics.
StyleParams resolve_hook(const StyleStats& stats, const StyleHookParams& hook);
/// Resolves the hook against f and applies it; the noise scale is estimated
/// from f's batch unless given.
Tensor apply_hook(const Tensor& f, const StyleHookParams& hook, const StyleNoiseScale* scale = nullptr);

/// MixStyle: lambda ~ Beta(alpha, alpha) per instance, random permutation,
/// no noise. Throws InsufficientBatchError when B < 2.
Tensor mixstyle(const Tensor& f, double alpha, Rng& rng);
Tensor mixstyle_with(const Tensor& f, const Tensor& lambda, const std::vector<int>& perm);

/// DSU: targets sigma + sqrt(Sg) * eps, mu + sqrt(Sb) * eps' with the spreads
/// floored at 1e-12 under the root.
Tensor dsu(const Tensor& f, Rng& rng);

COMPSTYLE_NAMESPACE_END
