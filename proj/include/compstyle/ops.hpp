// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differentiable operations. Every function here records its backward pass
// when an input requires a gradient and grad mode is enabled.

#include <utility>
#include <vector>

#include "compstyle/tensor.hpp"

COMPSTYLE_NAMESPACE_BEGIN

// Element-wise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

Tensor add_scalar(const Tensor& x, Real value);
Tensor scale(const Tensor& x, Real factor);
Tensor neg(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor reciprocal(const Tensor& x);
/// max(x, lo); gradient passes only where x > lo.
Tensor clamp_min(const Tensor& x, Real lo);
/// Clamp to [lo, hi]; gradient passes only strictly inside.
Tensor clamp(const Tensor& x, Real lo, Real hi);

/// Sum / mean of all elements to a scalar (64-bit accumulation).
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

/// Cross-correlation; input [N,C,H,W], kernel [K,C,kh,kw] -> [N,K,H',W'].
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride = 1, int padding = 0);
/// x[N,C,...] + bias[C] broadcast over batch and spatial positions.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
/// 2x2 mean pooling, stride 2; H and W must be even.
Tensor avg_pool2x(const Tensor& x);
/// Nearest-neighbour 2x upsampling.
Tensor upsample2x(const Tensor& x);

/// Per (n,c) spatial mean of x[N,C,H,W] -> [N,C].
Tensor instance_mean(const Tensor& x);
/// Per (n,c) population standard deviation (divisor H*W) -> [N,C].
/// The derivative uses max(sigma, 1e-5) in its denominator.
Tensor instance_std(const Tensor& x);
/// (instance_mean(x), instance_std(x)).
std::pair<Tensor, Tensor> instance_stats(const Tensor& x);

/// x[N,C,H,W] * scale[N,C] + shift[N,C], broadcast over spatial positions.
Tensor channel_affine(const Tensor& x, const Tensor& scale, const Tensor& shift);
/// Population variance over rows: v[B,C] -> [C].
Tensor batch_variance(const Tensor& v);
/// v[C] -> [rows, C].
Tensor broadcast_rows(const Tensor& v, std::int64_t rows);
/// v[B,...] * s[B] row-wise.
Tensor scale_rows(const Tensor& v, const Tensor& s);
/// out[i] = x[index[i]] along axis 0.
Tensor gather_rows(const Tensor& x, const std::vector<int>& index);

/// Mean over N*H*W of -log softmax(logits)[label]; labels [N,H,W] in [0,K).
Tensor softmax_ce_loss(const Tensor& logits, const IntTensor& labels);
/// 1 - mean over classes of (2*sum(p*g) + smooth) / (sum(p) + sum(g) + smooth),
/// with p = softmax(logits) and sums over the whole batch.
Tensor soft_dice_loss(const Tensor& logits, const IntTensor& labels, Real smooth = 1);
/// Mean squared difference.
Tensor mse_loss(const Tensor& a, const Tensor& b);

/// Softmax over the channel axis of [N,K,H,W]; not recorded on the tape.
Tensor softmax_channels(const Tensor& logits);
/// Channel argmax of [N,K,H,W] -> [N,H,W].
IntTensor argmax_channels(const Tensor& logits);

COMPSTYLE_NAMESPACE_END
