// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "compstyle/error.hpp"
#include "compstyle/kernels/kernels.hpp"
#include "compstyle/ops.hpp"

COMPSTYLE_NAMESPACE_BEGIN

using detail::grad_buffer;
using detail::make_result;

namespace {

struct LogitGeometry {
  std::int64_t n, k, hw;
};

LogitGeometry check_logits(const Tensor& logits, const IntTensor& labels, const char* op) {
  if (logits.rank() != 4)
    throw DimensionError(std::string(op) + " needs logits [N,K,H,W], got " + shape_string(logits.shape()));
  const Shape expected{logits.dim(0), logits.dim(2), logits.dim(3)};
  if (labels.shape != expected)
    throw DimensionError(std::string(op) + ": labels " + shape_string(labels.shape) + " vs logits " +
                         shape_string(logits.shape()));
  const LogitGeometry g{logits.dim(0), logits.dim(1), logits.dim(2) * logits.dim(3)};
  for (auto v : labels.data)
    if (v < 0 || v >= g.k)
      throw IndexError(std::string(op) + ": label " + std::to_string(v) + " outside [0," + std::to_string(g.k) + ")");
  return g;
}

// Softmax over the channel axis in 64-bit precision.
std::vector<double> softmax64(const Tensor& logits, const LogitGeometry& g) {
  std::vector<double> p(logits.data().size());
  const Real* z = logits.data().data();
  for (std::int64_t n = 0; n < g.n; ++n)
    for (std::int64_t i = 0; i < g.hw; ++i) {
      const std::int64_t base = n * g.k * g.hw + i;
      double zmax = z[base];
      for (std::int64_t c = 1; c < g.k; ++c) zmax = std::max(zmax, static_cast<double>(z[base + c * g.hw]));
      double s = 0.0;
      for (std::int64_t c = 0; c < g.k; ++c) {
        const double e = std::exp(static_cast<double>(z[base + c * g.hw]) - zmax);
        p[static_cast<std::size_t>(base + c * g.hw)] = e;
        s += e;
      }
      for (std::int64_t c = 0; c < g.k; ++c) p[static_cast<std::size_t>(base + c * g.hw)] /= s;
    }
  return p;
}

}  // namespace

Tensor softmax_ce_loss(const Tensor& logits, const IntTensor& labels) {
  const LogitGeometry g = check_logits(logits, labels, "softmax_ce_loss");
  auto p = softmax64(logits, g);
  const double count = static_cast<double>(g.n * g.hw);
  double loss = 0.0;
  for (std::int64_t n = 0; n < g.n; ++n)
    for (std::int64_t i = 0; i < g.hw; ++i) {
      const auto label = labels.data[static_cast<std::size_t>(n * g.hw + i)];
      loss -= std::log(std::max(p[static_cast<std::size_t>((n * g.k + label) * g.hw + i)], 1e-300));
    }
  return make_result({}, {static_cast<Real>(loss / count)}, "softmax_ce_loss", {logits},
                     [logits, labels, g, p = std::move(p), count](std::span<const Real> gout) {
                       Real* gz = grad_buffer(logits);
                       if (!gz) return;
                       const double w = gout[0] / count;
                       for (std::int64_t n = 0; n < g.n; ++n)
                         for (std::int64_t c = 0; c < g.k; ++c)
                           for (std::int64_t i = 0; i < g.hw; ++i) {
                             const auto idx = static_cast<std::size_t>((n * g.k + c) * g.hw + i);
                             const double onehot = labels.data[static_cast<std::size_t>(n * g.hw + i)] == c ? 1.0 : 0.0;
                             gz[idx] += static_cast<Real>(w * (p[idx] - onehot));
                           }
                     });
}

Tensor soft_dice_loss(const Tensor& logits, const IntTensor& labels, Real smooth) {
  const LogitGeometry g = check_logits(logits, labels, "soft_dice_loss");
  auto p = softmax64(logits, g);
  // Per class: intersection I = sum p*onehot, total S = sum p + sum onehot.
  std::vector<double> inter(static_cast<std::size_t>(g.k), 0.0), total(static_cast<std::size_t>(g.k), 0.0);
  for (std::int64_t n = 0; n < g.n; ++n)
    for (std::int64_t c = 0; c < g.k; ++c)
      for (std::int64_t i = 0; i < g.hw; ++i) {
        const double pv = p[static_cast<std::size_t>((n * g.k + c) * g.hw + i)];
        const bool hit = labels.data[static_cast<std::size_t>(n * g.hw + i)] == c;
        total[static_cast<std::size_t>(c)] += pv + (hit ? 1.0 : 0.0);
        if (hit) inter[static_cast<std::size_t>(c)] += pv;
      }
  const double eps = smooth;
  double dice_sum = 0.0;
  for (std::int64_t c = 0; c < g.k; ++c)
    dice_sum += (2.0 * inter[static_cast<std::size_t>(c)] + eps) / (total[static_cast<std::size_t>(c)] + eps);
  const double loss = 1.0 - dice_sum / static_cast<double>(g.k);
  return make_result(
      {}, {static_cast<Real>(loss)}, "soft_dice_loss", {logits},
      [logits, labels, g, eps, p = std::move(p), inter = std::move(inter), total = std::move(total)](std::span<const Real> gout) {
        Real* gz = grad_buffer(logits);
        if (!gz) return;
        const double scale = -gout[0] / static_cast<double>(g.k);
        std::vector<double> gp(static_cast<std::size_t>(g.k));
        for (std::int64_t n = 0; n < g.n; ++n)
          for (std::int64_t i = 0; i < g.hw; ++i) {
            const auto label = labels.data[static_cast<std::size_t>(n * g.hw + i)];
            // dL/dp_c at this pixel
            double dot = 0.0;
            for (std::int64_t c = 0; c < g.k; ++c) {
              const double s = total[static_cast<std::size_t>(c)] + eps;
              const double num = 2.0 * inter[static_cast<std::size_t>(c)] + eps;
              const double onehot = label == c ? 1.0 : 0.0;
              gp[static_cast<std::size_t>(c)] = scale * (2.0 * onehot * s - num) / (s * s);
              dot += gp[static_cast<std::size_t>(c)] * p[static_cast<std::size_t>((n * g.k + c) * g.hw + i)];
            }
            for (std::int64_t c = 0; c < g.k; ++c) {
              const auto idx = static_cast<std::size_t>((n * g.k + c) * g.hw + i);
              gz[idx] += static_cast<Real>(p[idx] * (gp[static_cast<std::size_t>(c)] - dot));
            }
          }
      });
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError("mse_loss: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  const auto n = a.data().size();
  if (n == 0) throw DimensionError("mse_loss of empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    s += d * d;
  }
  return make_result({}, {static_cast<Real>(s / static_cast<double>(n))}, "mse_loss", {a, b},
                     [a, b, n](std::span<const Real> g) {
                       const double w = 2.0 * g[0] / static_cast<double>(n);
                       Real* ga = grad_buffer(a);
                       Real* gb = grad_buffer(b);
                       for (std::size_t i = 0; i < n; ++i) {
                         const double d = w * (static_cast<double>(a.data()[i]) - b.data()[i]);
                         if (ga) ga[i] += static_cast<Real>(d);
                         if (gb) gb[i] -= static_cast<Real>(d);
                       }
                     });
}

Tensor softmax_channels(const Tensor& logits) {
  if (logits.rank() != 4) throw DimensionError("softmax_channels needs [N,K,H,W]");
  const LogitGeometry g{logits.dim(0), logits.dim(1), logits.dim(2) * logits.dim(3)};
  const auto p = softmax64(logits, g);
  std::vector<Real> out(p.begin(), p.end());
  return Tensor::from(logits.shape(), std::move(out));
}

IntTensor argmax_channels(const Tensor& logits) {
  if (logits.rank() != 4) throw DimensionError("argmax_channels needs [N,K,H,W]");
  const std::int64_t n = logits.dim(0), k = logits.dim(1), hw = logits.dim(2) * logits.dim(3);
  IntTensor out = IntTensor::zeros({n, logits.dim(2), logits.dim(3)});
  const Real* z = logits.data().data();
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t i = 0; i < hw; ++i) {
      std::int32_t best = 0;
      Real best_v = z[b * k * hw + i];
      for (std::int64_t c = 1; c < k; ++c) {
        const Real v = z[(b * k + c) * hw + i];
        if (v > best_v) {
          best_v = v;
          best = static_cast<std::int32_t>(c);
        }
      }
      out.data[static_cast<std::size_t>(b * hw + i)] = best;
    }
  return out;
}

COMPSTYLE_NAMESPACE_END
