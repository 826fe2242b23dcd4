// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "compstyle/error.hpp"
#include "compstyle/kernels/kernels.hpp"
#include "compstyle/ops.hpp"

COMPSTYLE_NAMESPACE_BEGIN

using detail::grad_buffer;
using detail::make_result;

namespace {

struct ConvGeometry {
  std::int64_t n, c, h, w;     // input
  std::int64_t k, kh, kw;      // kernel
  std::int64_t stride, pad;
  std::int64_t oh, ow;         // output
  std::int64_t patch() const { return c * kh * kw; }
  std::int64_t out_plane() const { return oh * ow; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& kernel, int stride, int padding) {
  if (x.rank() != 4 || kernel.rank() != 4)
    throw DimensionError("conv2d expects 4-d input and kernel, got " + shape_string(x.shape()) +
                         " and " + shape_string(kernel.shape()));
  if (stride < 1) throw DimensionError("conv2d stride must be >= 1");
  if (padding < 0) throw DimensionError("conv2d padding must be >= 0");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), kernel.dim(0), kernel.dim(2),
                 kernel.dim(3), stride, padding, 0, 0};
  if (kernel.dim(1) != g.c)
    throw DimensionError("conv2d channel mismatch: input " + shape_string(x.shape()) + ", kernel " +
                         shape_string(kernel.shape()));
  if (g.kh > g.h + 2 * g.pad || g.kw > g.w + 2 * g.pad)
    throw DimensionError("conv2d kernel larger than padded input");
  g.oh = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.ow = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
  return g;
}

// Output columns ox whose input column ox*s - p + dx lies inside [0, w).
struct ColumnRange {
  std::int64_t lo, hi;
};

ColumnRange valid_columns(const ConvGeometry& g, std::int64_t dx) {
  const std::int64_t off = dx - g.pad;
  std::int64_t lo = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
  std::int64_t hi = g.w - off <= 0 ? 0 : (g.w - off + g.stride - 1) / g.stride;
  hi = std::min(hi, g.ow);
  lo = std::min(lo, hi);
  return {lo, hi};
}

// cols[(ci*kh + dy)*kw + dx][oy*ow + ox] = x[ci][oy*s - p + dy][ox*s - p + dx]
void im2col(const ConvGeometry& g, const Real* x, Real* cols) {
  const std::int64_t plane = g.out_plane();
  for (std::int64_t ci = 0; ci < g.c; ++ci)
    for (std::int64_t dy = 0; dy < g.kh; ++dy)
      for (std::int64_t dx = 0; dx < g.kw; ++dx) {
        Real* row = cols + ((ci * g.kh + dy) * g.kw + dx) * plane;
        const Real* src = x + ci * g.h * g.w;
        const ColumnRange r = valid_columns(g, dx);
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + dy;
          Real* dst = row + oy * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.ow, Real(0));
            continue;
          }
          std::fill(dst, dst + r.lo, Real(0));
          const Real* line = src + iy * g.w + dx - g.pad;
          if (g.stride == 1) {
            std::copy(line + r.lo, line + r.hi, dst + r.lo);
          } else {
            for (std::int64_t ox = r.lo; ox < r.hi; ++ox) dst[ox] = line[ox * g.stride];
          }
          std::fill(dst + r.hi, dst + g.ow, Real(0));
        }
      }
}

void col2im_add(const ConvGeometry& g, const Real* cols, Real* x) {
  const std::int64_t plane = g.out_plane();
  for (std::int64_t ci = 0; ci < g.c; ++ci)
    for (std::int64_t dy = 0; dy < g.kh; ++dy)
      for (std::int64_t dx = 0; dx < g.kw; ++dx) {
        const Real* row = cols + ((ci * g.kh + dy) * g.kw + dx) * plane;
        Real* dst = x + ci * g.h * g.w;
        const ColumnRange r = valid_columns(g, dx);
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + dy;
          if (iy < 0 || iy >= g.h) continue;
          Real* line = dst + iy * g.w + dx - g.pad;
          const Real* src = row + oy * g.ow;
          for (std::int64_t ox = r.lo; ox < r.hi; ++ox) line[ox * g.stride] += src[ox];
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int padding) {
  const ConvGeometry g = conv_geometry(input, kernel, stride, padding);
  const auto& k = kernels::active<Real>();
  const auto patch = static_cast<std::size_t>(g.patch());
  const auto plane = static_cast<std::size_t>(g.out_plane());
  const auto in_sample = static_cast<std::size_t>(g.c * g.h * g.w);
  const auto out_sample = static_cast<std::size_t>(g.k) * plane;

  std::vector<Real> out(static_cast<std::size_t>(g.n) * out_sample);
  std::vector<Real> cols(g.pointwise() ? 0 : patch * plane);
  for (std::int64_t n = 0; n < g.n; ++n) {
    const Real* xs = input.data().data() + static_cast<std::size_t>(n) * in_sample;
    const Real* b = xs;
    if (!g.pointwise()) {
      im2col(g, xs, cols.data());
      b = cols.data();
    }
    k.gemm(false, false, static_cast<std::size_t>(g.k), plane, patch, kernel.data().data(), patch, b,
           plane, out.data() + static_cast<std::size_t>(n) * out_sample, plane, false);
  }

  return make_result(
      {g.n, g.k, g.oh, g.ow}, std::move(out), "conv2d", {input, kernel},
      [input, kernel, g](std::span<const Real> gout) {
        const auto& k = kernels::active<Real>();
        const auto patch = static_cast<std::size_t>(g.patch());
        const auto plane = static_cast<std::size_t>(g.out_plane());
        const auto in_sample = static_cast<std::size_t>(g.c * g.h * g.w);
        const auto out_sample = static_cast<std::size_t>(g.k) * plane;
        Real* gx = grad_buffer(input);
        Real* gw = grad_buffer(kernel);
        std::vector<Real> cols(g.pointwise() ? 0 : patch * plane);
        std::vector<Real> dcols(g.pointwise() ? 0 : patch * plane);
        for (std::int64_t n = 0; n < g.n; ++n) {
          const Real* go = gout.data() + static_cast<std::size_t>(n) * out_sample;
          const Real* xs = input.data().data() + static_cast<std::size_t>(n) * in_sample;
          if (gw) {
            const Real* b = xs;
            if (!g.pointwise()) {
              im2col(g, xs, cols.data());
              b = cols.data();
            }
            // dW[K,patch] += dOut[K,plane] * cols[patch,plane]^T
            k.gemm(false, true, static_cast<std::size_t>(g.k), patch, plane, go, plane, b, plane, gw,
                   patch, true);
          }
          if (gx) {
            Real* gxs = gx + static_cast<std::size_t>(n) * in_sample;
            if (g.pointwise()) {
              k.gemm(true, false, patch, plane, static_cast<std::size_t>(g.k), kernel.data().data(),
                     patch, go, plane, gxs, plane, true);
            } else {
              // dcols[patch,plane] = W[K,patch]^T * dOut[K,plane]
              k.gemm(true, false, patch, plane, static_cast<std::size_t>(g.k), kernel.data().data(),
                     patch, go, plane, dcols.data(), plane, false);
              col2im_add(g, dcols.data(), gxs);
            }
          }
        }
      });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() < 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1))
    throw DimensionError("add_channel_bias: " + shape_string(x.shape()) + " with bias " +
                         shape_string(bias.shape()));
  const std::int64_t n = x.dim(0), c = x.dim(1);
  const std::int64_t inner = c ? x.numel() / (n * c) : 0;
  std::vector<Real> out(x.data().begin(), x.data().end());
  const auto bv = bias.data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t ch = 0; ch < c; ++ch) {
      Real* p = out.data() + (i * c + ch) * inner;
      for (std::int64_t j = 0; j < inner; ++j) p[j] += bv[static_cast<std::size_t>(ch)];
    }
  return make_result(x.shape(), std::move(out), "add_channel_bias", {x, bias},
                     [x, bias, n, c, inner](std::span<const Real> g) {
                       if (Real* gx = grad_buffer(x))
                         for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                       if (Real* gb = grad_buffer(bias))
                         for (std::int64_t i = 0; i < n; ++i)
                           for (std::int64_t ch = 0; ch < c; ++ch) {
                             double s = 0.0;
                             const Real* p = g.data() + (i * c + ch) * inner;
                             for (std::int64_t j = 0; j < inner; ++j) s += p[j];
                             gb[ch] += static_cast<Real>(s);
                           }
                     });
}

Tensor avg_pool2x(const Tensor& x) {
  if (x.rank() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0)
    throw DimensionError("avg_pool2x needs [N,C,H,W] with even H, W; got " + shape_string(x.shape()));
  const std::int64_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t oh = h / 2, ow = w / 2;
  std::vector<Real> out(static_cast<std::size_t>(planes * oh * ow));
  const Real* xs = x.data().data();
  for (std::int64_t p = 0; p < planes; ++p)
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t xi = 0; xi < ow; ++xi) {
        const Real* s = xs + p * h * w + (2 * y) * w + 2 * xi;
        out[static_cast<std::size_t>((p * oh + y) * ow + xi)] =
            Real(0.25) * ((s[0] + s[1]) + (s[w] + s[w + 1]));
      }
  return make_result({x.dim(0), x.dim(1), oh, ow}, std::move(out), "avg_pool2x", {x},
                     [x, planes, h, w, oh, ow](std::span<const Real> g) {
                       Real* gx = grad_buffer(x);
                       if (!gx) return;
                       for (std::int64_t p = 0; p < planes; ++p)
                         for (std::int64_t y = 0; y < oh; ++y)
                           for (std::int64_t xi = 0; xi < ow; ++xi) {
                             const Real v = Real(0.25) * g[static_cast<std::size_t>((p * oh + y) * ow + xi)];
                             Real* d = gx + p * h * w + (2 * y) * w + 2 * xi;
                             d[0] += v;
                             d[1] += v;
                             d[w] += v;
                             d[w + 1] += v;
                           }
                     });
}

Tensor upsample2x(const Tensor& x) {
  if (x.rank() != 4) throw DimensionError("upsample2x needs [N,C,H,W], got " + shape_string(x.shape()));
  const std::int64_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t oh = 2 * h, ow = 2 * w;
  std::vector<Real> out(static_cast<std::size_t>(planes * oh * ow));
  const Real* xs = x.data().data();
  for (std::int64_t p = 0; p < planes; ++p)
    for (std::int64_t y = 0; y < oh; ++y) {
      const Real* src = xs + p * h * w + (y / 2) * w;
      Real* dst = out.data() + (p * oh + y) * ow;
      for (std::int64_t xi = 0; xi < ow; ++xi) dst[xi] = src[xi / 2];
    }
  return make_result({x.dim(0), x.dim(1), oh, ow}, std::move(out), "upsample2x", {x},
                     [x, planes, h, w, oh, ow](std::span<const Real> g) {
                       Real* gx = grad_buffer(x);
                       if (!gx) return;
                       for (std::int64_t p = 0; p < planes; ++p)
                         for (std::int64_t y = 0; y < oh; ++y) {
                           const Real* src = g.data() + (p * oh + y) * ow;
                           Real* dst = gx + p * h * w + (y / 2) * w;
                           for (std::int64_t xi = 0; xi < ow; ++xi) dst[xi / 2] += src[xi];
                         }
                     });
}

COMPSTYLE_NAMESPACE_END
