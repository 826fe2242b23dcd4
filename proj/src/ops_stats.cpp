// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "compstyle/error.hpp"
#include "compstyle/ops.hpp"

COMPSTYLE_NAMESPACE_BEGIN

using detail::grad_buffer;
using detail::make_result;

namespace {

constexpr double kSigmaFloor = 1e-5;

struct Planes {
  std::int64_t n, c, hw;
};

Planes planes_of(const Tensor& x, const char* op) {
  if (x.rank() != 4) throw DimensionError(std::string(op) + " needs [N,C,H,W], got " + shape_string(x.shape()));
  const Planes p{x.dim(0), x.dim(1), x.dim(2) * x.dim(3)};
  if (p.hw < 1) throw DimensionError(std::string(op) + " needs H*W >= 1");
  return p;
}

double plane_mean(const Real* v, std::int64_t hw) {
  double s = 0.0;
  for (std::int64_t i = 0; i < hw; ++i) s += v[i];
  return s / static_cast<double>(hw);
}

double plane_std(const Real* v, std::int64_t hw, double mu) {
  double s = 0.0;
  for (std::int64_t i = 0; i < hw; ++i) {
    const double d = v[i] - mu;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(hw));
}

void require_rows(const Tensor& v, const char* op) {
  if (v.rank() < 1) throw DimensionError(std::string(op) + " needs rank >= 1");
}

}  // namespace

Tensor instance_mean(const Tensor& x) {
  const Planes p = planes_of(x, "instance_mean");
  std::vector<Real> out(static_cast<std::size_t>(p.n * p.c));
  for (std::int64_t i = 0; i < p.n * p.c; ++i)
    out[static_cast<std::size_t>(i)] = static_cast<Real>(plane_mean(x.data().data() + i * p.hw, p.hw));
  return make_result({p.n, p.c}, std::move(out), "instance_mean", {x}, [x, p](std::span<const Real> g) {
    Real* gx = grad_buffer(x);
    if (!gx) return;
    for (std::int64_t i = 0; i < p.n * p.c; ++i) {
      const Real w = g[static_cast<std::size_t>(i)] / static_cast<Real>(p.hw);
      Real* d = gx + i * p.hw;
      for (std::int64_t j = 0; j < p.hw; ++j) d[j] += w;
    }
  });
}

Tensor instance_std(const Tensor& x) {
  const Planes p = planes_of(x, "instance_std");
  const std::size_t count = static_cast<std::size_t>(p.n * p.c);
  std::vector<Real> out(count);
  std::vector<double> mus(count), sigmas(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Real* v = x.data().data() + static_cast<std::int64_t>(i) * p.hw;
    mus[i] = plane_mean(v, p.hw);
    sigmas[i] = plane_std(v, p.hw, mus[i]);
    out[i] = static_cast<Real>(sigmas[i]);
  }
  return make_result({p.n, p.c}, std::move(out), "instance_std", {x},
                     [x, p, mus = std::move(mus), sigmas = std::move(sigmas)](std::span<const Real> g) {
                       Real* gx = grad_buffer(x);
                       if (!gx) return;
                       for (std::size_t i = 0; i < mus.size(); ++i) {
                         // d sigma / d x_j = (x_j - mu) / (HW * sigma)
                         const double w = g[i] / (static_cast<double>(p.hw) *
                                                  std::max(sigmas[i], kSigmaFloor));
                         const Real* v = x.data().data() + static_cast<std::int64_t>(i) * p.hw;
                         Real* d = gx + static_cast<std::int64_t>(i) * p.hw;
                         for (std::int64_t j = 0; j < p.hw; ++j)
                           d[j] += static_cast<Real>(w * (v[j] - mus[i]));
                       }
                     });
}

std::pair<Tensor, Tensor> instance_stats(const Tensor& x) { return {instance_mean(x), instance_std(x)}; }

Tensor channel_affine(const Tensor& x, const Tensor& scale, const Tensor& shift) {
  const Planes p = planes_of(x, "channel_affine");
  const Shape nc{p.n, p.c};
  if (scale.shape() != nc || shift.shape() != nc)
    throw DimensionError("channel_affine: feature " + shape_string(x.shape()) + ", scale " +
                         shape_string(scale.shape()) + ", shift " + shape_string(shift.shape()));
  std::vector<Real> out(x.data().size());
  const Real* xs = x.data().data();
  for (std::int64_t i = 0; i < p.n * p.c; ++i) {
    const Real a = scale.data()[static_cast<std::size_t>(i)];
    const Real b = shift.data()[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < p.hw; ++j) out[static_cast<std::size_t>(i * p.hw + j)] = xs[i * p.hw + j] * a + b;
  }
  return make_result(x.shape(), std::move(out), "channel_affine", {x, scale, shift},
                     [x, scale, shift, p](std::span<const Real> g) {
                       Real* gx = grad_buffer(x);
                       Real* gs = grad_buffer(scale);
                       Real* gt = grad_buffer(shift);
                       const Real* xs = x.data().data();
                       for (std::int64_t i = 0; i < p.n * p.c; ++i) {
                         const Real* gi = g.data() + i * p.hw;
                         if (gx) {
                           const Real a = scale.data()[static_cast<std::size_t>(i)];
                           Real* d = gx + i * p.hw;
                           for (std::int64_t j = 0; j < p.hw; ++j) d[j] += gi[j] * a;
                         }
                         if (gs) {
                           double s = 0.0;
                           for (std::int64_t j = 0; j < p.hw; ++j) s += static_cast<double>(gi[j]) * xs[i * p.hw + j];
                           gs[i] += static_cast<Real>(s);
                         }
                         if (gt) {
                           double s = 0.0;
                           for (std::int64_t j = 0; j < p.hw; ++j) s += gi[j];
                           gt[i] += static_cast<Real>(s);
                         }
                       }
                     });
}

Tensor batch_variance(const Tensor& v) {
  if (v.rank() != 2) throw DimensionError("batch_variance needs [B,C], got " + shape_string(v.shape()));
  const std::int64_t b = v.dim(0), c = v.dim(1);
  if (b < 1) throw DimensionError("batch_variance of empty batch");
  std::vector<double> means(static_cast<std::size_t>(c), 0.0);
  const Real* vs = v.data().data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::int64_t i = 0; i < b; ++i) s += vs[i * c + ch];
    means[static_cast<std::size_t>(ch)] = s / static_cast<double>(b);
  }
  std::vector<Real> out(static_cast<std::size_t>(c));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::int64_t i = 0; i < b; ++i) {
      const double d = vs[i * c + ch] - means[static_cast<std::size_t>(ch)];
      s += d * d;
    }
    out[static_cast<std::size_t>(ch)] = static_cast<Real>(s / static_cast<double>(b));
  }
  return make_result({c}, std::move(out), "batch_variance", {v},
                     [v, b, c, means = std::move(means)](std::span<const Real> g) {
                       Real* gv = grad_buffer(v);
                       if (!gv) return;
                       const Real* vs = v.data().data();
                       for (std::int64_t i = 0; i < b; ++i)
                         for (std::int64_t ch = 0; ch < c; ++ch)
                           gv[i * c + ch] += static_cast<Real>(
                               2.0 * g[static_cast<std::size_t>(ch)] *
                               (vs[i * c + ch] - means[static_cast<std::size_t>(ch)]) / static_cast<double>(b));
                     });
}

Tensor broadcast_rows(const Tensor& v, std::int64_t rows) {
  require_rows(v, "broadcast_rows");
  const auto width = static_cast<std::size_t>(v.numel());
  std::vector<Real> out;
  out.reserve(width * static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) out.insert(out.end(), v.data().begin(), v.data().end());
  Shape shape{rows};
  shape.insert(shape.end(), v.shape().begin(), v.shape().end());
  return make_result(std::move(shape), std::move(out), "broadcast_rows", {v},
                     [v, rows, width](std::span<const Real> g) {
                       Real* gv = grad_buffer(v);
                       if (!gv) return;
                       for (std::int64_t r = 0; r < rows; ++r)
                         for (std::size_t j = 0; j < width; ++j) gv[j] += g[static_cast<std::size_t>(r) * width + j];
                     });
}

Tensor scale_rows(const Tensor& v, const Tensor& s) {
  require_rows(v, "scale_rows");
  if (s.rank() != 1 || s.dim(0) != v.dim(0))
    throw DimensionError("scale_rows: " + shape_string(v.shape()) + " by " + shape_string(s.shape()));
  const std::int64_t rows = v.dim(0);
  const std::int64_t width = rows ? v.numel() / rows : 0;
  std::vector<Real> out(v.data().size());
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t j = 0; j < width; ++j)
      out[static_cast<std::size_t>(r * width + j)] = v.data()[static_cast<std::size_t>(r * width + j)] *
                                                     s.data()[static_cast<std::size_t>(r)];
  return make_result(v.shape(), std::move(out), "scale_rows", {v, s}, [v, s, rows, width](std::span<const Real> g) {
    Real* gv = grad_buffer(v);
    Real* gs = grad_buffer(s);
    for (std::int64_t r = 0; r < rows; ++r) {
      const Real sr = s.data()[static_cast<std::size_t>(r)];
      double acc = 0.0;
      for (std::int64_t j = 0; j < width; ++j) {
        const auto idx = static_cast<std::size_t>(r * width + j);
        if (gv) gv[idx] += g[idx] * sr;
        acc += static_cast<double>(g[idx]) * v.data()[idx];
      }
      if (gs) gs[r] += static_cast<Real>(acc);
    }
  });
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& index) {
  require_rows(x, "gather_rows");
  const std::int64_t rows = x.dim(0);
  const std::int64_t width = rows ? x.numel() / rows : 0;
  for (int i : index)
    if (i < 0 || i >= rows) throw IndexError("gather_rows index " + std::to_string(i) + " out of range");
  std::vector<Real> out;
  out.reserve(index.size() * static_cast<std::size_t>(width));
  for (int i : index) {
    auto first = x.data().begin() + static_cast<std::ptrdiff_t>(i * width);
    out.insert(out.end(), first, first + width);
  }
  Shape shape = x.shape();
  shape[0] = static_cast<std::int64_t>(index.size());
  return make_result(std::move(shape), std::move(out), "gather_rows", {x}, [x, index, width](std::span<const Real> g) {
    Real* gx = grad_buffer(x);
    if (!gx) return;
    for (std::size_t r = 0; r < index.size(); ++r)
      for (std::int64_t j = 0; j < width; ++j)
        gx[index[r] * width + j] += g[r * static_cast<std::size_t>(width) + static_cast<std::size_t>(j)];
  });
}

COMPSTYLE_NAMESPACE_END
