// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "compstyle/error.hpp"
#include "compstyle/kernels/kernels.hpp"
#include "compstyle/ops.hpp"

COMPSTYLE_NAMESPACE_BEGIN

using detail::grad_buffer;
using detail::make_result;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

// Unary op whose derivative is a function of (x, y).
template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, std::string_view name, Fwd fwd, Deriv deriv) {
  const auto xs = x.data();
  std::vector<Real> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = fwd(xs[i]);
  auto y = std::make_shared<std::vector<Real>>();
  if (x.requires_grad() && grad_mode_enabled()) *y = out;
  return make_result(x.shape(), std::move(out), name, {x}, [x, y, deriv](std::span<const Real> g) {
    Real* gx = grad_buffer(x);
    if (!gx) return;
    const auto xs = x.data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xs[i], (*y)[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<Real> out(a.data().begin(), a.data().end());
  kernels::active<Real>().axpy(out.size(), Real(1), b.data().data(), out.data());
  return make_result(a.shape(), std::move(out), "add", {a, b}, [a, b](std::span<const Real> g) {
    const auto& k = kernels::active<Real>();
    if (Real* ga = grad_buffer(a)) k.axpy(g.size(), Real(1), g.data(), ga);
    if (Real* gb = grad_buffer(b)) k.axpy(g.size(), Real(1), g.data(), gb);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<Real> out(a.data().begin(), a.data().end());
  kernels::active<Real>().axpy(out.size(), Real(-1), b.data().data(), out.data());
  return make_result(a.shape(), std::move(out), "sub", {a, b}, [a, b](std::span<const Real> g) {
    const auto& k = kernels::active<Real>();
    if (Real* ga = grad_buffer(a)) k.axpy(g.size(), Real(1), g.data(), ga);
    if (Real* gb = grad_buffer(b)) k.axpy(g.size(), Real(-1), g.data(), gb);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<Real> out(a.data().size());
  kernels::active<Real>().mul(out.size(), a.data().data(), b.data().data(), out.data());
  return make_result(a.shape(), std::move(out), "mul", {a, b}, [a, b](std::span<const Real> g) {
    const auto av = a.data();
    const auto bv = b.data();
    if (Real* ga = grad_buffer(a))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    if (Real* gb = grad_buffer(b))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / bv[i];
  return make_result(a.shape(), std::move(out), "div", {a, b}, [a, b](std::span<const Real> g) {
    const auto av = a.data();
    const auto bv = b.data();
    if (Real* ga = grad_buffer(a))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv[i];
    if (Real* gb = grad_buffer(b))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * av[i] / (bv[i] * bv[i]);
  });
}

Tensor add_scalar(const Tensor& x, Real value) {
  return unary(x, "add_scalar", [value](Real v) { return v + value; },
               [](Real, Real) { return Real(1); });
}

Tensor scale(const Tensor& x, Real factor) {
  return unary(x, "scale", [factor](Real v) { return v * factor; },
               [factor](Real, Real) { return factor; });
}

Tensor neg(const Tensor& x) { return scale(x, Real(-1)); }

Tensor relu(const Tensor& x) {
  std::vector<Real> out(x.data().size());
  kernels::active<Real>().relu(out.size(), x.data().data(), out.data());
  return make_result(x.shape(), std::move(out), "relu", {x}, [x](std::span<const Real> g) {
    if (Real* gx = grad_buffer(x))
      kernels::active<Real>().relu_backward(g.size(), x.data().data(), g.data(), gx);
  });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](Real v) {
        // Split by sign so exp never overflows.
        if (v >= 0) return Real(1) / (Real(1) + std::exp(-v));
        const Real e = std::exp(v);
        return e / (Real(1) + e);
      },
      [](Real, Real y) { return y * (Real(1) - y); });
}

Tensor sqrt(const Tensor& x) {
  return unary(x, "sqrt", [](Real v) { return std::sqrt(v); },
               [](Real, Real y) { return Real(0.5) / y; });
}

Tensor square(const Tensor& x) {
  return unary(x, "square", [](Real v) { return v * v; }, [](Real v, Real) { return Real(2) * v; });
}

Tensor reciprocal(const Tensor& x) {
  return unary(x, "reciprocal", [](Real v) { return Real(1) / v; },
               [](Real, Real y) { return -y * y; });
}

Tensor clamp_min(const Tensor& x, Real lo) {
  return unary(x, "clamp_min", [lo](Real v) { return v > lo ? v : lo; },
               [lo](Real v, Real) { return v > lo ? Real(1) : Real(0); });
}

Tensor clamp(const Tensor& x, Real lo, Real hi) {
  return unary(x, "clamp", [lo, hi](Real v) { return v < lo ? lo : (v > hi ? hi : v); },
               [lo, hi](Real v, Real) { return (v > lo && v < hi) ? Real(1) : Real(0); });
}

Tensor sum(const Tensor& x) {
  const double s = kernels::active<Real>().sum(x.data().size(), x.data().data());
  return make_result({}, {static_cast<Real>(s)}, "sum", {x}, [x](std::span<const Real> g) {
    Real* gx = grad_buffer(x);
    if (!gx) return;
    const auto n = static_cast<std::size_t>(x.numel());
    for (std::size_t i = 0; i < n; ++i) gx[i] += g[0];
  });
}

Tensor mean(const Tensor& x) {
  const auto n = static_cast<std::size_t>(x.numel());
  if (n == 0) throw DimensionError("mean of empty tensor");
  const double s = kernels::active<Real>().sum(n, x.data().data());
  return make_result({}, {static_cast<Real>(s / static_cast<double>(n))}, "mean", {x},
                     [x, n](std::span<const Real> g) {
                       Real* gx = grad_buffer(x);
                       if (!gx) return;
                       const Real w = g[0] / static_cast<Real>(n);
                       for (std::size_t i = 0; i < n; ++i) gx[i] += w;
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (compstyle::numel(shape) != x.numel())
    throw DimensionError("reshape " + shape_string(x.shape()) + " -> " + shape_string(shape));
  std::vector<Real> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), "reshape", {x}, [x](std::span<const Real> g) {
    if (Real* gx = grad_buffer(x))
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

COMPSTYLE_NAMESPACE_END
