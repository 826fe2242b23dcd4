// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "compstyle/kernels/kernels.hpp"

namespace compstyle::kernels {
namespace {

template <class T>
void gemm_scalar(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
                 std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (!accumulate) std::fill(crow, crow + n, T(0));
    for (std::size_t p = 0; p < k; ++p) {
      const T av = trans_a ? a[p * lda + i] : a[i * lda + p];
      if (av == T(0)) continue;
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * ldb + p];
      } else {
        const T* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template <class T>
void axpy_scalar(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void mul_scalar(std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <class T>
void relu_scalar(std::size_t n, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void relu_backward_scalar(std::size_t n, const T* x, const T* gy, T* gx) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > T(0)) gx[i] += gy[i];
}

template <class T>
double sum_scalar(std::size_t n, const T* x) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

template <class T>
double dot_scalar(std::size_t n, const T* a, const T* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

template <class T>
constexpr KernelSet<T> make_scalar_set() {
  return KernelSet<T>{Isa::scalar,        &gemm_scalar<T>, &axpy_scalar<T>, &mul_scalar<T>,
                      &relu_scalar<T>,    &relu_backward_scalar<T>, &sum_scalar<T>,
                      &dot_scalar<T>};
}

constexpr KernelSet<float> kScalarFloat = make_scalar_set<float>();
constexpr KernelSet<double> kScalarDouble = make_scalar_set<double>();

}  // namespace

template <>
const KernelSet<float>& scalar_kernels<float>() {
  return kScalarFloat;
}

template <>
const KernelSet<double>& scalar_kernels<double>() {
  return kScalarDouble;
}

}  // namespace compstyle::kernels
