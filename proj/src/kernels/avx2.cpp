// SPDX-License-Identifier: Apache-2.0
//
// AVX2 + FMA float kernels. This translation unit is the only one compiled
// with -mavx2 -mfma; nothing here may be called unless cpu_supports_avx2().

#include <immintrin.h>

#include <algorithm>
#include <array>
#include <vector>

#include "compstyle/kernels/kernels.hpp"

namespace compstyle::kernels {
namespace {

constexpr std::size_t kMr = 6;   // rows per micro-tile
constexpr std::size_t kNr = 16;  // columns per micro-tile (two ymm)

// Packs op(A) rows [i0, i0+rows) into kMr-interleaved layout: ap[p*kMr + r].
void pack_a(bool trans_a, const float* a, std::size_t lda, std::size_t i0, std::size_t rows,
            std::size_t k, float* ap) {
  for (std::size_t p = 0; p < k; ++p) {
    float* dst = ap + p * kMr;
    std::size_t r = 0;
    for (; r < rows; ++r) dst[r] = trans_a ? a[p * lda + i0 + r] : a[(i0 + r) * lda + p];
    for (; r < kMr; ++r) dst[r] = 0.0f;
  }
}

// Packs op(B) columns [j0, j0+cols) into bp[p*kNr + c].
void pack_b(bool trans_b, const float* b, std::size_t ldb, std::size_t j0, std::size_t cols,
            std::size_t k, float* bp) {
  if (!trans_b && cols == kNr) {
    for (std::size_t p = 0; p < k; ++p) {
      const float* src = b + p * ldb + j0;
      _mm256_storeu_ps(bp + p * kNr, _mm256_loadu_ps(src));
      _mm256_storeu_ps(bp + p * kNr + 8, _mm256_loadu_ps(src + 8));
    }
    return;
  }
  for (std::size_t p = 0; p < k; ++p) {
    float* dst = bp + p * kNr;
    std::size_t c = 0;
    for (; c < cols; ++c) dst[c] = trans_b ? b[(j0 + c) * ldb + p] : b[p * ldb + j0 + c];
    for (; c < kNr; ++c) dst[c] = 0.0f;
  }
}

void micro_kernel(std::size_t k, const float* ap, const float* bp, float* c, std::size_t ldc,
                  std::size_t rows, std::size_t cols, bool accumulate) {
  __m256 acc[kMr][2];
  for (std::size_t r = 0; r < kMr; ++r) {
    acc[r][0] = _mm256_setzero_ps();
    acc[r][1] = _mm256_setzero_ps();
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 b0 = _mm256_loadu_ps(bp + p * kNr);
    const __m256 b1 = _mm256_loadu_ps(bp + p * kNr + 8);
    const float* arow = ap + p * kMr;
    for (std::size_t r = 0; r < kMr; ++r) {
      const __m256 av = _mm256_broadcast_ss(arow + r);
      acc[r][0] = _mm256_fmadd_ps(av, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_ps(av, b1, acc[r][1]);
    }
  }
  if (cols == kNr) {
    for (std::size_t r = 0; r < rows; ++r) {
      float* crow = c + r * ldc;
      __m256 lo = acc[r][0];
      __m256 hi = acc[r][1];
      if (accumulate) {
        lo = _mm256_add_ps(_mm256_loadu_ps(crow), lo);
        hi = _mm256_add_ps(_mm256_loadu_ps(crow + 8), hi);
      }
      _mm256_storeu_ps(crow, lo);
      _mm256_storeu_ps(crow + 8, hi);
    }
    return;
  }
  alignas(32) float tile[kNr];
  for (std::size_t r = 0; r < rows; ++r) {
    _mm256_store_ps(tile, acc[r][0]);
    _mm256_store_ps(tile + 8, acc[r][1]);
    float* crow = c + r * ldc;
    for (std::size_t j = 0; j < cols; ++j) crow[j] = accumulate ? crow[j] + tile[j] : tile[j];
  }
}

void gemm_avx2(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
               const float* a, std::size_t lda, const float* b, std::size_t ldb, float* c,
               std::size_t ldc, bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate)
      for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0f);
    return;
  }
  thread_local std::vector<float> apack;
  thread_local std::vector<float> bpack;
  const std::size_t row_panels = (m + kMr - 1) / kMr;
  apack.resize(row_panels * kMr * k);
  bpack.resize(kNr * k);
  for (std::size_t ip = 0; ip < row_panels; ++ip) {
    const std::size_t i0 = ip * kMr;
    pack_a(trans_a, a, lda, i0, std::min(kMr, m - i0), k, apack.data() + ip * kMr * k);
  }
  for (std::size_t j0 = 0; j0 < n; j0 += kNr) {
    const std::size_t cols = std::min(kNr, n - j0);
    pack_b(trans_b, b, ldb, j0, cols, k, bpack.data());
    for (std::size_t ip = 0; ip < row_panels; ++ip) {
      const std::size_t i0 = ip * kMr;
      micro_kernel(k, apack.data() + ip * kMr * k, bpack.data(), c + i0 * ldc + j0, ldc,
                   std::min(kMr, m - i0), cols, accumulate);
    }
  }
}

void axpy_avx2(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul_avx2(std::size_t n, const float* a, const float* b, float* out) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void relu_avx2(std::size_t n, const float* x, float* y) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_avx2(std::size_t n, const float* x, const float* gy, float* gx) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m256 g = _mm256_and_ps(mask, _mm256_loadu_ps(gy + i));
    _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), g));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0f) gx[i] += gy[i];
}

double hsum(__m256d v) {
  alignas(32) std::array<double, 4> lanes;
  _mm256_store_pd(lanes.data(), v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double sum_avx2(std::size_t n, const float* x) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
    acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

double dot_avx2(std::size_t n, const float* a, const float* b) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(va)),
                           _mm256_cvtps_pd(_mm256_castps256_ps128(vb)), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(va, 1)),
                           _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1)), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

constexpr KernelSet<float> kAvx2Float{Isa::avx2,  &gemm_avx2,          &axpy_avx2,
                                      &mul_avx2,  &relu_avx2,          &relu_backward_avx2,
                                      &sum_avx2,  &dot_avx2};

}  // namespace

const KernelSet<float>* avx2_kernels() { return &kAvx2Float; }

}  // namespace compstyle::kernels
