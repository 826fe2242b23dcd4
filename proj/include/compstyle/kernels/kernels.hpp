// SPDX-License-Identifier: Apache-2.0
#pragma once

// Data-parallel inner loops used by the tensor core.
//
// Every kernel has a portable scalar reference implementation. An AVX2+FMA
// variant of the float kernels is compiled into a separate translation unit
// and selected at runtime when the CPU supports it. The double kernels are
// scalar only; they back the 64-bit gradient-checking build.
//
// Selection can be forced with the COMPSTYLE_KERNELS environment variable
// ("scalar" or "avx2") or with kernels::select().

#include <cstddef>
#include <string_view>

namespace compstyle::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

template <class T>
struct KernelSet {
  Isa isa;

  /// C[m,n] = (accumulate ? C : 0) + op(A)[m,k] * op(B)[k,n], row-major.
  /// op(A)(i,p) is a[i*lda+p], or a[p*lda+i] when trans_a.
  /// op(B)(p,j) is b[p*ldb+j], or b[j*ldb+p] when trans_b.
  /// Products are summed over p in ascending order.
  void (*gemm)(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
               const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
               std::size_t ldc, bool accumulate);

  /// y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);

  /// out = a * b
  void (*mul)(std::size_t n, const T* a, const T* b, T* out);

  /// y = max(x, 0)
  void (*relu)(std::size_t n, const T* x, T* y);

  /// gx += (x > 0) ? gy : 0
  void (*relu_backward)(std::size_t n, const T* x, const T* gy, T* gx);

  /// Sum with 64-bit accumulation.
  double (*sum)(std::size_t n, const T* x);

  /// Dot product with 64-bit accumulation.
  double (*dot)(std::size_t n, const T* a, const T* b);
};

template <class T>
const KernelSet<T>& scalar_kernels();

/// AVX2 float kernels, or nullptr when not compiled in.
const KernelSet<float>* avx2_kernels();

bool cpu_supports_avx2();

/// Kernel set currently in use for T.
template <class T>
const KernelSet<T>& active();

/// Force a kernel family. Requesting avx2 on a CPU without it falls back to
/// scalar. Returns the family actually selected.
Isa select(Isa isa);
Isa selected();

/// RAII override used by equivalence tests.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa) : previous_(selected()) { select(isa); }
  ~ScopedIsa() { select(previous_); }
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

}  // namespace compstyle::kernels
