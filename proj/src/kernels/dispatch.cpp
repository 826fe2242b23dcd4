// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <string_view>

#include "compstyle/kernels/kernels.hpp"

namespace compstyle::kernels {
namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("COMPSTYLE_KERNELS")) {
    const std::string_view v(env);
    if (v == "scalar") return Isa::scalar;
  }
  return cpu_supports_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

bool cpu_supports_avx2() {
#if defined(COMPSTYLE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__)) && \
    (defined(__x86_64__) || defined(__i386__))
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported;
#else
  return false;
#endif
}

Isa select(Isa isa) {
  if (isa == Isa::avx2 && !cpu_supports_avx2()) isa = Isa::scalar;
  current().store(isa);
  return isa;
}

Isa selected() { return current().load(); }

template <>
const KernelSet<float>& active<float>() {
  if (selected() == Isa::avx2)
    if (const auto* k = avx2_kernels()) return *k;
  return scalar_kernels<float>();
}

template <>
const KernelSet<double>& active<double>() {
  return scalar_kernels<double>();
}

#if !defined(COMPSTYLE_HAVE_AVX2)
const KernelSet<float>* avx2_kernels() { return nullptr; }
#endif

}  // namespace compstyle::kernels
