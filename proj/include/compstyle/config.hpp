// SPDX-License-Identifier: Apache-2.0
#pragma once

// The core library is compiled twice: once with 32-bit storage (the
// production build) and once with 64-bit storage for gradient checking.
// Each flavour lives in its own inline namespace so both can be linked into
// one binary without symbol clashes.
#if defined(COMPSTYLE_REAL_DOUBLE)
#define COMPSTYLE_ABI_NS f64
#else
#define COMPSTYLE_ABI_NS f32
#endif

#define COMPSTYLE_NAMESPACE_BEGIN \
  namespace compstyle {           \
  inline namespace COMPSTYLE_ABI_NS {
#define COMPSTYLE_NAMESPACE_END \
  }                             \
  }

COMPSTYLE_NAMESPACE_BEGIN

#if defined(COMPSTYLE_REAL_DOUBLE)
using Real = double;
inline constexpr bool kRealIsDouble = true;
#else
using Real = float;
inline constexpr bool kRealIsDouble = false;
#endif

COMPSTYLE_NAMESPACE_END
