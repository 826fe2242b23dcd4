// SPDX-License-Identifier: Apache-2.0
#pragma once

// Finite-difference checks of every differentiable operation. Compiled into
// the 64-bit flavour (compstyle_f64); callable from 32-bit test binaries
// through this plain interface.

#include <string>
#include <vector>

namespace compstyle::test {

struct OpGradientReport {
  std::string op;
  int trials = 0;
  double worst_relative_error = 0.0;
};

/// Runs `trials` seeded random instances per operation.
std::vector<OpGradientReport> run_gradient_suite(int trials);

}  // namespace compstyle::test
