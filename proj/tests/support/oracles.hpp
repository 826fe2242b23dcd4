// SPDX-License-Identifier: Apache-2.0
// Slow reference implementations used to check the fast paths.
#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace compstyle::test {

/// Direct O(N^2) unitary 2D DFT, centred (zero frequency at h/2, w/2).
template <class T>
std::vector<std::complex<double>> direct_dft(std::span<const T> x, std::int64_t h, std::int64_t w) {
  std::vector<std::complex<double>> out(static_cast<std::size_t>(h * w));
  const double norm = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (std::int64_t ky = 0; ky < h; ++ky)
    for (std::int64_t kx = 0; kx < w; ++kx) {
      const double fy = static_cast<double>(ky - h / 2), fx = static_cast<double>(kx - w / 2);
      std::complex<double> acc = 0.0;
      for (std::int64_t r = 0; r < h; ++r)
        for (std::int64_t c = 0; c < w; ++c) {
          const double angle = -2.0 * std::numbers::pi *
                               (fy * static_cast<double>(r) / static_cast<double>(h) +
                                fx * static_cast<double>(c) / static_cast<double>(w));
          acc += static_cast<double>(x[static_cast<std::size_t>(r * w + c)]) * std::polar(1.0, angle);
        }
      out[static_cast<std::size_t>(ky * w + kx)] = acc * norm;
    }
  return out;
}

/// Magnitudes of the 1D DFT of a sequence, frequencies 0..n-1.
template <class T>
std::vector<double> dft_magnitudes(std::span<const T> x) {
  const auto n = x.size();
  std::vector<double> mag(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += static_cast<double>(x[i]) *
             std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n));
    mag[k] = std::abs(acc);
  }
  return mag;
}

}  // namespace compstyle::test
