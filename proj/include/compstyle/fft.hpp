// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "compstyle/tensor.hpp"

COMPSTYLE_NAMESPACE_BEGIN

/// Centred 2D spectrum: zero frequency at (H/2, W/2).
struct Spectrum {
  Tensor real;
  Tensor imag;
};

/// Unitary (1/sqrt(HW)) centred forward transform of a real [H,W] image.
/// H and W must be powers of two.
Spectrum fft2(const Tensor& image);
/// Inverse of fft2; returns the real part.
Tensor ifft2(const Spectrum& spectrum);

namespace detail {

using ComplexGrid = std::vector<std::complex<double>>;

bool is_power_of_two(std::int64_t v);

/// In-place unitary 2D FFT on a row-major h*w grid (uncentred).
void fft2_inplace(ComplexGrid& grid, std::int64_t h, std::int64_t w, bool inverse);
/// Swaps quadrants so index 0 moves to (h/2, w/2); its own inverse for even sizes.
void fftshift(ComplexGrid& grid, std::int64_t h, std::int64_t w);

/// Centred unitary spectrum of a real image as a complex grid.
ComplexGrid centered_spectrum(std::span<const Real> image, std::int64_t h, std::int64_t w);
/// Real part of the inverse of a centred spectrum.
std::vector<double> inverse_centered(ComplexGrid spectrum, std::int64_t h, std::int64_t w);

}  // namespace detail

COMPSTYLE_NAMESPACE_END
