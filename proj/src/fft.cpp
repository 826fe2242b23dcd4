// SPDX-License-Identifier: Apache-2.0
#include "compstyle/fft.hpp"

#include <cmath>
#include <numbers>

#include "compstyle/error.hpp"

COMPSTYLE_NAMESPACE_BEGIN

namespace detail {

bool is_power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

namespace {

// Iterative radix-2 Cooley-Tukey on a strided sequence; unnormalised.
void fft1d(std::complex<double>* data, std::int64_t n, std::int64_t stride, bool inverse,
           std::vector<std::complex<double>>& scratch) {
  scratch.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) scratch[static_cast<std::size_t>(i)] = data[i * stride];
  for (std::int64_t i = 1, j = 0; i < n; ++i) {
    std::int64_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(scratch[static_cast<std::size_t>(i)], scratch[static_cast<std::size_t>(j)]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::int64_t len = 2; len <= n; len <<= 1) {
    const double angle = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::int64_t i = 0; i < n; i += len)
      for (std::int64_t k = 0; k < len / 2; ++k) {
        const std::complex<double> wk = std::polar(1.0, angle * static_cast<double>(k));
        auto& a = scratch[static_cast<std::size_t>(i + k)];
        auto& b = scratch[static_cast<std::size_t>(i + k + len / 2)];
        const std::complex<double> t = wk * b;
        b = a - t;
        a = a + t;
      }
  }
  for (std::int64_t i = 0; i < n; ++i) data[i * stride] = scratch[static_cast<std::size_t>(i)];
}

void require_pow2(std::int64_t h, std::int64_t w) {
  if (!is_power_of_two(h) || !is_power_of_two(w))
    throw DimensionError("FFT needs power-of-two sizes, got " + std::to_string(h) + "x" + std::to_string(w));
}

}  // namespace

void fft2_inplace(ComplexGrid& grid, std::int64_t h, std::int64_t w, bool inverse) {
  require_pow2(h, w);
  std::vector<std::complex<double>> scratch;
  for (std::int64_t r = 0; r < h; ++r) fft1d(grid.data() + r * w, w, 1, inverse, scratch);
  for (std::int64_t c = 0; c < w; ++c) fft1d(grid.data() + c, h, w, inverse, scratch);
  const double norm = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (auto& v : grid) v *= norm;
}

void fftshift(ComplexGrid& grid, std::int64_t h, std::int64_t w) {
  ComplexGrid out(grid.size());
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c)
      out[static_cast<std::size_t>(((r + h / 2) % h) * w + (c + w / 2) % w)] = grid[static_cast<std::size_t>(r * w + c)];
  grid = std::move(out);
}

ComplexGrid centered_spectrum(std::span<const Real> image, std::int64_t h, std::int64_t w) {
  require_pow2(h, w);
  ComplexGrid grid(image.begin(), image.end());
  fft2_inplace(grid, h, w, false);
  fftshift(grid, h, w);
  return grid;
}

std::vector<double> inverse_centered(ComplexGrid spectrum, std::int64_t h, std::int64_t w) {
  fftshift(spectrum, h, w);
  fft2_inplace(spectrum, h, w, true);
  std::vector<double> out(spectrum.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = spectrum[i].real();
  return out;
}

}  // namespace detail

Spectrum fft2(const Tensor& image) {
  if (image.rank() != 2) throw DimensionError("fft2 needs [H,W], got " + shape_string(image.shape()));
  const auto grid = detail::centered_spectrum(image.data(), image.dim(0), image.dim(1));
  std::vector<Real> re(grid.size()), im(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    re[i] = static_cast<Real>(grid[i].real());
    im[i] = static_cast<Real>(grid[i].imag());
  }
  return {Tensor::from(image.shape(), std::move(re)), Tensor::from(image.shape(), std::move(im))};
}

Tensor ifft2(const Spectrum& spectrum) {
  if (spectrum.real.rank() != 2 || spectrum.real.shape() != spectrum.imag.shape())
    throw DimensionError("ifft2 needs matching [H,W] real/imag parts");
  const std::int64_t h = spectrum.real.dim(0), w = spectrum.real.dim(1);
  detail::ComplexGrid grid(static_cast<std::size_t>(h * w));
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = {spectrum.real.data()[i], spectrum.imag.data()[i]};
  const auto out = detail::inverse_centered(std::move(grid), h, w);
  return Tensor::from(spectrum.real.shape(), std::vector<Real>(out.begin(), out.end()));
}

COMPSTYLE_NAMESPACE_END
