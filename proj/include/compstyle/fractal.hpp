// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "compstyle/tensor.hpp"

COMPSTYLE_NAMESPACE_BEGIN

/// (x, y) -> (a x + b y + e, c x + d y + f)
struct AffineMap {
  double a = 0, b = 0, c = 0, d = 0, e = 0, f = 0;
  double det() const { return a * d - b * c; }
};

/// Iterated function system rendered by the chaos game.
class FractalSpec {
 public:
  /// Weights are normalised to sum to 1. Throws ConstructionError for a map
  /// with |det| >= 1, negative or all-zero weights, a size that is not a
  /// power of two, or mismatched map/weight counts.
  FractalSpec(std::vector<AffineMap> maps, std::vector<double> weights, std::int64_t iterations,
              std::int64_t size, std::uint64_t seed);

  const std::vector<AffineMap>& maps() const { return maps_; }
  const std::vector<double>& weights() const { return weights_; }
  std::int64_t iterations() const { return iterations_; }
  std::int64_t size() const { return size_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<AffineMap> maps_;
  std::vector<double> weights_;
  std::int64_t iterations_;
  std::int64_t size_;
  std::uint64_t seed_;
};

inline constexpr std::int64_t kFractalBurnIn = 100;

/// Visit counts per pixel [size,size] (before tone mapping). The attractor's
/// bounding box is fitted to the grid.
std::vector<std::uint64_t> fractal_density(const FractalSpec& spec);

/// log(1 + count), min-max normalised to [0,1]; all zeros when the density
/// is constant. Needs at least two maps.
Tensor render_fractal(const FractalSpec& spec);

/// Axis-aligned 3-map Sierpinski triangle IFS.
FractalSpec sierpinski_spec(std::int64_t size, std::int64_t iterations, std::uint64_t seed);

/// Random contractive IFS with 2..6 maps drawn from `seed`.
FractalSpec random_fractal_spec(std::int64_t size, std::uint64_t seed);

/// n distinct, non-degenerate (variance >= 1e-4) fractals; member i is drawn
/// from a stream split off `seed` by i.
std::vector<Tensor> sample_pool(int n, std::int64_t size, std::uint64_t seed);

inline constexpr double kMinPoolVariance = 1e-4;

COMPSTYLE_NAMESPACE_END
