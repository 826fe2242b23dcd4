// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "compstyle/rng.hpp"
#include "compstyle/sample.hpp"

COMPSTYLE_NAMESPACE_BEGIN

struct TraditionalConfig {
  bool rotate = true;  // k * 90 degrees, k uniform in {0..3}
  double contrast_lo = 0.7;
  double contrast_hi = 1.3;
  double min_crop_area = 0.8;  // 1 disables cropping
};

enum class MixMode { additive, multiplicative };

struct MixConfig {
  double p_apply = 0.4;
  double intensity_max = 0.3;
  /// Probabilities of {additive, multiplicative}.
  std::array<double, 2> mode_probs{0.5, 0.5};
  double noise_std = 0.05;
  TraditionalConfig traditional;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Parameters of one sample's traditional transform.
struct SampleTransform {
  int quarter_turns = 0;
  double contrast = 1.0;
  std::int64_t crop_y = 0, crop_x = 0, crop_h = 0, crop_w = 0;  // crop_h == 0: no crop
};

SampleTransform draw_transform(const TraditionalConfig& cfg, std::int64_t h, std::int64_t w, Rng& rng);

/// Applies crop-resize then rotation to image [1,H,W] and mask [H,W], then
/// contrast (clamped) to the image only. Odd quarter turns need H == W.
void apply_transform(const SampleTransform& t, std::span<Real> image, std::span<std::int32_t> mask,
                     std::int64_t h, std::int64_t w);

/// Independent transform per sample; masks get the geometric part only.
SegBatch traditional(const SegBatch& batch, const TraditionalConfig& cfg, Rng& rng);

/// (1 - m) x + m fr
Tensor mix_additive(const Tensor& x, const Tensor& fr, Real m);
/// max(x,1e-4)^(1-m) * max(fr,1e-4)^m, clamped to [0,1].
Tensor mix_multiplicative(const Tensor& x, const Tensor& fr, Real m);

inline constexpr double kMixFloor = 1e-4;

/// Per-sample mixing record, for previews and property checks.
struct MixRecord {
  bool mixed = false;  // false: the noise path was taken
  std::vector<MixMode> modes;
  std::vector<double> weights;
  std::vector<std::size_t> fractals;  // pool indices
};

/// With probability p_apply: traditional transforms, then per-sample mixing
/// with a pool fractal (mode and weight drawn per sample). Otherwise clamped
/// Gaussian pixel noise. Fractals whose size differs from the images are
/// resized by nearest neighbour. Throws ConfigError on an empty pool.
SegBatch apply_pipeline(const SegBatch& batch, std::span<const Tensor> pool, const MixConfig& cfg, Rng& rng,
                        MixRecord* record = nullptr);

COMPSTYLE_NAMESPACE_END
