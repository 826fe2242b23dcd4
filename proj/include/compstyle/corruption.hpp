// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "compstyle/tensor.hpp"

COMPSTYLE_NAMESPACE_BEGIN

enum class CorruptionKind { bias, spike, ghosting, motion };

std::string_view corruption_name(CorruptionKind kind);
/// Throws ConfigError for an unknown name.
CorruptionKind parse_corruption(std::string_view name);

inline constexpr CorruptionKind kAllCorruptions[] = {CorruptionKind::bias, CorruptionKind::spike,
                                                    CorruptionKind::ghosting, CorruptionKind::motion};

/// Offset of a spike from the k-space centre, in frequency units.
struct SpikePosition {
  std::int64_t ky = 0, kx = 0;
};

struct RigidMotion {
  double rotation_deg = 0.0;
  double ty = 0.0, tx = 0.0;
};

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::bias;
  double severity = 0.0;
  std::uint64_t seed = 0;

  int bias_order = 3;
  int num_spikes = 1;
  /// Overrides the random spike positions when non-empty.
  std::vector<SpikePosition> spike_positions;
  int num_ghosts = 4;
  int ghost_axis = 0;
  int num_transforms = 2;
  double max_rotation = 10.0;
  double max_translation = 6.0;

  /// Clamp the result to [0,1]. Disabled only to inspect the raw edit.
  bool clamp_output = true;

  /// Throws ConfigError on negative severity or out-of-range parameters.
  void validate() const;
};

/// Polynomial coefficients for the bias field, ordered by total degree then
/// by the power of v: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
std::vector<double> bias_coefficients(const CorruptionSpec& spec);
/// exp(P(u,v)) on an [h,w] grid with u (columns) and v (rows) in [-1,1].
std::vector<double> bias_field_values(std::span<const double> coefficients, int order, std::int64_t h,
                                      std::int64_t w);

// Images are [H,W] or [1,H,W]; the output has the input's shape.
Tensor bias_field(const Tensor& image, const CorruptionSpec& spec);
Tensor spike(const Tensor& image, const CorruptionSpec& spec);
Tensor ghosting(const Tensor& image, const CorruptionSpec& spec);
Tensor motion(const Tensor& image, const CorruptionSpec& spec);

/// Motion with explicit transforms. band_starts[j] is the first k-space row
/// (axis 0) taken from image j, where image 0 is the original and image j>0
/// is transforms[j-1]; bands are contiguous and cover [band_starts[0], H).
/// Rows before band_starts[0] come from the original.
Tensor motion_with(const Tensor& image, std::span<const RigidMotion> transforms,
                   std::span<const std::int64_t> band_starts, bool clamp_output = true);

/// Rigid transform about the image centre with nearest-neighbour sampling;
/// samples outside the image read as 0.
std::vector<double> rigid_resample(std::span<const Real> image, std::int64_t h, std::int64_t w,
                                   const RigidMotion& m);

Tensor corrupt(const Tensor& image, const CorruptionSpec& spec);

COMPSTYLE_NAMESPACE_END
