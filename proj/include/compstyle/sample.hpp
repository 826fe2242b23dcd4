// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "compstyle/tensor.hpp"

COMPSTYLE_NAMESPACE_BEGIN

struct SegSample {
  Tensor image;    // [1,H,W] in [0,1]
  IntTensor mask;  // [H,W]
  int domain_id = 0;
};

struct SegBatch {
  Tensor images;    // [N,1,H,W]
  IntTensor masks;  // [N,H,W]

  std::int64_t size() const { return images.defined() ? images.dim(0) : 0; }
};

/// Stacks the selected samples. Throws DimensionError on mixed sizes.
SegBatch make_batch(std::span<const SegSample> samples, std::span<const std::size_t> indices);
SegBatch make_batch(std::span<const SegSample> samples);

COMPSTYLE_NAMESPACE_END
