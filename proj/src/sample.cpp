// SPDX-License-Identifier: Apache-2.0
#include "compstyle/sample.hpp"

#include <numeric>

#include "compstyle/error.hpp"

COMPSTYLE_NAMESPACE_BEGIN

SegBatch make_batch(std::span<const SegSample> samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DimensionError("make_batch needs at least one sample");
  const SegSample& first = samples[indices[0]];
  const Shape image_shape = first.image.shape();
  if (image_shape.size() != 3 || image_shape[0] != 1)
    throw DimensionError("sample image must be [1,H,W], got " + shape_string(image_shape));
  const Shape mask_shape{image_shape[1], image_shape[2]};
  const auto n = static_cast<std::int64_t>(indices.size());

  std::vector<Real> images;
  images.reserve(static_cast<std::size_t>(n * first.image.numel()));
  IntTensor masks = IntTensor::zeros({n, mask_shape[0], mask_shape[1]});
  auto out = masks.data.begin();
  for (std::size_t i : indices) {
    if (i >= samples.size()) throw IndexError("make_batch index " + std::to_string(i) + " out of range");
    const SegSample& s = samples[i];
    if (s.image.shape() != image_shape || s.mask.shape != mask_shape)
      throw DimensionError("make_batch: sample shapes differ");
    images.insert(images.end(), s.image.data().begin(), s.image.data().end());
    out = std::copy(s.mask.data.begin(), s.mask.data.end(), out);
  }
  return {Tensor::from({n, 1, mask_shape[0], mask_shape[1]}, std::move(images)), std::move(masks)};
}

SegBatch make_batch(std::span<const SegSample> samples) {
  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return make_batch(samples, all);
}

COMPSTYLE_NAMESPACE_END
