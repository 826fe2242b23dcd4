// SPDX-License-Identifier: Apache-2.0
#include "compstyle/augment.hpp"

#include <algorithm>
#include <cmath>

#include "compstyle/error.hpp"

COMPSTYLE_NAMESPACE_BEGIN

namespace {

void require_same(const Tensor& x, const Tensor& fr, const char* op) {
  if (x.shape() != fr.shape())
    throw DimensionError(std::string(op) + ": " + shape_string(x.shape()) + " vs " + shape_string(fr.shape()));
}

template <class T>
std::vector<T> crop_resize(std::span<const T> src, std::int64_t h, std::int64_t w, const SampleTransform& t) {
  std::vector<T> out(static_cast<std::size_t>(h * w));
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      const std::int64_t sr = t.crop_y + r * t.crop_h / h;
      const std::int64_t sc = t.crop_x + c * t.crop_w / w;
      out[static_cast<std::size_t>(r * w + c)] = src[static_cast<std::size_t>(sr * w + sc)];
    }
  return out;
}

// Counter-clockwise quarter turns of a square (or, for even k, any) grid.
template <class T>
std::vector<T> rotate(std::span<const T> src, std::int64_t h, std::int64_t w, int k) {
  std::vector<T> out(src.begin(), src.end());
  if (k % 4 == 0) return out;
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      std::int64_t sr = r, sc = c;
      switch (k % 4) {
        case 1: sr = c; sc = w - 1 - r; break;
        case 2: sr = h - 1 - r; sc = w - 1 - c; break;
        case 3: sr = h - 1 - c; sc = r; break;
      }
      out[static_cast<std::size_t>(r * w + c)] = src[static_cast<std::size_t>(sr * w + sc)];
    }
  return out;
}

// Nearest-neighbour resize of a square [S,S] (or [1,S,S]) fractal to h*w.
std::vector<Real> fit_fractal(const Tensor& fr, std::int64_t h, std::int64_t w) {
  const std::int64_t fh = fr.dim(fr.rank() - 2), fw = fr.dim(fr.rank() - 1);
  if (fh == h && fw == w) return {fr.data().begin(), fr.data().end()};
  std::vector<Real> out(static_cast<std::size_t>(h * w));
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c)
      out[static_cast<std::size_t>(r * w + c)] = fr.data()[static_cast<std::size_t>((r * fh / h) * fw + c * fw / w)];
  return out;
}

void check_batch(const SegBatch& batch) {
  if (batch.images.rank() != 4 || batch.images.dim(1) != 1)
    throw DimensionError("augmentation needs images [N,1,H,W], got " + shape_string(batch.images.shape()));
  const Shape mask_shape{batch.images.dim(0), batch.images.dim(2), batch.images.dim(3)};
  if (batch.masks.shape != mask_shape)
    throw DimensionError("mask shape " + shape_string(batch.masks.shape) + " does not match images");
}

}  // namespace

void MixConfig::validate() const {
  if (!(p_apply >= 0.0 && p_apply <= 1.0)) throw ConfigError("p_apply must lie in [0,1]");
  if (!(intensity_max > 0.0 && intensity_max <= 1.0)) throw ConfigError("intensity_max must lie in (0,1]");
  if (mode_probs[0] < 0 || mode_probs[1] < 0 || std::abs(mode_probs[0] + mode_probs[1] - 1.0) > 1e-9)
    throw ConfigError("mode_probs must be non-negative and sum to 1");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  const auto& t = traditional;
  if (!(t.contrast_lo > 0.0 && t.contrast_lo <= t.contrast_hi)) throw ConfigError("bad contrast range");
  if (!(t.min_crop_area > 0.0 && t.min_crop_area <= 1.0)) throw ConfigError("min_crop_area must lie in (0,1]");
}

SampleTransform draw_transform(const TraditionalConfig& cfg, std::int64_t h, std::int64_t w, Rng& rng) {
  SampleTransform t;
  t.quarter_turns = cfg.rotate ? static_cast<int>(rng.uniform_int(4)) : 0;
  t.contrast = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
  const double area = rng.uniform(cfg.min_crop_area, 1.0);
  const double side = std::sqrt(area);
  t.crop_h = std::min(h, static_cast<std::int64_t>(std::ceil(side * static_cast<double>(h))));
  t.crop_w = std::min(w, static_cast<std::int64_t>(std::ceil(side * static_cast<double>(w))));
  t.crop_y = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(h - t.crop_h + 1)));
  t.crop_x = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(w - t.crop_w + 1)));
  return t;
}

void apply_transform(const SampleTransform& t, std::span<Real> image, std::span<std::int32_t> mask,
                     std::int64_t h, std::int64_t w) {
  if (t.quarter_turns % 2 != 0 && h != w) throw DimensionError("quarter turns need square images");
  std::vector<Real> img(image.begin(), image.end());
  std::vector<std::int32_t> msk(mask.begin(), mask.end());
  if (t.crop_h > 0 && (t.crop_h != h || t.crop_w != w)) {
    img = crop_resize<Real>(img, h, w, t);
    msk = crop_resize<std::int32_t>(msk, h, w, t);
  }
  img = rotate<Real>(img, h, w, t.quarter_turns);
  msk = rotate<std::int32_t>(msk, h, w, t.quarter_turns);
  for (std::size_t i = 0; i < img.size(); ++i)
    image[i] = std::clamp(static_cast<Real>(img[i] * t.contrast), Real(0), Real(1));
  std::copy(msk.begin(), msk.end(), mask.begin());
}

SegBatch traditional(const SegBatch& batch, const TraditionalConfig& cfg, Rng& rng) {
  check_batch(batch);
  const std::int64_t n = batch.images.dim(0), h = batch.images.dim(2), w = batch.images.dim(3);
  std::vector<Real> images(batch.images.data().begin(), batch.images.data().end());
  IntTensor masks = batch.masks;
  const Rng base(rng.next_u64());
  for (std::int64_t i = 0; i < n; ++i) {
    Rng local = base.split(static_cast<std::uint64_t>(i));
    const SampleTransform t = draw_transform(cfg, h, w, local);
    apply_transform(t, std::span(images).subspan(static_cast<std::size_t>(i * h * w), static_cast<std::size_t>(h * w)),
                    std::span(masks.data).subspan(static_cast<std::size_t>(i * h * w), static_cast<std::size_t>(h * w)),
                    h, w);
  }
  return {Tensor::from(batch.images.shape(), std::move(images)), std::move(masks)};
}

Tensor mix_additive(const Tensor& x, const Tensor& fr, Real m) {
  require_same(x, fr, "mix_additive");
  std::vector<Real> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (Real(1) - m) * x.data()[i] + m * fr.data()[i];
  return Tensor::from(x.shape(), std::move(out));
}

Tensor mix_multiplicative(const Tensor& x, const Tensor& fr, Real m) {
  require_same(x, fr, "mix_multiplicative");
  std::vector<Real> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = std::max(static_cast<double>(x.data()[i]), kMixFloor);
    const double b = std::max(static_cast<double>(fr.data()[i]), kMixFloor);
    out[i] = static_cast<Real>(std::clamp(std::pow(a, 1.0 - m) * std::pow(b, static_cast<double>(m)), 0.0, 1.0));
  }
  return Tensor::from(x.shape(), std::move(out));
}

SegBatch apply_pipeline(const SegBatch& batch, std::span<const Tensor> pool, const MixConfig& cfg, Rng& rng,
                        MixRecord* record) {
  if (pool.empty()) throw ConfigError("fractal pool is empty");
  cfg.validate();
  check_batch(batch);
  const std::int64_t n = batch.images.dim(0), h = batch.images.dim(2), w = batch.images.dim(3);
  const auto plane = static_cast<std::size_t>(h * w);
  MixRecord local_record;
  MixRecord& rec = record ? *record : local_record;
  rec = {};

  rec.mixed = rng.bernoulli(cfg.p_apply);
  if (!rec.mixed) {
    std::vector<Real> images(batch.images.data().begin(), batch.images.data().end());
    if (cfg.noise_std > 0.0)
      for (auto& v : images) v = std::clamp(static_cast<Real>(v + cfg.noise_std * rng.normal()), Real(0), Real(1));
    return {Tensor::from(batch.images.shape(), std::move(images)), batch.masks};
  }

  SegBatch out = traditional(batch, cfg.traditional, rng);
  std::vector<Real> images(out.images.data().begin(), out.images.data().end());
  for (std::int64_t i = 0; i < n; ++i) {
    const MixMode mode = rng.bernoulli(cfg.mode_probs[0]) ? MixMode::additive : MixMode::multiplicative;
    const auto m = static_cast<Real>(rng.uniform(0.0, cfg.intensity_max));
    const auto idx = static_cast<std::size_t>(rng.uniform_int(pool.size()));
    const Tensor fr = Tensor::from({h, w}, fit_fractal(pool[idx], h, w));
    const Tensor x = Tensor::from({h, w}, std::vector<Real>(images.begin() + static_cast<std::ptrdiff_t>(i * h * w),
                                                            images.begin() + static_cast<std::ptrdiff_t>((i + 1) * h * w)));
    const Tensor y = mode == MixMode::additive ? mix_additive(x, fr, m) : mix_multiplicative(x, fr, m);
    std::copy(y.data().begin(), y.data().end(), images.begin() + static_cast<std::ptrdiff_t>(i * plane));
    rec.modes.push_back(mode);
    rec.weights.push_back(m);
    rec.fractals.push_back(idx);
  }
  out.images = Tensor::from(out.images.shape(), std::move(images));
  return out;
}

COMPSTYLE_NAMESPACE_END
