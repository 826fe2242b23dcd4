// SPDX-License-Identifier: Apache-2.0
#include "compstyle/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "compstyle/error.hpp"
#include "compstyle/fft.hpp"
#include "compstyle/rng.hpp"

COMPSTYLE_NAMESPACE_BEGIN

namespace {

struct Plane {
  std::int64_t h, w;
};

Plane plane_of(const Tensor& x, const char* op) {
  if (x.rank() == 2) return {x.dim(0), x.dim(1)};
  if (x.rank() == 3 && x.dim(0) == 1) return {x.dim(1), x.dim(2)};
  throw DimensionError(std::string(op) + " needs [H,W] or [1,H,W], got " + shape_string(x.shape()));
}

Plane spectral_plane(const Tensor& x, const char* op) {
  const Plane p = plane_of(x, op);
  if (!detail::is_power_of_two(p.h) || !detail::is_power_of_two(p.w))
    throw DimensionError(std::string(op) + " needs power-of-two sizes, got " + shape_string(x.shape()));
  return p;
}

Tensor finish(const Tensor& like, const std::vector<double>& values, bool clamp_output) {
  std::vector<Real> out(values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = clamp_output ? std::clamp(values[i], 0.0, 1.0) : values[i];
    out[i] = static_cast<Real>(v);
  }
  return Tensor::from(like.shape(), std::move(out));
}

Rng stream(const CorruptionSpec& spec) {
  return Rng(hash_combine(spec.seed, static_cast<std::uint64_t>(spec.kind) + 1));
}

}  // namespace

std::string_view corruption_name(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::bias: return "bias";
    case CorruptionKind::spike: return "spike";
    case CorruptionKind::ghosting: return "ghosting";
    case CorruptionKind::motion: return "motion";
  }
  return "?";
}

CorruptionKind parse_corruption(std::string_view name) {
  for (auto k : kAllCorruptions)
    if (corruption_name(k) == name) return k;
  throw ConfigError("unknown corruption kind '" + std::string(name) + "'");
}

void CorruptionSpec::validate() const {
  if (!(severity >= 0.0) || !std::isfinite(severity)) throw ConfigError("corruption severity must be >= 0");
  if (bias_order < 0) throw ConfigError("bias order must be >= 0");
  if (num_spikes < 0) throw ConfigError("num_spikes must be >= 0");
  if (num_ghosts < 1) throw ConfigError("num_ghosts must be >= 1");
  if (ghost_axis != 0 && ghost_axis != 1) throw ConfigError("ghost axis must be 0 or 1");
  if (num_transforms < 0) throw ConfigError("num_transforms must be >= 0");
  if (max_rotation < 0 || max_translation < 0) throw ConfigError("motion bounds must be >= 0");
}

std::vector<double> bias_coefficients(const CorruptionSpec& spec) {
  Rng rng = stream(spec);
  const int terms = (spec.bias_order + 1) * (spec.bias_order + 2) / 2;
  std::vector<double> c(static_cast<std::size_t>(terms));
  for (auto& v : c) v = rng.uniform(-spec.severity, spec.severity);
  return c;
}

std::vector<double> bias_field_values(std::span<const double> coefficients, int order, std::int64_t h,
                                      std::int64_t w) {
  const auto coord = [](std::int64_t i, std::int64_t n) {
    return n > 1 ? -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
  };
  std::vector<double> field(static_cast<std::size_t>(h * w));
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      const double u = coord(c, w), v = coord(r, h);
      double p = 0.0;
      std::size_t t = 0;
      for (int deg = 0; deg <= order; ++deg)
        for (int j = 0; j <= deg; ++j, ++t) p += coefficients[t] * std::pow(u, deg - j) * std::pow(v, j);
      field[static_cast<std::size_t>(r * w + c)] = std::exp(p);
    }
  return field;
}

Tensor bias_field(const Tensor& image, const CorruptionSpec& spec) {
  spec.validate();
  const Plane p = plane_of(image, "bias_field");
  const auto field = bias_field_values(bias_coefficients(spec), spec.bias_order, p.h, p.w);
  std::vector<double> out(field.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = image.data()[i] * field[i];
  return finish(image, out, spec.clamp_output);
}

Tensor spike(const Tensor& image, const CorruptionSpec& spec) {
  spec.validate();
  const Plane p = spectral_plane(image, "spike");
  auto f = detail::centered_spectrum(image.data(), p.h, p.w);
  double peak = 0.0;
  for (const auto& v : f) peak = std::max(peak, std::abs(v));

  std::vector<SpikePosition> positions = spec.spike_positions;
  std::vector<double> phases;
  Rng rng = stream(spec);
  if (positions.empty()) {
    // Nyquist rows/columns are their own mirror, so offsets stay strictly inside.
    const std::int64_t ry = p.h / 2 - 1, rx = p.w / 2 - 1;
    if (ry == 0 && rx == 0) throw DimensionError("spike needs an image larger than 2x2");
    for (int i = 0; i < spec.num_spikes; ++i) {
      SpikePosition s;
      do {
        s.ky = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(2 * ry + 1))) - ry;
        s.kx = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(2 * rx + 1))) - rx;
      } while (s.ky == 0 && s.kx == 0);
      positions.push_back(s);
    }
  }
  for (std::size_t i = 0; i < positions.size(); ++i)
    phases.push_back(spec.spike_positions.empty() ? rng.uniform(0.0, 2.0 * std::numbers::pi) : 0.0);

  const std::int64_t cy = p.h / 2, cx = p.w / 2;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto [ky, kx] = positions[i];
    if (std::abs(ky) >= cy || std::abs(kx) >= cx || (ky == 0 && kx == 0))
      throw ConfigError("spike position must be off-centre and inside the Nyquist band");
    const auto amp = std::polar(spec.severity * peak, phases[i]);
    f[static_cast<std::size_t>((cy + ky) * p.w + (cx + kx))] += amp;
    f[static_cast<std::size_t>((cy - ky) * p.w + (cx - kx))] += std::conj(amp);
  }
  return finish(image, detail::inverse_centered(std::move(f), p.h, p.w), spec.clamp_output);
}

Tensor ghosting(const Tensor& image, const CorruptionSpec& spec) {
  spec.validate();
  const Plane p = spectral_plane(image, "ghosting");
  auto f = detail::centered_spectrum(image.data(), p.h, p.w);
  const std::int64_t lines = spec.ghost_axis == 0 ? p.h : p.w;
  const std::int64_t centre = lines / 2;
  const double keep = 1.0 - spec.severity;
  for (std::int64_t line = 0; line < lines; ++line) {
    if (line == centre || (line - centre) % spec.num_ghosts != 0) continue;
    if (spec.ghost_axis == 0) {
      for (std::int64_t c = 0; c < p.w; ++c) f[static_cast<std::size_t>(line * p.w + c)] *= keep;
    } else {
      for (std::int64_t r = 0; r < p.h; ++r) f[static_cast<std::size_t>(r * p.w + line)] *= keep;
    }
  }
  return finish(image, detail::inverse_centered(std::move(f), p.h, p.w), spec.clamp_output);
}

std::vector<double> rigid_resample(std::span<const Real> image, std::int64_t h, std::int64_t w,
                                   const RigidMotion& m) {
  const double theta = m.rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cy = (static_cast<double>(h) - 1.0) / 2.0, cx = (static_cast<double>(w) - 1.0) / 2.0;
  std::vector<double> out(static_cast<std::size_t>(h * w), 0.0);
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      // Inverse map: source = R^-1 (dest - centre - t) + centre.
      const double dy = static_cast<double>(r) - cy - m.ty;
      const double dx = static_cast<double>(c) - cx - m.tx;
      const double sy = cs * dy + sn * dx + cy;
      const double sx = -sn * dy + cs * dx + cx;
      const auto iy = static_cast<std::int64_t>(std::lround(sy));
      const auto ix = static_cast<std::int64_t>(std::lround(sx));
      if (iy >= 0 && iy < h && ix >= 0 && ix < w)
        out[static_cast<std::size_t>(r * w + c)] = image[static_cast<std::size_t>(iy * w + ix)];
    }
  return out;
}

Tensor motion_with(const Tensor& image, std::span<const RigidMotion> transforms,
                   std::span<const std::int64_t> band_starts, bool clamp_output) {
  const Plane p = spectral_plane(image, "motion");
  if (band_starts.size() != transforms.size() + 1)
    throw ConfigError("motion needs one band start per image (original plus transforms)");
  for (std::size_t j = 0; j < band_starts.size(); ++j)
    if (band_starts[j] < 0 || band_starts[j] > p.h || (j > 0 && band_starts[j] < band_starts[j - 1]))
      throw ConfigError("motion band starts must be non-decreasing within [0, H]");

  auto f = detail::centered_spectrum(image.data(), p.h, p.w);
  for (std::size_t j = 0; j < transforms.size(); ++j) {
    const std::int64_t lo = band_starts[j + 1];
    const std::int64_t hi = j + 2 < band_starts.size() ? band_starts[j + 2] : p.h;
    if (lo == hi) continue;
    const auto moved = rigid_resample(image.data(), p.h, p.w, transforms[j]);
    const auto g = detail::centered_spectrum(std::vector<Real>(moved.begin(), moved.end()), p.h, p.w);
    std::copy(g.begin() + lo * p.w, g.begin() + hi * p.w, f.begin() + lo * p.w);
  }
  return finish(image, detail::inverse_centered(std::move(f), p.h, p.w), clamp_output);
}

Tensor motion(const Tensor& image, const CorruptionSpec& spec) {
  spec.validate();
  const Plane p = spectral_plane(image, "motion");
  Rng rng = stream(spec);
  std::vector<RigidMotion> transforms(static_cast<std::size_t>(spec.num_transforms));
  const double rot = spec.max_rotation * spec.severity, shift = spec.max_translation * spec.severity;
  for (auto& m : transforms) {
    m.rotation_deg = rng.uniform(-rot, rot);
    m.ty = rng.uniform(-shift, shift);
    m.tx = rng.uniform(-shift, shift);
  }
  std::vector<std::int64_t> starts{0};
  std::vector<std::int64_t> cuts;
  for (int j = 0; j < spec.num_transforms; ++j)
    cuts.push_back(static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(p.h + 1))));
  std::sort(cuts.begin(), cuts.end());
  starts.insert(starts.end(), cuts.begin(), cuts.end());
  return motion_with(image, transforms, starts, spec.clamp_output);
}

Tensor corrupt(const Tensor& image, const CorruptionSpec& spec) {
  switch (spec.kind) {
    case CorruptionKind::bias: return bias_field(image, spec);
    case CorruptionKind::spike: return spike(image, spec);
    case CorruptionKind::ghosting: return ghosting(image, spec);
    case CorruptionKind::motion: return motion(image, spec);
  }
  throw ConfigError("unknown corruption kind");
}

COMPSTYLE_NAMESPACE_END
