// SPDX-License-Identifier: Apache-2.0
#include "compstyle/fractal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "compstyle/error.hpp"
#include "compstyle/rng.hpp"

COMPSTYLE_NAMESPACE_BEGIN

namespace {

bool is_power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

double variance(const Tensor& t) {
  const auto v = t.data();
  double m = 0.0;
  for (Real x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (Real x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

// Largest singular value of [[a b] [c d]].
double spectral_norm(const AffineMap& m) {
  const double p = m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d;
  const double q = m.det();
  return std::sqrt(0.5 * (p + std::sqrt(std::max(0.0, p * p - 4.0 * q * q))));
}

}  // namespace

FractalSpec::FractalSpec(std::vector<AffineMap> maps, std::vector<double> weights, std::int64_t iterations,
                         std::int64_t size, std::uint64_t seed)
    : maps_(std::move(maps)), weights_(std::move(weights)), iterations_(iterations), size_(size), seed_(seed) {
  if (maps_.empty()) throw ConstructionError("fractal needs at least one map");
  if (weights_.size() != maps_.size()) throw ConstructionError("fractal map and weight counts differ");
  for (const auto& m : maps_)
    if (!(std::abs(m.det()) < 1.0)) throw ConstructionError("fractal map is not contractive (|det| >= 1)");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConstructionError("fractal weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ConstructionError("fractal weights sum to zero");
  for (double& w : weights_) w /= total;
  if (!is_power_of_two(size_)) throw ConstructionError("fractal size must be a power of two");
  if (iterations_ < 1) throw ConstructionError("fractal needs at least one iteration");
}

std::vector<std::uint64_t> fractal_density(const FractalSpec& spec) {
  Rng rng(spec.seed());
  const auto& maps = spec.maps();
  std::vector<double> cdf(spec.weights().size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) cdf[i] = (acc += spec.weights()[i]);
  cdf.back() = 1.0;

  const auto n = static_cast<std::size_t>(spec.iterations());
  std::vector<double> xs, ys;
  xs.reserve(n);
  ys.reserve(n);
  double x = 0.0, y = 0.0;
  for (std::int64_t it = 0; it < kFractalBurnIn + spec.iterations(); ++it) {
    const double u = rng.uniform();
    const auto k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const auto& m = maps[std::min(k, maps.size() - 1)];
    const double nx = m.a * x + m.b * y + m.e;
    const double ny = m.c * x + m.d * y + m.f;
    x = nx;
    y = ny;
    if (it >= kFractalBurnIn && std::isfinite(x) && std::isfinite(y)) {
      xs.push_back(x);
      ys.push_back(y);
    }
  }

  const auto size = static_cast<std::size_t>(spec.size());
  std::vector<std::uint64_t> counts(size * size, 0);
  if (xs.empty()) return counts;
  auto [xmin_it, xmax_it] = std::minmax_element(xs.begin(), xs.end());
  auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());
  auto fit = [](double lo, double hi) {
    if (hi - lo < 1e-12) return std::pair{0.5 * (lo + hi) - 0.5, 0.5 * (lo + hi) + 0.5};
    return std::pair{lo, hi};
  };
  const auto [x0, x1] = fit(*xmin_it, *xmax_it);
  const auto [y0, y1] = fit(*ymin_it, *ymax_it);
  const double sx = static_cast<double>(size) / (x1 - x0);
  const double sy = static_cast<double>(size) / (y1 - y0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto col = std::min(size - 1, static_cast<std::size_t>(std::max(0.0, (xs[i] - x0) * sx)));
    const auto row = std::min(size - 1, static_cast<std::size_t>(std::max(0.0, (ys[i] - y0) * sy)));
    ++counts[row * size + col];
  }
  return counts;
}

Tensor render_fractal(const FractalSpec& spec) {
  if (spec.maps().size() < 2) throw ConstructionError("render_fractal needs at least two maps");
  const auto counts = fractal_density(spec);
  std::vector<Real> img(counts.size());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::vector<double> logd(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    logd[i] = std::log1p(static_cast<double>(counts[i]));
    lo = std::min(lo, logd[i]);
    hi = std::max(hi, logd[i]);
  }
  if (hi > lo)
    for (std::size_t i = 0; i < counts.size(); ++i) img[i] = static_cast<Real>((logd[i] - lo) / (hi - lo));
  return Tensor::from({spec.size(), spec.size()}, std::move(img));
}

FractalSpec sierpinski_spec(std::int64_t size, std::int64_t iterations, std::uint64_t seed) {
  std::vector<AffineMap> maps{{0.5, 0, 0, 0.5, 0.0, 0.0}, {0.5, 0, 0, 0.5, 0.5, 0.0}, {0.5, 0, 0, 0.5, 0.25, 0.5}};
  return FractalSpec(std::move(maps), {1.0, 1.0, 1.0}, iterations, size, seed);
}

FractalSpec random_fractal_spec(std::int64_t size, std::uint64_t seed) {
  Rng rng(seed);
  const int count = 2 + static_cast<int>(rng.uniform_int(5));
  std::vector<AffineMap> maps;
  std::vector<double> weights;
  while (static_cast<int>(maps.size()) < count) {
    AffineMap m{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    // Strictly contractive maps keep the orbit bounded; |det| alone does not.
    if (spectral_norm(m) >= 0.95 || std::abs(m.det()) < 1e-3) continue;
    maps.push_back(m);
    weights.push_back(std::abs(m.det()) + 0.05);
  }
  return FractalSpec(std::move(maps), std::move(weights), 10 * size * size, size, rng.next_u64());
}

std::vector<Tensor> sample_pool(int n, std::int64_t size, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample_pool needs n >= 1");
  const Rng root(seed);
  std::vector<Tensor> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng stream = root.split(static_cast<std::uint64_t>(i));
    for (;;) {
      Tensor img = render_fractal(random_fractal_spec(size, stream.next_u64()));
      if (variance(img) < kMinPoolVariance) continue;
      const bool duplicate = std::any_of(pool.begin(), pool.end(), [&](const Tensor& other) {
        return std::equal(other.data().begin(), other.data().end(), img.data().begin());
      });
      if (duplicate) continue;
      pool.push_back(std::move(img));
      break;
    }
  }
  return pool;
}

COMPSTYLE_NAMESPACE_END
