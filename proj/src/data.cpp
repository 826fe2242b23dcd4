// SPDX-License-Identifier: Apache-2.0
#include "compstyle/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "compstyle/error.hpp"
#include "compstyle/io.hpp"
#include "compstyle/rng.hpp"

COMPSTYLE_NAMESPACE_BEGIN

namespace {

bool is_power_of_two(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

constexpr std::uint64_t kGeometryStream = 0x67656f6dull;
constexpr std::uint64_t kAppearanceStream = 0x61707065ull;
constexpr double kIntensityJitter = 0.04;

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t stream, int domain, Split split, int index) {
  std::uint64_t s = hash_combine(seed, stream);
  s = hash_combine(s, static_cast<std::uint64_t>(domain));
  s = hash_combine(s, static_cast<std::uint64_t>(split));
  return hash_combine(s, static_cast<std::uint64_t>(index));
}

// Unit-variance spatially correlated noise: white noise box-blurred with
// radius r along each axis.
std::vector<double> correlated_noise(std::int64_t h, std::int64_t w, double radius, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(h * w));
  for (auto& x : v) x = rng.normal();
  const auto r = static_cast<std::int64_t>(std::lround(radius));
  if (r > 0) {
    std::vector<double> tmp(v.size());
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        double s = 0;
        for (std::int64_t d = -r; d <= r; ++d) s += v[static_cast<std::size_t>(y * w + std::clamp(x + d, std::int64_t{0}, w - 1))];
        tmp[static_cast<std::size_t>(y * w + x)] = s;
      }
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        double s = 0;
        for (std::int64_t d = -r; d <= r; ++d) s += tmp[static_cast<std::size_t>(std::clamp(y + d, std::int64_t{0}, h - 1) * w + x)];
        v[static_cast<std::size_t>(y * w + x)] = s;
      }
  }
  double mean = 0, sq = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double x : v) sq += (x - mean) * (x - mean);
  const double sd = std::sqrt(sq / static_cast<double>(v.size()));
  for (auto& x : v) x = sd > 0 ? (x - mean) / sd : 0.0;
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void DomainProfile::validate() const {
  auto unit = [&](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("domain " + name + ": " + what + " must lie in [0,1]");
  };
  unit(fg_mean, "fg_mean");
  unit(bg_level, "bg_level");
  unit(fg_contrast, "fg_contrast");
  unit(bg_slope, "bg_slope");
  unit(noise_amp, "noise_amp");
  if (!std::isfinite(bg_direction)) throw ConfigError("domain " + name + ": bg_direction must be finite");
  if (!(noise_corr >= 0.0 && noise_corr <= 16.0)) throw ConfigError("domain " + name + ": noise_corr outside [0,16]");
  if (!(gamma > 0.0 && gamma <= 10.0)) throw ConfigError("domain " + name + ": gamma outside (0,10]");
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  throw ConfigError("unknown split");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "'");
}

EllipseGeometry draw_geometry(std::int64_t size, std::uint64_t geometry_seed) {
  Rng rng(geometry_seed);
  const double n = static_cast<double>(size);
  EllipseGeometry g;
  g.cy = rng.uniform(0.38, 0.62) * n;
  g.cx = rng.uniform(0.38, 0.62) * n;
  g.ry = rng.uniform(0.16, 0.28) * n;
  g.rx = rng.uniform(0.16, 0.28) * n;
  g.angle = rng.uniform(0.0, std::numbers::pi);
  return g;
}

IntTensor render_mask(const EllipseGeometry& g, std::int64_t size, int num_classes) {
  if (num_classes != 2 && num_classes != 4) throw ConfigError("num_classes must be 2 or 4");
  IntTensor mask = IntTensor::zeros({size, size});
  const double c = std::cos(g.angle), s = std::sin(g.angle);
  for (std::int64_t y = 0; y < size; ++y)
    for (std::int64_t x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y) + 0.5 - g.cy;
      const double dx = static_cast<double>(x) + 0.5 - g.cx;
      const double u = (c * dx + s * dy) / g.rx;
      const double v = (-s * dx + c * dy) / g.ry;
      const double r = std::sqrt(u * u + v * v);
      if (r >= 1.0) continue;
      int label = 1;
      if (num_classes == 4) label = r < 0.45 ? 1 : (r < 0.75 ? 2 : 3);
      mask.data[static_cast<std::size_t>(y * size + x)] = label;
    }
  return mask;
}

Tensor render_image(const IntTensor& mask, const DomainProfile& profile, int num_classes,
                    std::uint64_t appearance_seed) {
  if (mask.shape.size() != 2 || mask.shape[0] != mask.shape[1])
    throw DimensionError("render_image needs a square [H,W] mask");
  profile.validate();
  const std::int64_t n = mask.shape[0];
  Rng rng(appearance_seed);
  const double fg = profile.fg_mean + rng.uniform(-kIntensityJitter, kIntensityJitter);
  const double bg = profile.bg_level + rng.uniform(-kIntensityJitter, kIntensityJitter);
  // Label intensities: for rings, inner bright, middle dark, outer mid.
  std::vector<double> level(4, fg);
  level[0] = bg;
  if (num_classes == 4) {
    level[1] = fg + 0.5 * profile.fg_contrast;
    level[2] = fg - 0.5 * profile.fg_contrast;
    level[3] = fg;
  }
  const auto noise = correlated_noise(n, n, profile.noise_corr, rng);
  const double cd = std::cos(profile.bg_direction), sd = std::sin(profile.bg_direction);
  const double half = static_cast<double>(n) / 2.0;
  std::vector<Real> out(static_cast<std::size_t>(n * n));
  for (std::int64_t y = 0; y < n; ++y)
    for (std::int64_t x = 0; x < n; ++x) {
      const auto i = static_cast<std::size_t>(y * n + x);
      const int label = mask.data[i];
      if (label < 0 || label >= num_classes) throw IndexError("render_image: label outside class range");
      const double proj = ((static_cast<double>(x) + 0.5 - half) * cd + (static_cast<double>(y) + 0.5 - half) * sd) / half;
      const double ramp = profile.bg_slope * proj * (label == 0 ? 1.0 : 0.5);
      double v = level[static_cast<std::size_t>(label)] + ramp + profile.noise_amp * noise[i];
      v = std::pow(std::clamp(v, 0.0, 1.0), profile.gamma);
      out[i] = static_cast<Real>(v);
    }
  return Tensor::from({1, n, n}, std::move(out));
}

SegSample render_sample(const DomainProfile& profile, int domain_id, std::int64_t size, int num_classes,
                        std::uint64_t geometry_seed, std::uint64_t appearance_seed) {
  if (!is_power_of_two(size)) throw ConfigError("image size must be a power of two");
  SegSample s;
  s.mask = render_mask(draw_geometry(size, geometry_seed), size, num_classes);
  s.image = render_image(s.mask, profile, num_classes, appearance_seed);
  s.domain_id = domain_id;
  return s;
}

std::vector<std::size_t> Dataset::select(Split split, int domain) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (splits[i] == split && (domain < 0 || samples[i].domain_id == domain)) out.push_back(i);
  return out;
}

std::vector<SegSample> Dataset::subset(Split split, int domain) const {
  std::vector<SegSample> out;
  for (auto i : select(split, domain)) out.push_back(samples[i]);
  return out;
}

std::vector<int> Dataset::domains(Split split) const {
  std::set<int> ids;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (splits[i] == split) ids.insert(samples[i].domain_id);
  return {ids.begin(), ids.end()};
}

void SynthConfig::validate() const {
  if (!is_power_of_two(size) || size < 8) throw ConfigError("size must be a power of two >= 8");
  if (num_classes != 2 && num_classes != 4) throw ConfigError("num_classes must be 2 or 4");
  if (n_train < 0 || n_val < 0 || n_test < 0) throw ConfigError("sample counts must be >= 0");
}

namespace {

void append(Dataset& d, const DomainProfile& p, int domain, Split split, int count, const SynthConfig& cfg) {
  for (int i = 0; i < count; ++i) {
    d.samples.push_back(render_sample(p, domain, cfg.size, cfg.num_classes,
                                      sample_seed(cfg.seed, kGeometryStream, domain, split, i),
                                      sample_seed(cfg.seed, kAppearanceStream, domain, split, i)));
    d.splits.push_back(split);
  }
}

}  // namespace

Dataset generate_dataset(const SynthConfig& cfg, const std::vector<DomainProfile>& domains) {
  cfg.validate();
  if (domains.empty()) throw ConfigError("generate_dataset needs at least one domain");
  for (const auto& p : domains) p.validate();
  Dataset d;
  d.num_classes = cfg.num_classes;
  append(d, domains[0], 0, Split::train, cfg.n_train, cfg);
  append(d, domains[0], 0, Split::val, cfg.n_val, cfg);
  for (std::size_t k = 0; k < domains.size(); ++k)
    append(d, domains[k], static_cast<int>(k), Split::test, cfg.n_test, cfg);
  return d;
}

Dataset generate_dataset(int n_per_domain, const std::vector<DomainProfile>& domains, std::int64_t size,
                         int num_classes, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.size = size;
  cfg.num_classes = num_classes;
  cfg.n_train = 0;
  cfg.n_val = 0;
  cfg.n_test = n_per_domain;
  cfg.seed = seed;
  return generate_dataset(cfg, domains);
}

std::vector<DomainProfile> default_domains() {
  //            name  fg   contr bg   dir  slope noise corr gamma
  return {
      {"G", 0.70, 0.20, 0.20, 0.0, 0.10, 0.03, 1.0, 1.0},
      {"A", 0.45, 0.15, 0.35, 1.0, 0.10, 0.05, 1.0, 1.0},
      {"B", 0.95, 0.25, 0.65, 2.0, 0.05, 0.02, 2.0, 1.0},
      {"C", 0.70, 0.20, 0.25, 0.5, 0.60, 0.03, 1.0, 1.0},
      {"D", 0.65, 0.20, 0.20, 3.0, 0.10, 0.20, 1.0, 1.0},
      {"E", 0.70, 0.20, 0.20, 0.0, 0.10, 0.03, 1.0, 3.0},
      {"F", 0.22, 0.08, 0.04, 4.0, 0.05, 0.03, 1.0, 1.0},
  };
}

std::vector<std::string> preset_names() { return {"default", "cardiac"}; }

SynthConfig preset_config(const std::string& name) {
  SynthConfig cfg;
  if (name == "default") return cfg;
  if (name == "cardiac") {
    cfg.num_classes = 4;
    return cfg;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

std::vector<DomainSummary> summarize(const Dataset& data) {
  std::vector<DomainSummary> out;
  auto find = [&](int id) -> DomainSummary& {
    for (auto& s : out)
      if (s.domain_id == id) return s;
    out.push_back({id, 0, 0, 0});
    return out.back();
  };
  for (const auto& s : data.samples) {
    auto& d = find(s.domain_id);
    double m = 0;
    for (Real v : s.image.data()) m += v;
    d.mean_intensity += m / static_cast<double>(s.image.numel());
    std::int64_t fg = 0;
    for (auto v : s.mask.data) fg += v != 0;
    d.foreground_fraction += static_cast<double>(fg) / static_cast<double>(s.mask.numel());
    ++d.count;
  }
  for (auto& d : out) {
    d.mean_intensity /= static_cast<double>(d.count);
    d.foreground_fraction /= static_cast<double>(d.count);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.domain_id < b.domain_id; });
  return out;
}

std::filesystem::path save_dataset(const std::filesystem::path& dir, const Dataset& data) {
  namespace fs = std::filesystem;
  if (data.splits.size() != data.samples.size()) throw FormatError("dataset split list does not match samples");
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  const fs::path manifest = dir / "manifest.csv";
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw FormatError("cannot write " + manifest.string());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.cstn", i);
    const std::string image = std::string("images/") + name;
    const std::string mask = std::string("masks/") + name;
    save_tensor(dir / image, data.samples[i].image);
    save_tensor(dir / mask, labels_to_tensor(data.samples[i].mask));
    out << image << ',' << mask << ',' << data.samples[i].domain_id << ',' << split_name(data.splits[i]) << '\n';
  }
  if (!out) throw FormatError("failed writing " + manifest.string());
  return manifest;
}

Dataset load_dataset(const std::filesystem::path& manifest) {
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw FormatError("cannot open manifest " + manifest.string());
  const auto base = manifest.parent_path();
  Dataset d;
  int max_label = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    if (f.size() != 4) throw FormatError(where + ": expected 4 fields");
    SegSample s;
    try {
      std::size_t used = 0;
      s.domain_id = std::stoi(f[2], &used);
      if (used != f[2].size() || s.domain_id < 0) throw FormatError("bad domain id");
      d.splits.push_back(parse_split(f[3]));
    } catch (const std::exception&) {
      throw FormatError(where + ": bad domain id or split");
    }
    s.image = load_tensor(base / f[0]);
    s.mask = tensor_to_labels(load_tensor(base / f[1]));
    if (s.image.rank() != 3 || s.image.dim(0) != 1 || s.mask.shape != Shape{s.image.dim(1), s.image.dim(2)})
      throw FormatError(where + ": image/mask shapes do not match");
    for (auto v : s.mask.data) {
      if (v < 0) throw FormatError(where + ": negative label");
      max_label = std::max(max_label, static_cast<int>(v));
    }
    d.samples.push_back(std::move(s));
  }
  d.num_classes = std::max(2, max_label + 1);
  return d;
}

COMPSTYLE_NAMESPACE_END
