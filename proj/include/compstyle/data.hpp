// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic multi-domain segmentation corpus. Each sample is an ellipse
// "organ" (binary) or an ellipse split into three concentric rings
// (4 classes), rendered under a per-domain appearance profile. Geometry and
// appearance come from independent random streams, so changing the profile
// never changes a mask.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "compstyle/sample.hpp"

COMPSTYLE_NAMESPACE_BEGIN

struct DomainProfile {
  std::string name;
  double fg_mean = 0.7;       // mean foreground intensity
  double fg_contrast = 0.2;   // spread between ring labels
  double bg_level = 0.2;      // background intensity at the image centre
  double bg_direction = 0.0;  // gradient direction, radians
  double bg_slope = 0.1;      // intensity change across half the image
  double noise_amp = 0.03;
  double noise_corr = 1.0;    // box-blur radius of the texture, pixels
  double gamma = 1.0;

  /// Throws ConfigError for values that cannot give images in [0,1].
  void validate() const;
};

enum class Split : std::uint8_t { train, val, test };

std::string split_name(Split s);
Split parse_split(const std::string& s);

/// Geometry of one sample, drawn from its geometry seed only.
struct EllipseGeometry {
  double cy = 0, cx = 0;  // centre, pixels
  double ry = 1, rx = 1;  // semi-axes, pixels
  double angle = 0;       // radians
};

EllipseGeometry draw_geometry(std::int64_t size, std::uint64_t geometry_seed);

/// Label map: 0 outside; for 4 classes the normalised radius bands
/// [0, .45), [.45, .75), [.75, 1) get labels 1, 2, 3.
IntTensor render_mask(const EllipseGeometry& g, std::int64_t size, int num_classes);

/// Renders the image for a given mask under `profile`.
Tensor render_image(const IntTensor& mask, const DomainProfile& profile, int num_classes,
                    std::uint64_t appearance_seed);

SegSample render_sample(const DomainProfile& profile, int domain_id, std::int64_t size, int num_classes,
                        std::uint64_t geometry_seed, std::uint64_t appearance_seed);

struct Dataset {
  std::vector<SegSample> samples;
  std::vector<Split> splits;  // parallel to samples
  int num_classes = 2;

  std::size_t size() const { return samples.size(); }
  /// Indices of samples in `split`, optionally restricted to one domain
  /// (domain < 0 means any).
  std::vector<std::size_t> select(Split split, int domain = -1) const;
  std::vector<SegSample> subset(Split split, int domain = -1) const;
  /// Sorted distinct domain ids present in `split`.
  std::vector<int> domains(Split split) const;
};

struct SynthConfig {
  std::int64_t size = 64;
  int num_classes = 2;
  int n_train = 200;  // training domain only
  int n_val = 50;     // training domain only
  int n_test = 50;    // every domain, training domain included
  std::uint64_t seed = 0;

  void validate() const;
};

/// Domain 0 is the training domain; every other domain only gets a test split.
Dataset generate_dataset(const SynthConfig& cfg, const std::vector<DomainProfile>& domains);

/// Same `n_per_domain` samples in every domain, all marked test.
Dataset generate_dataset(int n_per_domain, const std::vector<DomainProfile>& domains, std::int64_t size,
                         int num_classes, std::uint64_t seed);

/// Training domain "G" followed by held-out domains "A".."F".
std::vector<DomainProfile> default_domains();
std::vector<std::string> preset_names();
/// "default" (binary) or "cardiac" (4 classes) with the given size.
SynthConfig preset_config(const std::string& name);

/// Mean image intensity and mean foreground fraction per domain id.
struct DomainSummary {
  int domain_id = 0;
  double mean_intensity = 0;
  double foreground_fraction = 0;
  std::size_t count = 0;
};
std::vector<DomainSummary> summarize(const Dataset& data);

/// Writes images/ and masks/ CSTN files plus `manifest.csv` into `dir` and
/// returns the manifest path. Lines: <image>,<mask>,<domain_id>,<split> with
/// paths relative to the manifest.
std::filesystem::path save_dataset(const std::filesystem::path& dir, const Dataset& data);

/// Reads a manifest written by save_dataset. The class count is inferred
/// from the largest label (at least 2). Throws FormatError.
Dataset load_dataset(const std::filesystem::path& manifest);

COMPSTYLE_NAMESPACE_END
