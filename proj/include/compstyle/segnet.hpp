// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "compstyle/style.hpp"
#include "compstyle/tensor.hpp"

COMPSTYLE_NAMESPACE_BEGIN

struct SegNetConfig {
  int base_width = 16;  // 16 or 64 for the two standard variants
  int depth = 3;
  int num_classes = 2;
  int in_channels = 1;
  bool aux_decoder = true;
  std::uint64_t seed = 0;

  /// Throws ConfigError on non-positive sizes or fewer than 2 classes.
  void validate() const;
};

struct ConvLayer {
  std::string name;
  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out]
};

/// Called on an encoder stage output (after pooling); stage is 0-based.
using FeatureHook = std::function<Tensor(const Tensor& feature, int stage)>;

/// Encoder-decoder FCN. Each encoder stage is two 3x3 conv + ReLU layers then
/// 2x average pooling; the segmentation decoder mirrors it with nearest
/// upsampling and ends in a 1x1 conv to num_classes. The auxiliary decoder has
/// the same layout, ends in one sigmoid channel, and carries style hooks on its
/// innermost stages.
class SegNet {
 public:
  explicit SegNet(SegNetConfig config);

  const SegNetConfig& config() const { return config_; }

  /// Latent [N, base * 2^(depth-1), H / 2^depth, W / 2^depth]. Throws
  /// DimensionError unless H and W are divisible by 2^depth.
  Tensor encode(const Tensor& x, const FeatureHook& hook = {}) const;
  /// Logits [N, K, H, W] from a latent.
  Tensor decode_seg(const Tensor& latent) const;
  Tensor forward_seg(const Tensor& x, const FeatureHook& hook = {}) const;

  /// Plain auxiliary reconstruction [N,1,H,W] in [0,1].
  Tensor reconstruct(const Tensor& latent) const;
  /// Auxiliary reconstruction with hooks[i] applied to the output of decoder
  /// stage i. With no per-hook scale the noise scale is the batch estimate.
  Tensor forward_style_decode(const Tensor& latent, std::span<const StyleHookParams> hooks,
                              std::span<const StyleNoiseScale> scales = {}) const;

  int num_style_hooks() const;
  /// Channel count at each style hook.
  std::vector<std::int64_t> hook_channels() const;
  bool has_aux_decoder() const { return !aux_.empty(); }
  /// Drops the auxiliary decoder; the segmentation path is unaffected.
  void close_aux_decoder();

  /// Encoder, segmentation decoder, then (if present) auxiliary decoder.
  std::vector<const ConvLayer*> layers() const;
  /// Weight and bias of every layer in layers() order; handles share storage.
  std::vector<Tensor> parameters() const;
  std::int64_t parameter_count() const;

  /// Copy with detached parameters that do not require gradients.
  SegNet frozen() const;
  /// Copies parameter values from a net of identical layout.
  void load_state(const SegNet& other);

 private:
  void check_input(const Tensor& x) const;

  SegNetConfig config_;
  std::vector<ConvLayer> layers_;
  std::size_t seg_first_ = 0;  // index of the first segmentation decoder layer
  std::vector<ConvLayer> aux_;
};

/// Directory holding manifest.txt and one CSTN file per parameter.
void save_checkpoint(const SegNet& net, const std::filesystem::path& dir);
/// Throws FormatError on a malformed manifest or mismatched shapes.
SegNet load_checkpoint(const std::filesystem::path& dir);

COMPSTYLE_NAMESPACE_END
