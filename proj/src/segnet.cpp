// SPDX-License-Identifier: Apache-2.0
#include "compstyle/segnet.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "compstyle/error.hpp"
#include "compstyle/io.hpp"
#include "compstyle/ops.hpp"
#include "compstyle/rng.hpp"

COMPSTYLE_NAMESPACE_BEGIN

namespace {

// He-normal weights, zero bias.
ConvLayer make_conv(std::string name, std::int64_t in, std::int64_t out, std::int64_t k, Rng& rng, double gain = 2.0) {
  std::vector<Real> w(static_cast<std::size_t>(out * in * k * k));
  const double std_dev = std::sqrt(gain / static_cast<double>(in * k * k));
  for (auto& v : w) v = static_cast<Real>(rng.normal() * std_dev);
  return {std::move(name), Tensor::from({out, in, k, k}, std::move(w), true), Tensor::zeros({out}, true)};
}

Tensor conv(const ConvLayer& l, const Tensor& x) {
  const int pad = static_cast<int>(l.weight.dim(2) / 2);
  return add_channel_bias(conv2d(x, l.weight, 1, pad), l.bias);
}

Tensor conv_relu(const ConvLayer& l, const Tensor& x) { return relu(conv(l, x)); }

std::int64_t width(const SegNetConfig& c, int level) { return static_cast<std::int64_t>(c.base_width) << level; }

// Decoder stage d produces width(depth-1-d) channels.
void build_decoder(std::vector<ConvLayer>& out, const std::string& prefix, const SegNetConfig& c, std::int64_t head_out,
                   Rng& rng) {
  std::int64_t in = width(c, c.depth - 1);
  for (int d = 0; d < c.depth; ++d) {
    const std::int64_t w = width(c, c.depth - 1 - d);
    const std::string stage = prefix + std::to_string(d);
    out.push_back(make_conv(stage + ".conv0", in, w, 3, rng));
    out.push_back(make_conv(stage + ".conv1", w, w, 3, rng));
    in = w;
  }
  out.push_back(make_conv(prefix + ".head", in, head_out, 1, rng, 1.0));
}

std::string shape_token(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

Shape parse_shape_token(const std::string& token) {
  Shape s;
  std::stringstream ss(token);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(part, &used);
      if (used != part.size() || v < 0) throw FormatError("bad shape '" + token + "'");
      s.push_back(v);
    } catch (const std::logic_error&) {
      throw FormatError("bad shape '" + token + "'");
    }
  }
  return s;
}

}  // namespace

void SegNetConfig::validate() const {
  if (base_width < 1) throw ConfigError("base_width must be >= 1");
  if (depth < 1 || depth > 8) throw ConfigError("depth must lie in [1, 8]");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
}

SegNet::SegNet(SegNetConfig config) : config_(config) {
  config_.validate();
  const Rng root(config_.seed);
  Rng rng = root.split(1);
  std::int64_t in = config_.in_channels;
  for (int s = 0; s < config_.depth; ++s) {
    const std::int64_t w = width(config_, s);
    const std::string stage = "enc" + std::to_string(s);
    layers_.push_back(make_conv(stage + ".conv0", in, w, 3, rng));
    layers_.push_back(make_conv(stage + ".conv1", w, w, 3, rng));
    in = w;
  }
  seg_first_ = layers_.size();
  build_decoder(layers_, "seg", config_, config_.num_classes, rng);
  if (config_.aux_decoder) {
    Rng aux_rng = root.split(2);
    build_decoder(aux_, "aux", config_, 1, aux_rng);
  }
}

void SegNet::check_input(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != config_.in_channels)
    throw DimensionError("SegNet input must be [N," + std::to_string(config_.in_channels) + ",H,W], got " +
                         shape_string(x.shape()));
  const std::int64_t factor = std::int64_t{1} << config_.depth;
  if (x.dim(2) % factor != 0 || x.dim(3) % factor != 0)
    throw DimensionError("spatial size " + shape_string(x.shape()) + " not divisible by " + std::to_string(factor));
}

Tensor SegNet::encode(const Tensor& x, const FeatureHook& hook) const {
  check_input(x);
  Tensor f = x;
  for (int s = 0; s < config_.depth; ++s) {
    f = conv_relu(layers_[static_cast<std::size_t>(2 * s)], f);
    f = conv_relu(layers_[static_cast<std::size_t>(2 * s + 1)], f);
    f = avg_pool2x(f);
    if (hook) f = hook(f, s);
  }
  return f;
}

Tensor SegNet::decode_seg(const Tensor& latent) const {
  Tensor f = latent;
  for (int d = 0; d < config_.depth; ++d) {
    f = upsample2x(f);
    f = conv_relu(layers_[seg_first_ + static_cast<std::size_t>(2 * d)], f);
    f = conv_relu(layers_[seg_first_ + static_cast<std::size_t>(2 * d + 1)], f);
  }
  return conv(layers_.back(), f);
}

Tensor SegNet::forward_seg(const Tensor& x, const FeatureHook& hook) const { return decode_seg(encode(x, hook)); }

int SegNet::num_style_hooks() const { return std::min(2, config_.depth); }

std::vector<std::int64_t> SegNet::hook_channels() const {
  std::vector<std::int64_t> out;
  for (int d = 0; d < num_style_hooks(); ++d) out.push_back(width(config_, config_.depth - 1 - d));
  return out;
}

Tensor SegNet::forward_style_decode(const Tensor& latent, std::span<const StyleHookParams> hooks,
                                    std::span<const StyleNoiseScale> scales) const {
  if (aux_.empty()) throw ConfigError("the auxiliary decoder is closed");
  if (latent.rank() != 4 || latent.dim(1) != width(config_, config_.depth - 1))
    throw DimensionError("latent " + shape_string(latent.shape()) + " does not match the decoder");
  if (hooks.size() > static_cast<std::size_t>(num_style_hooks()))
    throw DimensionError("more style hooks than hooked decoder stages");
  if (!scales.empty() && scales.size() != hooks.size())
    throw DimensionError("one noise scale per style hook is required");
  Tensor f = latent;
  for (int d = 0; d < config_.depth; ++d) {
    f = upsample2x(f);
    f = conv_relu(aux_[static_cast<std::size_t>(2 * d)], f);
    f = conv_relu(aux_[static_cast<std::size_t>(2 * d + 1)], f);
    const auto i = static_cast<std::size_t>(d);
    if (i < hooks.size()) f = apply_hook(f, hooks[i], scales.empty() ? nullptr : &scales[i]);
  }
  return sigmoid(conv(aux_.back(), f));
}

Tensor SegNet::reconstruct(const Tensor& latent) const { return forward_style_decode(latent, {}, {}); }

void SegNet::close_aux_decoder() {
  aux_.clear();
  config_.aux_decoder = false;
}

std::vector<const ConvLayer*> SegNet::layers() const {
  std::vector<const ConvLayer*> out;
  for (const auto& l : layers_) out.push_back(&l);
  for (const auto& l : aux_) out.push_back(&l);
  return out;
}

std::vector<Tensor> SegNet::parameters() const {
  std::vector<Tensor> out;
  for (const ConvLayer* l : layers()) {
    out.push_back(l->weight);
    out.push_back(l->bias);
  }
  return out;
}

std::int64_t SegNet::parameter_count() const {
  std::int64_t n = 0;
  for (const Tensor& t : parameters()) n += t.numel();
  return n;
}

SegNet SegNet::frozen() const {
  SegNet copy = *this;
  for (auto* group : {&copy.layers_, &copy.aux_})
    for (auto& l : *group) {
      l.weight = l.weight.detach();
      l.bias = l.bias.detach();
    }
  return copy;
}

void SegNet::load_state(const SegNet& other) {
  auto mine = parameters();
  const auto theirs = other.parameters();
  if (mine.size() != theirs.size()) throw DimensionError("load_state: layouts differ");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].shape() != theirs[i].shape()) throw DimensionError("load_state: parameter shapes differ");
    std::copy(theirs[i].data().begin(), theirs[i].data().end(), mine[i].data().begin());
  }
}

void save_checkpoint(const SegNet& net, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const SegNetConfig& c = net.config();
  std::ofstream manifest(dir / "manifest.txt", std::ios::binary);
  if (!manifest) throw FormatError("cannot write " + (dir / "manifest.txt").string());
  manifest << "compstyle-checkpoint 1\n";
  manifest << "config base_width=" << c.base_width << " depth=" << c.depth << " num_classes=" << c.num_classes
           << " in_channels=" << c.in_channels << " aux_decoder=" << (c.aux_decoder ? 1 : 0) << " seed=" << c.seed
           << "\n";
  for (const ConvLayer* l : net.layers())
    for (const auto& [suffix, t] : {std::pair<const char*, const Tensor*>{".weight", &l->weight}, {".bias", &l->bias}}) {
      const std::string name = l->name + suffix;
      manifest << "param " << name << " " << shape_token(t->shape()) << " " << name << ".cstn\n";
      save_tensor(dir / (name + ".cstn"), *t);
    }
  if (!manifest) throw FormatError("failed writing checkpoint manifest");
}

SegNet load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt", std::ios::binary);
  if (!manifest) throw FormatError("cannot read " + (dir / "manifest.txt").string());
  std::string line;
  if (!std::getline(manifest, line) || line != "compstyle-checkpoint 1") throw FormatError("not a checkpoint manifest");
  if (!std::getline(manifest, line) || line.rfind("config ", 0) != 0) throw FormatError("missing config line");

  std::map<std::string, std::string> kv;
  {
    std::stringstream ss(line.substr(7));
    std::string item;
    while (ss >> item) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw FormatError("bad config entry '" + item + "'");
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  SegNetConfig c;
  try {
    c.base_width = std::stoi(kv.at("base_width"));
    c.depth = std::stoi(kv.at("depth"));
    c.num_classes = std::stoi(kv.at("num_classes"));
    c.in_channels = std::stoi(kv.at("in_channels"));
    c.aux_decoder = std::stoi(kv.at("aux_decoder")) != 0;
    c.seed = std::stoull(kv.at("seed"));
  } catch (const std::logic_error&) {
    throw FormatError("incomplete or invalid checkpoint config");
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  }

  SegNet net(c);
  auto params = net.parameters();
  std::vector<std::string> names;
  for (const ConvLayer* l : net.layers()) {
    names.push_back(l->name + ".weight");
    names.push_back(l->name + ".bias");
  }
  std::size_t i = 0;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tag, name, shape, file, extra;
    if (!(ss >> tag >> name >> shape >> file) || (ss >> extra) || tag != "param")
      throw FormatError("bad manifest line '" + line + "'");
    if (i >= params.size() || name != names[i]) throw FormatError("unexpected parameter '" + name + "'");
    const Shape expected = parse_shape_token(shape);
    if (expected != params[i].shape()) throw FormatError("shape mismatch for '" + name + "'");
    const Tensor t = load_tensor(dir / file);
    if (t.shape() != expected) throw FormatError("tensor file shape mismatch for '" + name + "'");
    std::copy(t.data().begin(), t.data().end(), params[i].data().begin());
    ++i;
  }
  if (i != params.size()) throw FormatError("checkpoint is missing parameters");
  return net;
}

COMPSTYLE_NAMESPACE_END
