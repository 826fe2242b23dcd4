// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "compstyle/adversarial.hpp"
#include "compstyle/error.hpp"
#include "compstyle/io.hpp"
#include "compstyle/ops.hpp"
#include "compstyle/segnet.hpp"
#include "support/test_util.hpp"

using namespace compstyle;
using compstyle::test::max_abs_diff;
using compstyle::test::random_labels;
using compstyle::test::uniform_tensor;

namespace {

SegNetConfig small_config(int base = 4, int classes = 3) {
  SegNetConfig c;
  c.base_width = base;
  c.depth = 2;
  c.num_classes = classes;
  c.seed = 11;
  return c;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("compstyle_test_segnet_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST_CASE("forward_seg contract") {
  const SegNet net(small_config());
  Rng rng(1);
  const Tensor x = uniform_tensor({3, 1, 16, 8}, rng);
  const Tensor y = net.forward_seg(x);
  CHECK(y.shape() == Shape{3, 3, 16, 8});
  CHECK(same_values(y, net.forward_seg(x)));

  const Tensor p = softmax_channels(y);
  for (std::int64_t i = 0; i < 3 * 16 * 8; ++i) {
    const std::int64_t n = i / 128, px = i % 128;
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += p.data()[static_cast<std::size_t>((n * 3 + c) * 128 + px)];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }

  CHECK_THROWS_AS(net.forward_seg(Tensor::zeros({1, 1, 10, 8})), DimensionError);
  CHECK_THROWS_AS(net.forward_seg(Tensor::zeros({1, 2, 8, 8})), DimensionError);
  CHECK_THROWS_AS(SegNet(SegNetConfig{16, 3, 1, 1, true, 0}), ConfigError);
}

TEST_CASE("auxiliary decoder and style hooks") {
  const SegNet net(small_config());
  Rng rng(2);
  const Tensor x = uniform_tensor({4, 1, 16, 16}, rng);
  const Tensor latent = net.encode(x);
  CHECK(latent.shape() == Shape{4, 8, 4, 4});

  const Tensor plain = net.reconstruct(latent);
  CHECK(plain.shape() == x.shape());
  for (Real v : plain.data()) {
    CHECK(v >= 0);
    CHECK(v <= 1);
  }

  std::vector<StyleHookParams> identity;
  for (std::int64_t c : net.hook_channels()) identity.push_back(identity_hook(4, c));
  CHECK(max_abs_diff(net.forward_style_decode(latent, identity).data(), plain.data()) < 1e-3);

  std::vector<StyleHookParams> random;
  for (std::int64_t c : net.hook_channels()) random.push_back(random_hook(4, c, rng));
  const Tensor styled = net.forward_style_decode(latent, random);
  CHECK(same_values(styled, net.forward_style_decode(latent, random)));
  CHECK(max_abs_diff(styled.data(), plain.data()) > 1e-4);

  std::vector<StyleHookParams> wrong{identity_hook(4, 3)};
  CHECK_THROWS_AS(net.forward_style_decode(latent, wrong), DimensionError);
  std::vector<StyleHookParams> too_many(3, identity_hook(4, 8));
  CHECK_THROWS_AS(net.forward_style_decode(latent, too_many), DimensionError);
}

TEST_CASE("parameters") {
  SegNetConfig c16, c64;
  c64.base_width = 64;
  const SegNet n16(c16), n64(c64);
  CHECK(n64.parameter_count() > n16.parameter_count());
  CHECK(SegNet(c16).parameter_count() == n16.parameter_count());

  // Three full-width encoder stages: (1*9+1)*16 + (16*9+1)*16 + ...
  std::int64_t enc = 0, in = 1;
  for (int s = 0; s < 3; ++s) {
    const std::int64_t w = 16 << s;
    enc += (in * 9 + 1) * w + (w * 9 + 1) * w;
    in = w;
  }
  std::int64_t dec = 0;
  in = 64;
  for (int d = 0; d < 3; ++d) {
    const std::int64_t w = 64 >> d;
    dec += (in * 9 + 1) * w + (w * 9 + 1) * w;
    in = w;
  }
  CHECK(n16.parameter_count() == enc + dec + (16 * 2 + 2) + dec + (16 + 1));

  SegNetConfig no_aux = c16;
  no_aux.aux_decoder = false;
  SegNet closed(c16);
  closed.close_aux_decoder();
  const SegNet without(no_aux);
  Rng rng(3);
  const Tensor x = uniform_tensor({2, 1, 16, 16}, rng);
  CHECK(same_values(closed.forward_seg(x), without.forward_seg(x)));
  CHECK(same_values(SegNet(c16).forward_seg(x), without.forward_seg(x)));
  CHECK_FALSE(closed.has_aux_decoder());
  CHECK_THROWS_AS(closed.reconstruct(closed.encode(x)), ConfigError);

  const SegNet frozen = n16.frozen();
  for (const Tensor& t : frozen.parameters()) CHECK_FALSE(t.requires_grad());
  for (const Tensor& t : n16.parameters()) CHECK(t.requires_grad());
}

TEST_CASE("checkpoints") {
  const SegNet net(small_config(4, 2));
  const auto dir = scratch_dir("roundtrip");
  save_checkpoint(net, dir);
  const SegNet back = load_checkpoint(dir);
  CHECK(back.config().seed == net.config().seed);
  const auto a = net.parameters(), b = back.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(same_values(a[i], b[i]));

  const auto dir2 = scratch_dir("again");
  save_checkpoint(back, dir2);
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    CHECK(read_file_bytes(entry.path()) == read_file_bytes(dir2 / entry.path().filename()));

  std::ifstream manifest(dir / "manifest.txt");
  std::string first, second, third;
  std::getline(manifest, first);
  std::getline(manifest, second);
  std::getline(manifest, third);
  CHECK(first == "compstyle-checkpoint 1");
  CHECK(third == "param enc0.conv0.weight 4x1x3x3 enc0.conv0.weight.cstn");

  SUBCASE("malformed") {
    std::ofstream(dir / "manifest.txt") << "compstyle-checkpoint 1\nconfig base_width=4\n";
    CHECK_THROWS_AS(load_checkpoint(dir), FormatError);
    std::ofstream(dir / "manifest.txt") << "nonsense\n";
    CHECK_THROWS_AS(load_checkpoint(dir), FormatError);
    CHECK_THROWS_AS(load_checkpoint(scratch_dir("missing")), FormatError);
  }
  SUBCASE("truncated parameter list") {
    std::ifstream in(dir2 / "manifest.txt");
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    all.erase(all.rfind("param"));
    std::ofstream(dir2 / "manifest.txt") << all;
    CHECK_THROWS_AS(load_checkpoint(dir2), FormatError);
  }
  SUBCASE("wrong shape in a tensor file") {
    save_tensor(dir2 / "enc0.conv0.bias.cstn", Tensor::zeros({5}));
    CHECK_THROWS_AS(load_checkpoint(dir2), FormatError);
  }
}

TEST_CASE("adversarial style search") {
  const SegNet net(small_config(4, 2));
  Rng rng(4);
  const SegBatch batch{uniform_tensor({4, 1, 16, 16}, rng), random_labels({4, 16, 16}, 2, rng)};

  std::vector<std::vector<Real>> before;
  for (const Tensor& t : net.parameters()) before.emplace_back(t.data().begin(), t.data().end());

  Rng r1(7), r2(7);
  const AdversarialResult a = adversarial_style_search(net, batch, 5, 0.1, r1);
  const AdversarialResult b = adversarial_style_search(net, batch, 5, 0.1, r2);
  CHECK(same_values(a.styled_images, b.styled_images));
  CHECK(a.final_loss == b.final_loss);
  CHECK(a.steps == 5);
  CHECK_FALSE(a.aborted);
  CHECK(a.styled_images.shape() == batch.images.shape());
  CHECK_FALSE(a.styled_images.requires_grad());
  REQUIRE(a.params.size() == 2);
  for (const auto& p : a.params) {
    for (Real v : p.lambda.data()) CHECK((v >= 0 && v <= 1));
    for (Real v : p.eps_gamma.data()) CHECK(std::abs(v) <= 3);
    for (Real v : p.eps_beta.data()) CHECK(std::abs(v) <= 3);
  }

  const auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(std::equal(before[i].begin(), before[i].end(), params[i].data().begin()));
    CHECK_FALSE(params[i].has_grad());
  }

  SUBCASE("zero step keeps the initial styling") {
    Rng s1(8), s2(8);
    const AdversarialResult one = adversarial_style_search(net, batch, 1, 0.0, s1);
    const AdversarialResult three = adversarial_style_search(net, batch, 3, 0.0, s2);
    CHECK(one.final_loss == doctest::Approx(one.initial_loss).epsilon(1e-6));
    CHECK(same_values(one.styled_images, three.styled_images));

    // Reproduce the initial draw directly.
    Rng s3(8);
    const Tensor latent = net.encode(batch.images);
    std::vector<StyleHookParams> init;
    for (std::int64_t c : net.hook_channels()) init.push_back(random_hook(4, c, s3, 0.1));
    for (auto& h : init) {
      for (auto& v : h.eps_gamma.data()) v = std::clamp(v, Real(-3), Real(3));
      for (auto& v : h.eps_beta.data()) v = std::clamp(v, Real(-3), Real(3));
      for (auto& v : h.lambda.data()) v = std::clamp(v, Real(1e-4), Real(1 - 1e-4));
    }
    CHECK(max_abs_diff(net.forward_style_decode(latent, init).data(), one.styled_images.data()) < 1e-4);
  }

  SUBCASE("preconditions") {
    Rng s(1);
    CHECK_THROWS_AS(adversarial_style_search(net, batch, 0, 0.1, s), ConfigError);
    const SegBatch single{uniform_tensor({1, 1, 16, 16}, rng), random_labels({1, 16, 16}, 2, rng)};
    CHECK_THROWS_AS(adversarial_style_search(net, single, 1, 0.1, s), InsufficientBatchError);
    SegNet closed(small_config(4, 2));
    closed.close_aux_decoder();
    CHECK_THROWS_AS(adversarial_style_search(closed, batch, 1, 0.1, s), ConfigError);
  }
}
