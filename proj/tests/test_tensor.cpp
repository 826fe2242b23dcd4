// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "compstyle/error.hpp"
#include "compstyle/io.hpp"
#include "compstyle/ops.hpp"
#include "compstyle/optim.hpp"
#include "support/test_util.hpp"

using namespace compstyle;
using compstyle::test::random_tensor;

TEST_CASE("conv2d matches a direct loop") {
  Rng rng(41);
  for (int trial = 0; trial < 40; ++trial) {
    const std::int64_t n = 2, c = 1 + static_cast<std::int64_t>(rng.uniform_int(3)), k = 1 + static_cast<std::int64_t>(rng.uniform_int(3));
    const std::int64_t ks = 1 + 2 * static_cast<std::int64_t>(rng.uniform_int(3));
    const int stride = 1 + static_cast<int>(rng.uniform_int(3));
    const int pad = static_cast<int>(rng.uniform_int(3));
    const std::int64_t h = ks + static_cast<std::int64_t>(rng.uniform_int(6)), w = ks + static_cast<std::int64_t>(rng.uniform_int(6));
    const Tensor x = random_tensor({n, c, h, w}, rng);
    const Tensor wt = random_tensor({k, c, ks, ks}, rng);
    const Tensor y = conv2d(x, wt, stride, pad);
    const std::int64_t oh = (h + 2 * pad - ks) / stride + 1, ow = (w + 2 * pad - ks) / stride + 1;
    REQUIRE(y.shape() == Shape{n, k, oh, ow});
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t o = 0; o < k; ++o)
        for (std::int64_t oy = 0; oy < oh; ++oy)
          for (std::int64_t ox = 0; ox < ow; ++ox) {
            double acc = 0.0;
            for (std::int64_t ci = 0; ci < c; ++ci)
              for (std::int64_t dy = 0; dy < ks; ++dy)
                for (std::int64_t dx = 0; dx < ks; ++dx) {
                  const std::int64_t iy = oy * stride - pad + dy, ix = ox * stride - pad + dx;
                  if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                  acc += static_cast<double>(x.data()[static_cast<std::size_t>(((b * c + ci) * h + iy) * w + ix)]) *
                         wt.data()[static_cast<std::size_t>(((o * c + ci) * ks + dy) * ks + dx)];
                }
            CHECK(y.data()[static_cast<std::size_t>(((b * k + o) * oh + oy) * ow + ox)] == doctest::Approx(acc).epsilon(1e-4));
          }
  }
}

TEST_CASE("conv2d forward examples") {
  SUBCASE("1x1 kernel scales a ones image") {
    auto x = Tensor::full({1, 1, 3, 3}, 1.0f);
    auto k = Tensor::full({1, 1, 1, 1}, 2.0f);
    auto y = conv2d(x, k, 1, 0);
    CHECK(y.shape() == Shape{1, 1, 3, 3});
    for (Real v : y.data()) CHECK(v == 2.0f);
  }
  SUBCASE("impulse response reproduces the kernel") {
    auto x = Tensor::zeros({1, 1, 5, 5});
    x.data()[12] = 1.0f;
    std::vector<Real> kv(9);
    for (int i = 0; i < 9; ++i) kv[static_cast<std::size_t>(i)] = static_cast<Real>(i + 1);
    auto k = Tensor::from({1, 1, 3, 3}, kv);
    auto y = conv2d(x, k, 1, 1);
    // Cross-correlation: out(2+dy, 2+dx) = k(1-dy, 1-dx) around the impulse.
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        CHECK(y.data()[static_cast<std::size_t>((2 + dy) * 5 + (2 + dx))] ==
              kv[static_cast<std::size_t>((1 - dy) * 3 + (1 - dx))]);
  }
  SUBCASE("output geometry with stride") {
    auto x = Tensor::zeros({2, 3, 8, 8});
    auto k = Tensor::zeros({4, 3, 3, 3});
    CHECK(conv2d(x, k, 2, 1).shape() == Shape{2, 4, 4, 4});
    CHECK(conv2d(x, k, 1, 0).shape() == Shape{2, 4, 6, 6});
  }
  SUBCASE("channel mismatch") {
    CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 3, 3, 3})), DimensionError);
    CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 5, 5})), DimensionError);
  }
}

TEST_CASE("instance statistics") {
  SUBCASE("constant map") {
    auto [mu, sigma] = instance_stats(Tensor::full({1, 1, 4, 4}, 2.0f));
    CHECK(mu.item() == doctest::Approx(2.0));
    CHECK(sigma.item() == 0.0f);
  }
  SUBCASE("two-point population deviation") {
    auto [mu, sigma] = instance_stats(Tensor::from({1, 1, 1, 2}, {1.0f, 3.0f}));
    CHECK(mu.item() == doctest::Approx(2.0));
    CHECK(sigma.item() == doctest::Approx(1.0));
  }
  SUBCASE("matches a two-pass oracle") {
    Rng rng(7);
    auto f = random_tensor({2, 4, 8, 8}, rng, 1.5);
    auto [mu, sigma] = instance_stats(f);
    for (int p = 0; p < 8; ++p) {
      double m = 0.0;
      for (int i = 0; i < 64; ++i) m += f.data()[static_cast<std::size_t>(p * 64 + i)];
      m /= 64.0;
      double v = 0.0;
      for (int i = 0; i < 64; ++i) {
        const double d = f.data()[static_cast<std::size_t>(p * 64 + i)] - m;
        v += d * d;
      }
      CHECK(std::abs(mu.data()[static_cast<std::size_t>(p)] - m) < 1e-6);
      CHECK(std::abs(sigma.data()[static_cast<std::size_t>(p)] - std::sqrt(v / 64.0)) < 1e-6);
    }
  }
  SUBCASE("sigma is non-negative and zero exactly for constant maps") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      const bool constant = trial % 3 == 0;
      auto f = constant ? Tensor::full({1, 2, 5, 5}, static_cast<Real>(rng.normal()))
                        : random_tensor({1, 2, 5, 5}, rng);
      auto sigma = instance_std(f);
      for (Real s : sigma.data()) {
        CHECK(s >= 0.0f);
        if (constant)
          CHECK(s <= 1e-7f);
        else
          CHECK(s > 1e-7f);
      }
    }
  }
}

TEST_CASE("upsample and pooling") {
  auto one = upsample2x(Tensor::full({1, 1, 1, 1}, 5.0f));
  CHECK(one.shape() == Shape{1, 1, 2, 2});
  for (Real v : one.data()) CHECK(v == 5.0f);

  auto checker = upsample2x(Tensor::from({1, 1, 2, 2}, {1, 0, 0, 1}));
  const std::vector<Real> expected{1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1};
  CHECK(std::vector<Real>(checker.data().begin(), checker.data().end()) == expected);

  auto pooled = avg_pool2x(checker);
  CHECK(std::vector<Real>(pooled.data().begin(), pooled.data().end()) == std::vector<Real>{1, 0, 0, 1});
  CHECK_THROWS_AS(avg_pool2x(Tensor::zeros({1, 1, 3, 4})), DimensionError);
}

TEST_CASE("losses") {
  auto logits = Tensor::zeros({1, 2, 3, 3});
  auto labels = IntTensor::zeros({1, 3, 3});
  labels.data[4] = 1;
  CHECK(softmax_ce_loss(logits, labels).item() == doctest::Approx(std::numbers::ln2).epsilon(1e-6));

  Rng rng(3);
  auto a = random_tensor({2, 3}, rng);
  CHECK(mse_loss(a, a).item() == 0.0f);
  CHECK(mse_loss(Tensor::from({2}, {0, 0}), Tensor::from({2}, {1, 3})).item() == doctest::Approx(5.0));

  labels.data[0] = 2;
  CHECK_THROWS_AS(softmax_ce_loss(logits, labels), IndexError);
  labels.data[0] = -1;
  CHECK_THROWS_AS(soft_dice_loss(logits, labels), IndexError);
  CHECK_THROWS_AS(mse_loss(a, Tensor::zeros({3, 2})), DimensionError);

  SUBCASE("perfect prediction has near-zero dice loss") {
    auto lab = IntTensor::zeros({1, 2, 2});
    lab.data = {0, 1, 1, 0};
    auto z = Tensor::from({1, 2, 2, 2}, {20, -20, -20, 20, -20, 20, 20, -20});
    CHECK(soft_dice_loss(z, lab).item() < 1e-6f);
  }
  SUBCASE("softmax sums to one") {
    auto p = softmax_channels(random_tensor({2, 3, 4, 4}, rng, 3.0));
    for (int n = 0; n < 2; ++n)
      for (int i = 0; i < 16; ++i) {
        double s = 0.0;
        for (int c = 0; c < 3; ++c) s += p.data()[static_cast<std::size_t>((n * 3 + c) * 16 + i)];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
      }
  }
}

TEST_CASE("graph traversal") {
  SUBCASE("each node visited once, outputs first") {
    auto x = Tensor::from({3}, {1, 2, 3}, true);
    auto y = mul(x, x);
    auto z = add(y, y);
    auto loss = sum(z);
    const Graph g = trace(loss);
    CHECK(g.node_count() == 3);
    CHECK(g.order.front() == loss.impl().get());
    CHECK(g.order.back() == y.impl().get());
  }
  SUBCASE("shared subexpressions accumulate like an unrolled graph") {
    Rng rng(21);
    auto base = random_tensor({2, 5}, rng);
    auto x = Tensor::from(base.shape(), {base.data().begin(), base.data().end()}, true);
    auto shared = relu(scale(x, 1.5f));
    sum(add(mul(shared, shared), shared)).backward();

    auto x2 = Tensor::from(base.shape(), {base.data().begin(), base.data().end()}, true);
    auto c1 = relu(scale(x2, 1.5f));
    auto c2 = relu(scale(x2, 1.5f));
    auto c3 = relu(scale(x2, 1.5f));
    sum(add(mul(c1, c2), c3)).backward();
    for (std::size_t i = 0; i < 10; ++i) CHECK(x.grad()[i] == doctest::Approx(x2.grad()[i]).epsilon(1e-6));
  }
  SUBCASE("every reachable leaf gets a gradient") {
    auto a = Tensor::from({2}, {1, 2}, true);
    auto b = Tensor::from({2}, {3, 4}, true);
    auto frozen = Tensor::from({2}, {5, 6});
    sum(mul(add(a, frozen), b)).backward();
    CHECK(a.has_grad());
    CHECK(b.has_grad());
    CHECK_FALSE(frozen.has_grad());
    CHECK(a.grad()[1] == 4.0f);
    CHECK(b.grad()[0] == 6.0f);
  }
  SUBCASE("no-grad guard suppresses recording") {
    auto a = Tensor::from({2}, {1, 2}, true);
    NoGradGuard guard;
    auto y = mul(a, a);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.grad_fn() == nullptr);
  }
}

TEST_CASE("forward ops keep finite values") {
  Rng rng(5);
  auto x = random_tensor({2, 3, 8, 8}, rng, 4.0);
  auto w = random_tensor({4, 3, 3, 3}, rng);
  auto y = sigmoid(relu(conv2d(upsample2x(avg_pool2x(x)), w, 1, 1)));
  for (Real v : y.data()) CHECK(std::isfinite(v));
  auto big = Tensor::from({3}, {-1000.0f, 0.0f, 1000.0f});
  auto s = sigmoid(big);
  CHECK(s.data()[0] == 0.0f);
  CHECK(s.data()[1] == 0.5f);
  CHECK(s.data()[2] == 1.0f);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto w = Tensor::from({3}, {0.5f, -1.0f, 2.0f}, true);
    std::vector<Tensor> params{w};
    std::vector<Real> zeros(3, 0.0f);
    std::vector<std::span<const Real>> grads{zeros};
    AdamState st;
    adam_step(params, grads, st, 0.1);
    CHECK(w.data()[0] == 0.5f);
    CHECK(w.data()[1] == -1.0f);
    CHECK(w.data()[2] == 2.0f);
    CHECK(st.step == 1);
  }
  SUBCASE("first step moves by lr") {
    auto w = Tensor::from({1}, {1.0f}, true);
    std::vector<Tensor> params{w};
    std::vector<Real> one{1.0f};
    std::vector<std::span<const Real>> grads{one};
    AdamState st;
    adam_step(params, grads, st, 0.1);
    CHECK(w.item() == doctest::Approx(0.9).epsilon(1e-6));
  }
  SUBCASE("w^2 from 1 shrinks monotonically over 10 steps") {
    auto w = Tensor::from({1}, {1.0f}, true);
    Adam opt({w}, 0.1);
    double prev = 1.0;
    for (int i = 0; i < 10; ++i) {
      opt.zero_grad();
      sum(square(w)).backward();
      opt.step();
      CHECK(std::abs(w.item()) < prev);
      prev = std::abs(w.item());
    }
  }
  SUBCASE("shape mismatch") {
    auto w = Tensor::from({2}, {1.0f, 2.0f});
    std::vector<Tensor> params{w};
    std::vector<Real> bad{1.0f, 2.0f, 3.0f};
    std::vector<std::span<const Real>> grads{bad};
    AdamState st;
    CHECK_THROWS_AS(adam_step(params, grads, st, 0.1), DimensionError);
  }
}

TEST_CASE("CSTN format") {
  SUBCASE("exact byte layout") {
    const auto bytes = encode_tensor(Tensor::from({2}, {1.0f, -2.0f}));
    const std::vector<std::uint8_t> expected{'C', 'S', 'T', 'N', 1, 0, 1, 2, 0, 0, 0,
                                             0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0xC0};
    CHECK(bytes == expected);
  }
  SUBCASE("write-read-write is byte identical") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
      Shape shape;
      const auto rank = rng.uniform_int(5);
      for (std::uint64_t i = 0; i < rank; ++i) shape.push_back(static_cast<std::int64_t>(1 + rng.uniform_int(5)));
      auto t = random_tensor(shape, rng, 10.0);
      const auto first = encode_tensor(t);
      const auto again = encode_tensor(decode_tensor(first));
      CHECK(first == again);
      CHECK(decode_tensor(first).shape() == shape);
    }
  }
  SUBCASE("stream round trip") {
    std::stringstream ss;
    write_tensor(ss, Tensor::from({1, 2}, {3.5f, 4.25f}));
    auto t = read_tensor(ss);
    CHECK(t.shape() == Shape{1, 2});
    CHECK(t.data()[1] == 4.25f);
  }
  SUBCASE("malformed input") {
    auto bytes = encode_tensor(Tensor::from({2}, {1.0f, 2.0f}));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_tensor(bad_magic), FormatError);
    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_tensor(truncated), FormatError);
    auto bad_version = bytes;
    bad_version[4] = 2;
    CHECK_THROWS_AS(decode_tensor(bad_version), FormatError);
  }
  SUBCASE("labels survive as float tensors") {
    IntTensor lab = IntTensor::zeros({2, 2});
    lab.data = {0, 3, 1, 2};
    CHECK(tensor_to_labels(decode_tensor(encode_tensor(labels_to_tensor(lab)))) == lab);
    CHECK_THROWS_AS(tensor_to_labels(Tensor::from({1}, {0.5f})), FormatError);
  }
}
