// SPDX-License-Identifier: Apache-2.0
#include "support/gradient_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "compstyle/adversarial.hpp"
#include "compstyle/ops.hpp"
#include "compstyle/segnet.hpp"
#include "compstyle/style.hpp"
#include "support/gradcheck.hpp"
#include "support/test_util.hpp"

static_assert(compstyle::kRealIsDouble, "gradient suite must be built against compstyle_f64");

namespace compstyle::test {
namespace {

using Inputs = std::vector<Tensor>;

// Random values bounded away from `kink` by at least `gap`.
Tensor away_from(Shape shape, Rng& rng, double kink, double gap = 0.02) {
  std::vector<Real> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) {
    double r;
    do {
      r = rng.normal();
    } while (std::abs(r - kink) < gap);
    x = r;
  }
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor positive(Shape shape, Rng& rng, double lo = 0.5, double hi = 2.0) { return uniform_tensor(std::move(shape), rng, lo, hi); }

struct Case {
  std::string op;
  std::function<std::pair<ScalarFn, Inputs>(Rng&)> make;
  double h = 1e-3;
};

// Features whose instances differ in offset and spread.
Tensor feature(Shape shape, Rng& rng) {
  Tensor f = random_tensor(shape, rng);
  const std::int64_t planes = shape[0] * shape[1], hw = shape[2] * shape[3];
  for (std::int64_t i = 0; i < planes; ++i) {
    const double sc = rng.uniform(0.5, 2.0), off = rng.uniform(-1.0, 1.0);
    for (std::int64_t j = 0; j < hw; ++j) {
      Real& v = f.data()[static_cast<std::size_t>(i * hw + j)];
      v = v * sc + off;
    }
  }
  return f;
}

// Positive random biases keep pre-activations off the ReLU kink at exactly 0,
// which zero biases on a dead channel would otherwise produce.
std::shared_ptr<SegNet> tiny_net(Rng& rng) {
  SegNetConfig c;
  c.base_width = 2;
  c.depth = 2;
  c.num_classes = 3;
  c.seed = rng.next_u64();
  auto net = std::make_shared<SegNet>(c);
  for (const ConvLayer* l : net->layers())
    for (Real& b : Tensor(l->bias).data()) b = rng.uniform(0.05, 0.2);
  return net;
}

ScalarFn projected(std::function<Tensor(const Inputs&)> op, Tensor weights) {
  return [op = std::move(op), weights](const Inputs& in) { return project(op(in), weights); };
}

std::vector<Case> cases() {
  std::vector<Case> c;
  auto binary = [&](std::string name, std::function<Tensor(const Tensor&, const Tensor&)> f, bool positive_b) {
    c.push_back({name, [f, positive_b](Rng& rng) {
                   Shape s{2, 3, 4};
                   Inputs in{random_tensor(s, rng), positive_b ? positive(s, rng) : random_tensor(s, rng)};
                   return std::pair{projected([f](const Inputs& x) { return f(x[0], x[1]); }, random_tensor(s, rng)), in};
                 }});
  };
  binary("add", [](const Tensor& a, const Tensor& b) { return add(a, b); }, false);
  binary("sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }, false);
  binary("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, false);
  binary("div", [](const Tensor& a, const Tensor& b) { return div(a, b); }, true);

  auto unary = [&](std::string name, std::function<Tensor(const Tensor&)> f, std::function<Tensor(Shape, Rng&)> gen) {
    c.push_back({name, [f, gen](Rng& rng) {
                   Shape s{3, 5};
                   Inputs in{gen(s, rng)};
                   return std::pair{projected([f](const Inputs& x) { return f(x[0]); }, random_tensor(s, rng)), in};
                 }});
  };
  auto normal = [](Shape s, Rng& rng) { return random_tensor(s, rng); };
  auto pos = [](Shape s, Rng& rng) { return positive(s, rng); };
  unary("add_scalar", [](const Tensor& x) { return add_scalar(x, 0.7); }, normal);
  unary("scale", [](const Tensor& x) { return scale(x, -1.3); }, normal);
  unary("neg", [](const Tensor& x) { return neg(x); }, normal);
  unary("relu", [](const Tensor& x) { return relu(x); }, [](Shape s, Rng& rng) { return away_from(s, rng, 0.0); });
  unary("sigmoid", [](const Tensor& x) { return sigmoid(x); }, [](Shape s, Rng& rng) { return random_tensor(s, rng, 3.0); });
  unary("sqrt", [](const Tensor& x) { return sqrt(x); }, pos);
  unary("square", [](const Tensor& x) { return square(x); }, normal);
  unary("reciprocal", [](const Tensor& x) { return reciprocal(x); }, pos);
  unary("clamp_min", [](const Tensor& x) { return clamp_min(x, 0.1); },
        [](Shape s, Rng& rng) { return away_from(s, rng, 0.1); });
  unary("clamp", [](const Tensor& x) { return clamp(x, -0.5, 0.5); }, [](Shape s, Rng& rng) {
    auto t = away_from(s, rng, -0.5);
    for (auto& v : t.data())
      if (std::abs(v - 0.5) < 0.02) v += 0.05;
    return t;
  });
  c.push_back({"reshape", [](Rng& rng) {
                 Inputs in{random_tensor({3, 5}, rng)};
                 return std::pair{projected([](const Inputs& x) { return reshape(x[0], {5, 3}); }, random_tensor({5, 3}, rng)), in};
               }});

  c.push_back({"sum", [](Rng& rng) {
                 Inputs in{random_tensor({4, 3}, rng)};
                 return std::pair{ScalarFn([](const Inputs& x) { return scale(sum(square(x[0])), 0.5); }), in};
               }});
  c.push_back({"mean", [](Rng& rng) {
                 Inputs in{random_tensor({4, 3}, rng)};
                 return std::pair{ScalarFn([](const Inputs& x) { return mean(square(x[0])); }), in};
               }});
  c.push_back({"conv2d", [](Rng& rng) {
                 Inputs in{random_tensor({2, 3, 8, 8}, rng), random_tensor({4, 3, 3, 3}, rng, 0.5)};
                 const int stride = 1 + static_cast<int>(rng.uniform_int(2));
                 const int pad = static_cast<int>(rng.uniform_int(2));
                 Tensor probe = conv2d(in[0], in[1], stride, pad);
                 return std::pair{projected([stride, pad](const Inputs& x) { return conv2d(x[0], x[1], stride, pad); },
                                            random_tensor(probe.shape(), rng)),
                                  in};
               }});
  c.push_back({"conv2d_pointwise", [](Rng& rng) {
                 Inputs in{random_tensor({2, 3, 4, 4}, rng), random_tensor({5, 3, 1, 1}, rng)};
                 return std::pair{projected([](const Inputs& x) { return conv2d(x[0], x[1]); }, random_tensor({2, 5, 4, 4}, rng)),
                                  in};
               }});
  c.push_back({"add_channel_bias", [](Rng& rng) {
                 Inputs in{random_tensor({2, 3, 2, 2}, rng), random_tensor({3}, rng)};
                 return std::pair{projected([](const Inputs& x) { return add_channel_bias(x[0], x[1]); },
                                            random_tensor({2, 3, 2, 2}, rng)),
                                  in};
               }});
  c.push_back({"avg_pool2x", [](Rng& rng) {
                 Inputs in{random_tensor({2, 2, 4, 6}, rng)};
                 return std::pair{projected([](const Inputs& x) { return avg_pool2x(x[0]); }, random_tensor({2, 2, 2, 3}, rng)), in};
               }});
  c.push_back({"upsample2x", [](Rng& rng) {
                 Inputs in{random_tensor({2, 2, 3, 3}, rng)};
                 return std::pair{projected([](const Inputs& x) { return upsample2x(x[0]); }, random_tensor({2, 2, 6, 6}, rng)), in};
               }});
  c.push_back({"instance_mean", [](Rng& rng) {
                 Inputs in{random_tensor({2, 3, 4, 4}, rng)};
                 return std::pair{projected([](const Inputs& x) { return instance_mean(x[0]); }, random_tensor({2, 3}, rng)), in};
               }});
  c.push_back({"instance_std", [](Rng& rng) {
                 Inputs in{random_tensor({2, 3, 4, 4}, rng)};
                 return std::pair{projected([](const Inputs& x) { return instance_std(x[0]); }, random_tensor({2, 3}, rng)), in};
               }});
  c.push_back({"channel_affine", [](Rng& rng) {
                 Inputs in{random_tensor({2, 3, 3, 3}, rng), random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)};
                 return std::pair{projected([](const Inputs& x) { return channel_affine(x[0], x[1], x[2]); },
                                            random_tensor({2, 3, 3, 3}, rng)),
                                  in};
               }});
  c.push_back({"batch_variance", [](Rng& rng) {
                 Inputs in{random_tensor({4, 3}, rng)};
                 return std::pair{projected([](const Inputs& x) { return batch_variance(x[0]); }, random_tensor({3}, rng)), in};
               }});
  c.push_back({"broadcast_rows", [](Rng& rng) {
                 Inputs in{random_tensor({3}, rng)};
                 return std::pair{projected([](const Inputs& x) { return broadcast_rows(x[0], 4); }, random_tensor({4, 3}, rng)), in};
               }});
  c.push_back({"scale_rows", [](Rng& rng) {
                 Inputs in{random_tensor({4, 3}, rng), random_tensor({4}, rng)};
                 return std::pair{projected([](const Inputs& x) { return scale_rows(x[0], x[1]); }, random_tensor({4, 3}, rng)), in};
               }});
  c.push_back({"gather_rows", [](Rng& rng) {
                 Inputs in{random_tensor({4, 3}, rng)};
                 std::vector<int> idx{2, 0, 2, 3, 1};
                 return std::pair{projected([idx](const Inputs& x) { return gather_rows(x[0], idx); }, random_tensor({5, 3}, rng)), in};
               }});
  c.push_back({"softmax_ce_loss", [](Rng& rng) {
                 Inputs in{random_tensor({1, 3, 4, 4}, rng, 2.0)};
                 auto labels = random_labels({1, 4, 4}, 3, rng);
                 return std::pair{ScalarFn([labels](const Inputs& x) { return softmax_ce_loss(x[0], labels); }), in};
               }});
  c.push_back({"soft_dice_loss", [](Rng& rng) {
                 Inputs in{random_tensor({2, 3, 4, 4}, rng, 2.0)};
                 auto labels = random_labels({2, 4, 4}, 3, rng);
                 return std::pair{ScalarFn([labels](const Inputs& x) { return soft_dice_loss(x[0], labels); }), in};
               }});
  c.push_back({"mse_loss", [](Rng& rng) {
                 Inputs in{random_tensor({2, 5}, rng), random_tensor({2, 5}, rng)};
                 return std::pair{ScalarFn([](const Inputs& x) { return mse_loss(x[0], x[1]); }), in};
               }});

  c.push_back({"apply_style", [](Rng& rng) {
                 const std::int64_t b = 3, ch = 2;
                 Inputs in{feature({b, ch, 4, 4}, rng), positive({b, ch}, rng), random_tensor({b, ch}, rng),
                           random_tensor({b, ch}, rng), random_tensor({b, ch}, rng)};
                 const StyleNoiseScale scale{positive({ch}, rng, 0.1, 0.5), positive({ch}, rng, 0.1, 0.5)};
                 auto op = [scale](const Inputs& x) {
                   const StyleParams p{x[1], x[2], x[3], x[4], Tensor::full({3}, 1), {0, 1, 2}};
                   return apply_style(x[0], p, scale);
                 };
                 return std::pair{projected(op, random_tensor({b, ch, 4, 4}, rng)), in};
               }});
  c.push_back({"apply_hook", [](Rng& rng) {
                 const std::int64_t b = 4, ch = 3;
                 Inputs in{feature({b, ch, 4, 4}, rng), uniform_tensor({b}, rng, 0.1, 0.9), random_tensor({b, ch}, rng),
                           random_tensor({b, ch}, rng)};
                 const std::vector<int> perm{2, 0, 3, 1};
                 auto op = [perm](const Inputs& x) { return apply_hook(x[0], {x[1], perm, x[2], x[3]}); };
                 return std::pair{projected(op, random_tensor({b, ch, 4, 4}, rng)), in};
               }});
  c.push_back({"batch_style_variance", [](Rng& rng) {
                 Inputs in{feature({4, 3, 3, 3}, rng)};
                 const Tensor wg = random_tensor({3}, rng), wb = random_tensor({3}, rng);
                 auto fn = [wg, wb](const Inputs& x) {
                   const StyleNoiseScale s = batch_style_variance(x[0]);
                   return add(project(s.sigma_gamma, wg), project(s.sigma_beta, wb));
                 };
                 return std::pair{ScalarFn(fn), in};
               }});
  c.push_back({"mixstyle", [](Rng& rng) {
                 Inputs in{feature({3, 2, 4, 4}, rng), uniform_tensor({3}, rng, 0.1, 0.9)};
                 auto op = [](const Inputs& x) { return mixstyle_with(x[0], x[1], {1, 2, 0}); };
                 return std::pair{projected(op, random_tensor({3, 2, 4, 4}, rng)), in};
               }});
  c.push_back({"dsu", [](Rng& rng) {
                 Inputs in{feature({3, 2, 4, 4}, rng)};
                 const std::uint64_t seed = rng.next_u64();
                 auto op = [seed](const Inputs& x) {
                   Rng local(seed);
                   return dsu(x[0], local);
                 };
                 return std::pair{projected(op, random_tensor({3, 2, 4, 4}, rng)), in};
               }});
  c.push_back({"forward_seg", [](Rng& rng) {
                 auto net = tiny_net(rng);
                 Inputs in{uniform_tensor({2, 1, 8, 8}, rng)};
                 auto labels = random_labels({2, 8, 8}, 3, rng);
                 auto fn = [net, labels](const Inputs& x) { return segmentation_loss(net->forward_seg(x[0]), labels); };
                 return std::pair{ScalarFn(fn), in};
               },
               1e-5});
  c.push_back({"segnet_weights", [](Rng& rng) {
                 auto net = tiny_net(rng);
                 const Tensor x = uniform_tensor({2, 1, 8, 8}, rng);
                 auto labels = random_labels({2, 8, 8}, 3, rng);
                 const auto params = net->parameters();
                 // First encoder conv and the segmentation head.
                 Inputs in{params.front(), params[params.size() / 2 - 1]};
                 auto fn = [net, x, labels](const Inputs&) { return segmentation_loss(net->forward_seg(x), labels); };
                 return std::pair{ScalarFn(fn), in};
               },
               1e-5});
  c.push_back({"forward_style_decode", [](Rng& rng) {
                 auto net = tiny_net(rng);
                 const Tensor x = uniform_tensor({3, 1, 8, 8}, rng);
                 Tensor latent;
                 {
                   NoGradGuard no_grad;
                   latent = net->encode(x).detach();
                 }
                 const auto channels = net->hook_channels();
                 std::vector<StyleHookParams> base;
                 for (auto ch : channels) base.push_back(random_hook(3, ch, rng, 2.0));
                 Inputs in{base[0].eps_gamma, base[1].eps_gamma, base[0].eps_beta};
                 auto fn = [net, latent, base, x](const Inputs& v) {
                   auto hooks = base;
                   hooks[0].eps_gamma = v[0];
                   hooks[1].eps_gamma = v[1];
                   hooks[0].eps_beta = v[2];
                   return mse_loss(net->forward_style_decode(latent, hooks), x);
                 };
                 return std::pair{ScalarFn(fn), in};
               },
               1e-4});
  return c;
}

}  // namespace

std::vector<OpGradientReport> run_gradient_suite(int trials) {
  std::vector<OpGradientReport> out;
  for (const auto& c : cases()) {
    OpGradientReport r{c.op, trials, 0.0};
    for (int t = 0; t < trials; ++t) {
      Rng rng(hash_combine(hash_string(c.op), static_cast<std::uint64_t>(t)));
      auto [fn, inputs] = c.make(rng);
      r.worst_relative_error = std::max(r.worst_relative_error, grad_check(fn, inputs, c.h).worst_relative_error);
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace compstyle::test
