// SPDX-License-Identifier: Apache-2.0
#include "compstyle/adversarial.hpp"

#include <algorithm>
#include <cmath>

#include "compstyle/error.hpp"
#include "compstyle/ops.hpp"

COMPSTYLE_NAMESPACE_BEGIN

namespace {

constexpr double kLambdaMargin = 1e-4;

// Optimisation variables for one hook.
struct HookState {
  std::vector<Real> logits;
  std::vector<Real> eps_gamma;
  std::vector<Real> eps_beta;
  std::vector<int> perm;
  std::int64_t channels = 0;
};

struct Leaves {
  std::vector<Tensor> logits, eps_gamma, eps_beta;
  std::vector<StyleHookParams> hooks;
};

Leaves make_leaves(const std::vector<HookState>& states, std::int64_t batch, bool requires_grad) {
  Leaves l;
  for (const HookState& s : states) {
    l.logits.push_back(Tensor::from({batch}, s.logits, requires_grad));
    l.eps_gamma.push_back(Tensor::from({batch, s.channels}, s.eps_gamma, requires_grad));
    l.eps_beta.push_back(Tensor::from({batch, s.channels}, s.eps_beta, requires_grad));
    l.hooks.push_back({sigmoid(l.logits.back()), s.perm, l.eps_gamma.back(), l.eps_beta.back()});
  }
  return l;
}

Real sign(Real g) { return g > 0 ? Real(1) : (g < 0 ? Real(-1) : Real(0)); }

std::vector<StyleHookParams> detached_hooks(const std::vector<HookState>& states, std::int64_t batch) {
  NoGradGuard no_grad;
  Leaves l = make_leaves(states, batch, false);
  for (auto& h : l.hooks) h.lambda = h.lambda.detach();
  return l.hooks;
}

}  // namespace

Tensor segmentation_loss(const Tensor& logits, const IntTensor& labels) {
  return add(softmax_ce_loss(logits, labels), soft_dice_loss(logits, labels));
}

void AdversarialConfig::validate() const {
  if (iters < 1) throw ConfigError("adversarial iterations must be >= 1");
  if (!(step >= 0.0)) throw ConfigError("adversarial step must be >= 0");
  if (!(lambda_alpha > 0.0)) throw ConfigError("lambda alpha must be > 0");
  if (!(eps_clip > 0.0)) throw ConfigError("eps clip must be > 0");
}

AdversarialResult adversarial_style_search(const SegNet& model, const SegBatch& batch, const AdversarialConfig& cfg,
                                           Rng& rng) {
  cfg.validate();
  if (!model.has_aux_decoder()) throw ConfigError("adversarial style search needs the auxiliary decoder");
  const std::int64_t b = batch.size();
  if (b < 2) throw InsufficientBatchError("adversarial style search needs a batch of at least 2");

  const SegNet net = model.frozen();
  Tensor latent;
  {
    NoGradGuard no_grad;
    latent = net.encode(batch.images);
  }

  std::vector<HookState> states;
  for (std::int64_t c : net.hook_channels()) {
    const StyleHookParams init = random_hook(b, c, rng, cfg.lambda_alpha);
    HookState s;
    s.channels = c;
    s.perm = init.perm;
    for (Real v : init.lambda.data()) {
      const double lam = std::clamp(static_cast<double>(v), kLambdaMargin, 1.0 - kLambdaMargin);
      s.logits.push_back(static_cast<Real>(std::log(lam / (1.0 - lam))));
    }
    for (Real v : init.eps_gamma.data()) s.eps_gamma.push_back(std::clamp(v, Real(-cfg.eps_clip), Real(cfg.eps_clip)));
    for (Real v : init.eps_beta.data()) s.eps_beta.push_back(std::clamp(v, Real(-cfg.eps_clip), Real(cfg.eps_clip)));
    states.push_back(std::move(s));
  }

  AdversarialResult result;
  const auto clip = static_cast<Real>(cfg.eps_clip);
  const auto step = static_cast<Real>(cfg.step);
  std::vector<HookState> previous = states;
  for (int t = 0; t < cfg.iters; ++t) {
    Leaves leaves = make_leaves(states, b, true);
    const Tensor recon = net.forward_style_decode(latent, leaves.hooks);
    Tensor loss = segmentation_loss(net.forward_seg(recon), batch.masks);
    const double value = loss.item();
    if (t == 0) result.initial_loss = value;
    if (!std::isfinite(value)) {
      result.aborted = true;
      if (t > 0) {
        states = previous;
        --result.steps;
      }
      break;
    }
    loss.backward();
    std::vector<HookState> next = states;
    for (std::size_t h = 0; h < next.size(); ++h) {
      const auto update = [&](std::vector<Real>& v, const Tensor& leaf, bool clamp_to_clip) {
        if (!leaf.has_grad()) return;
        const auto g = leaf.grad();
        for (std::size_t i = 0; i < v.size(); ++i) {
          v[i] += step * sign(g[i]);
          if (clamp_to_clip) v[i] = std::clamp(v[i], -clip, clip);
        }
      };
      update(next[h].logits, leaves.logits[h], false);
      update(next[h].eps_gamma, leaves.eps_gamma[h], true);
      update(next[h].eps_beta, leaves.eps_beta[h], true);
    }
    previous = std::move(states);
    states = std::move(next);
    ++result.steps;
  }

  NoGradGuard no_grad;
  const auto evaluate = [&](const std::vector<HookState>& s, Tensor& styled) {
    styled = net.forward_style_decode(latent, detached_hooks(s, b));
    return segmentation_loss(net.forward_seg(styled), batch.masks).item();
  };
  Tensor styled;
  result.final_loss = evaluate(states, styled);
  if (!std::isfinite(result.final_loss) && !result.aborted && result.steps > 0) {
    result.aborted = true;
    states = previous;
    --result.steps;
    result.final_loss = evaluate(states, styled);
  }
  result.styled_images = styled.detach();
  result.params = detached_hooks(states, b);
  return result;
}

AdversarialResult adversarial_style_search(const SegNet& model, const SegBatch& batch, int iters, double step,
                                           Rng& rng) {
  AdversarialConfig cfg;
  cfg.iters = iters;
  cfg.step = step;
  return adversarial_style_search(model, batch, cfg, rng);
}

COMPSTYLE_NAMESPACE_END
