// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "compstyle/rng.hpp"
#include "compstyle/sample.hpp"
#include "compstyle/segnet.hpp"
#include "compstyle/style.hpp"

COMPSTYLE_NAMESPACE_BEGIN

/// Cross-entropy plus soft Dice.
Tensor segmentation_loss(const Tensor& logits, const IntTensor& labels);

struct AdversarialConfig {
  int iters = 5;
  double step = 0.1;
  double lambda_alpha = 0.1;  // lambda ~ Beta(alpha, alpha) at initialisation
  double eps_clip = 3.0;

  void validate() const;
};

struct AdversarialResult {
  Tensor styled_images;                  // [N,1,H,W], detached
  std::vector<StyleHookParams> params;   // one per style hook, detached
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps = 0;                         // ascent steps actually applied
  bool aborted = false;                  // a non-finite loss stopped the ascent
};

/// Sign-gradient ascent on the lambda logits and style noise of every style
/// hook, maximising the segmentation loss of the model on its own styled
/// reconstruction. Model parameters and their gradients are left untouched.
/// Needs a model with the auxiliary decoder and a batch of at least 2.
AdversarialResult adversarial_style_search(const SegNet& model, const SegBatch& batch, const AdversarialConfig& cfg,
                                           Rng& rng);
AdversarialResult adversarial_style_search(const SegNet& model, const SegBatch& batch, int iters, double step,
                                           Rng& rng);

COMPSTYLE_NAMESPACE_END
