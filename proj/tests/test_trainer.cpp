// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "compstyle/error.hpp"
#include "compstyle/io.hpp"
#include "compstyle/trainer.hpp"
#include "support/test_util.hpp"

using namespace compstyle;

namespace {

Dataset tiny_data(int num_classes = 2, std::uint64_t seed = 1) {
  SynthConfig cfg;
  cfg.size = 16;
  cfg.num_classes = num_classes;
  cfg.n_train = 6;
  cfg.n_val = 3;
  cfg.n_test = 3;
  cfg.seed = seed;
  return generate_dataset(cfg, default_domains());
}

TrainConfig tiny_config(Method m) {
  TrainConfig c;
  c.method = m;
  c.epochs = 2;
  c.batch_size = 3;
  c.arch.base_width = 4;
  c.arch.depth = 2;
  c.adv.iters = 1;
  c.fractal_pool = 2;
  c.seed = 5;
  return c;
}

bool same_weights(const SegNet& a, const SegNet& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (encode_tensor(pa[i]) != encode_tensor(pb[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("dice_score closed forms") {
  IntTensor a{{2, 2}, {1, 1, 0, 0}};
  IntTensor b{{2, 2}, {0, 0, 1, 1}};
  IntTensor c{{2, 2}, {1, 0, 1, 0}};
  IntTensor empty{{2, 2}, {0, 0, 0, 0}};
  CHECK(dice_score(a, a, 1) == 1.0);
  CHECK(dice_score(a, b, 1) == 0.0);
  CHECK(dice_score(a, c, 1) == doctest::Approx(0.5));
  CHECK(dice_score(empty, empty, 1) == 1.0);
  CHECK(dice_score(empty, a, 1) == 0.0);
  CHECK_THROWS_AS(dice_score(a, IntTensor{{4}, {0, 0, 0, 0}}, 1), DimensionError);
}

TEST_CASE("config text round-trips") {
  TrainConfig c;
  c.method = Method::compstyle;
  c.lr = 3.3e-4;
  c.style_stages = {0, 2};
  c.mix.mode_probs = {0.25, 0.75};
  c.seed = 123456789012345ull;
  const std::string text = to_text(c);
  const TrainConfig back = parse_train_config(text);
  CHECK(to_text(back) == text);
  CHECK(config_hash(back) == config_hash(c));
  c.lr = 1e-3;
  CHECK(config_hash(back) != config_hash(c));
}

TEST_CASE("config parsing rules") {
  const auto cfg = parse_train_config("# comment\nmethod = dsu\n\nepochs=3  # trailing\narch.base_width = 8\n");
  CHECK(cfg.method == Method::dsu);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.arch.base_width == 8);
  const auto long_cfg = parse_train_config("method = compstyle\npreset = long\n");
  CHECK(long_cfg.epochs == 600);
  CHECK(long_cfg.batch_size == 20);
  CHECK(long_cfg.method == Method::compstyle);
  CHECK_THROWS_AS(parse_train_config("nonsense = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("epochs = 1\nepochs = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("epochs = two\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("lr = 1e-3x\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("just a line\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("batch_size = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("w_rec = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("method = fancy\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("method = maxstyle\narch.aux_decoder = false\n"), ConfigError);
}

TEST_CASE("zero epochs returns the initial model") {
  const auto data = tiny_data();
  auto cfg = tiny_config(Method::baseline);
  cfg.epochs = 0;
  const auto r = train(cfg, data);
  CHECK(r.history.empty());
  CHECK(r.best_epoch == -1);
  const auto again = train(cfg, data);
  CHECK(same_weights(r.model, again.model));
}

TEST_CASE("training is bit-exact per seed for every method") {
  const auto data = tiny_data();
  for (Method m : {Method::baseline, Method::mixstyle, Method::dsu, Method::maxstyle, Method::compstyle}) {
    CAPTURE(method_name(m));
    const auto cfg = tiny_config(m);
    const auto a = train(cfg, data);
    const auto b = train(cfg, data);
    REQUIRE(a.history.size() == 2);
    CHECK_FALSE(a.diverged);
    CHECK(same_weights(a.model, b.model));
    for (std::size_t e = 0; e < a.history.size(); ++e) {
      CHECK(std::isfinite(a.history[e].train_loss));
      CHECK(a.history[e].train_loss == b.history[e].train_loss);
      CHECK(a.history[e].val_dice == b.history[e].val_dice);
    }
    auto other = cfg;
    other.seed = 6;
    CHECK_FALSE(same_weights(a.model, train(other, data).model));
  }
}

TEST_CASE("disabled adversarial branch reproduces the baseline") {
  const auto data = tiny_data();
  auto base = tiny_config(Method::baseline);
  base.w_rec = 0;
  auto comp = base;
  comp.method = Method::compstyle;
  comp.adversarial_branch = false;
  comp.mix.p_apply = 0;
  comp.mix.noise_std = 0;
  const auto a = train(base, data);
  const auto b = train(comp, data);
  CHECK(same_weights(a.model, b.model));
  for (std::size_t e = 0; e < a.history.size(); ++e) CHECK(a.history[e].train_loss == b.history[e].train_loss);
}

TEST_CASE("divergence stops training and keeps the history") {
  auto data = tiny_data();
  auto cfg = tiny_config(Method::baseline);
  cfg.epochs = 6;
  // A poisoned pixel makes the loss non-finite on the first batch that holds it.
  data.samples[data.select(Split::train).back()].image.data()[0] = std::nan("");
  const auto r = train(cfg, data);
  CHECK(r.diverged);
  CHECK(r.history.empty());
  CHECK(r.best_epoch == -1);
}

TEST_CASE("train preconditions") {
  auto data = tiny_data();
  auto cfg = tiny_config(Method::baseline);
  Dataset test_only = generate_dataset(2, default_domains(), 16, 2, 0);
  CHECK_THROWS_AS(train(cfg, test_only), ConfigError);
  cfg.batch_size = 1;
  CHECK_THROWS_AS(train(cfg, data), ConfigError);
}

TEST_CASE("oracle and constant predictors") {
  for (int k : {2, 4}) {
    const auto data = tiny_data(k);
    // Replays the true masks in evaluation order: test domains ascending,
    // then the training-domain test split once per corruption report group.
    std::vector<IntTensor> expected;
    for (int d : data.domains(Split::test))
      for (const auto& smp : data.subset(Split::test, d)) expected.push_back(smp.mask);
    std::size_t cursor = 0;
    const Predictor oracle = [&](const Tensor& images) {
      IntTensor out{{images.dim(0), images.dim(2), images.dim(3)}, {}};
      for (std::int64_t n = 0; n < images.dim(0); ++n) {
        REQUIRE(cursor < expected.size());
        const auto& m = expected[cursor++];
        out.data.insert(out.data.end(), m.data.begin(), m.data.end());
      }
      return out;
    };
    const auto r = evaluate_domains(oracle, data);
    for (const auto& row : r.rows) CHECK(row.dice == 1.0);
    CHECK(r.ood_mean() == 1.0);

    const Predictor background = [](const Tensor& images) {
      return IntTensor::zeros({images.dim(0), images.dim(2), images.dim(3)});
    };
    const auto z = evaluate_domains(background, data);
    for (const auto& row : z.rows) CHECK(row.dice == 0.0);

    CHECK(cursor == expected.size());

    std::vector<CorruptionSpec> specs;
    for (auto kind : kAllCorruptions) {
      CorruptionSpec spec;
      spec.kind = kind;
      spec.severity = 0.5;
      specs.push_back(spec);
    }
    expected.clear();
    cursor = 0;
    for (std::size_t g = 0; g <= specs.size(); ++g)
      for (const auto& smp : data.subset(Split::test, 0)) expected.push_back(smp.mask);
    const auto c = evaluate_corruptions(oracle, data, specs);
    for (const auto& row : c.rows) CHECK(row.dice == 1.0);
    CHECK(c.has("spike@0.5"));
    CHECK(cursor == expected.size());
  }
}

TEST_CASE("report aggregation and schema") {
  const auto data = tiny_data(4);
  auto cfg = tiny_config(Method::baseline);
  cfg.epochs = 1;
  const auto model = train(cfg, data).model;
  const ReportMeta meta{"baseline", cfg.seed, config_hash(cfg)};
  const auto r = evaluate_domains(model, data, meta);
  double sum = 0;
  for (int d = 1; d < 7; ++d) sum += r.value("domain" + std::to_string(d));
  CHECK(std::abs(sum / 6 - r.ood_mean()) <= 1e-9);
  CHECK(r.iid() == r.value("domain0"));
  for (const auto& row : r.rows) {
    CHECK(row.dice >= 0.0);
    CHECK(row.dice <= 1.0);
    CHECK(row.method == "baseline");
  }
  // Mean row is the average of the per-label rows.
  const double m = (r.value("domain3", 1) + r.value("domain3", 2) + r.value("domain3", 3)) / 3;
  CHECK(std::abs(m - r.value("domain3")) <= 1e-12);

  std::stringstream first;
  write_report(first, r);
  const auto back = read_report(first);
  CHECK(back.rows == r.rows);
  std::stringstream second;
  write_report(second, back);
  CHECK(first.str() == second.str());
}

TEST_CASE("severity zero corruption reports equal the clean report") {
  const auto data = tiny_data(4);
  auto cfg = tiny_config(Method::baseline);
  cfg.epochs = 1;
  const auto model = train(cfg, data).model;
  std::vector<CorruptionSpec> specs;
  for (auto kind : kAllCorruptions) {
    CorruptionSpec spec;
    spec.kind = kind;
    spec.seed = 9;
    specs.push_back(spec);
  }
  const auto r = evaluate_corruptions(model, data, specs);
  for (auto kind : kAllCorruptions)
    for (int l : {1, 2, 3, kMeanLabel})
      CHECK(std::abs(r.value(std::string(corruption_name(kind)) + "@0", l) - r.value("clean", l)) <= 1e-6);
}

TEST_CASE("report reader rejects malformed input") {
  auto parse = [](const std::string& s) {
    std::stringstream ss(s);
    return read_report(ss);
  };
  CHECK_THROWS_AS(parse(""), FormatError);
  CHECK_THROWS_AS(parse("method,group\n"), FormatError);
  const std::string h = "method,group,label,dice,seed,config_hash\n";
  CHECK_THROWS_AS(parse(h + "a,b,1,0.5,0\n"), FormatError);
  CHECK_THROWS_AS(parse(h + "a,b,x,0.5,0,h\n"), FormatError);
  CHECK_THROWS_AS(parse(h + "a,b,1,1.5,0,h\n"), FormatError);
  CHECK_THROWS_AS(parse(h + "a,b,1,0.5,0,h,\n"), FormatError);
  CHECK(parse(h + "a,b,mean,0.5,0,h\n").value("b") == 0.5);
  DiceReport bad;
  bad.rows.push_back({"a,b", "g", 1, 0.5, 0, "h"});
  std::stringstream out;
  CHECK_THROWS_AS(write_report(out, bad), FormatError);
}

TEST_CASE("evaluation needs samples") {
  const auto data = tiny_data();
  Dataset no_test;
  no_test.num_classes = 2;
  for (auto i : data.select(Split::train)) {
    no_test.samples.push_back(data.samples[i]);
    no_test.splits.push_back(Split::train);
  }
  const auto model = train(tiny_config(Method::baseline), data).model;
  CHECK_THROWS_AS(evaluate_domains(model, no_test), ConfigError);
  CHECK_THROWS_AS(evaluate_corruptions(model, no_test, {}), ConfigError);
}
