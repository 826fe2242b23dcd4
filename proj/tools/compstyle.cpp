// SPDX-License-Identifier: Apache-2.0
// Command-line front end: corpus generation, augmentation previews,
// corruption, training and evaluation.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "compstyle/augment.hpp"
#include "compstyle/corruption.hpp"
#include "compstyle/data.hpp"
#include "compstyle/error.hpp"
#include "compstyle/fractal.hpp"
#include "compstyle/io.hpp"
#include "compstyle/segnet.hpp"
#include "compstyle/trainer.hpp"

namespace fs = std::filesystem;
using namespace compstyle;

namespace {

std::string numbered(const std::string& stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu%s", stem.c_str(), i, ext);
  return buf;
}

std::vector<fs::path> cstn_inputs(const fs::path& in) {
  if (!fs::is_directory(in)) return {in};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in))
    if (e.is_regular_file() && e.path().extension() == ".cstn") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

// The method recorded next to a checkpoint by `train`, if any.
ReportMeta meta_for(const fs::path& checkpoint) {
  ReportMeta meta;
  const fs::path cfg_path = checkpoint / "train_config.txt";
  if (fs::exists(cfg_path)) {
    const TrainConfig cfg = load_train_config(cfg_path);
    meta.method = method_name(cfg.method);
    meta.seed = cfg.seed;
    meta.config_hash = config_hash(cfg);
  }
  return meta;
}

int run_fractal_gen(int n, std::int64_t size, std::uint64_t seed, const fs::path& out, bool pgm) {
  fs::create_directories(out);
  const auto pool = sample_pool(n, size, seed);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    save_tensor(out / numbered("fractal", i, ".cstn"), pool[i]);
    if (pgm) save_pgm(out / numbered("fractal", i, ".pgm"), pool[i]);
  }
  std::cout << "wrote " << pool.size() << " fractals to " << out << "\n";
  return 0;
}

int run_augment_preview(const fs::path& manifest, const fs::path& pool_dir, const fs::path& config, const fs::path& out,
                        int count, std::uint64_t seed) {
  const Dataset data = load_dataset(manifest);
  std::vector<Tensor> pool;
  for (const auto& f : cstn_inputs(pool_dir)) pool.push_back(load_tensor(f));
  if (pool.empty()) throw ConfigError("no fractal tensors in " + pool_dir.string());
  const MixConfig mix = config.empty() ? MixConfig{} : load_train_config(config).mix;
  auto idx = data.select(Split::train);
  if (idx.empty())
    for (std::size_t i = 0; i < data.size(); ++i) idx.push_back(i);
  idx.resize(std::min(idx.size(), static_cast<std::size_t>(std::max(count, 2))));
  const SegBatch before = make_batch(data.samples, idx);
  Rng rng(seed);
  const SegBatch after = apply_pipeline(before, pool, mix, rng);
  fs::create_directories(out);
  const std::int64_t h = before.images.dim(2), w = before.images.dim(3);
  for (std::int64_t n = 0; n < before.size(); ++n) {
    auto pick = [&](const Tensor& t) {
      const auto first = t.data().begin() + n * h * w;
      return Tensor::from({h, w}, std::vector<Real>(first, first + h * w));
    };
    save_pgm(out / numbered("before", static_cast<std::size_t>(n), ".pgm"), pick(before.images));
    save_pgm(out / numbered("after", static_cast<std::size_t>(n), ".pgm"), pick(after.images));
  }
  std::cout << "wrote " << before.size() << " before/after pairs to " << out << "\n";
  return 0;
}

int run_corrupt(const std::string& kind, double severity, std::uint64_t seed, const fs::path& in, const fs::path& out) {
  CorruptionSpec spec;
  spec.kind = parse_corruption(kind);
  spec.severity = severity;
  fs::create_directories(out);
  const auto files = cstn_inputs(in);
  for (std::size_t i = 0; i < files.size(); ++i) {
    spec.seed = hash_combine(seed, i);
    const Tensor result = corrupt(load_tensor(files[i]), spec);
    const std::string stem = files[i].stem().string();
    save_tensor(out / (stem + ".cstn"), result);
    save_pgm(out / (stem + ".pgm"), result);
  }
  std::cout << "corrupted " << files.size() << " images into " << out << "\n";
  return 0;
}

int run_synth(const fs::path& out, const std::string& preset, std::uint64_t seed, std::int64_t size, int n_train,
              int n_val, int n_test) {
  SynthConfig cfg = preset_config(preset);
  cfg.seed = seed;
  if (size > 0) cfg.size = size;
  if (n_train >= 0) cfg.n_train = n_train;
  if (n_val >= 0) cfg.n_val = n_val;
  if (n_test >= 0) cfg.n_test = n_test;
  const Dataset data = generate_dataset(cfg, default_domains());
  const auto manifest = save_dataset(out, data);
  std::cout << "wrote " << data.size() << " samples, manifest " << manifest << "\n";
  return 0;
}

int run_train(const fs::path& config, const fs::path& manifest, const fs::path& out, int adv_iters) {
  TrainConfig cfg = load_train_config(config);
  if (adv_iters > 0) cfg.adv.iters = adv_iters;
  const Dataset data = load_dataset(manifest);
  fs::create_directories(out);
  std::ofstream history(out / "history.csv", std::ios::binary);
  history << "epoch,train_loss,val_dice\n";
  const TrainResult r = train(cfg, data, [&](const EpochRecord& e) {
    char line[128];
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_dice);
    history << line << std::flush;
    std::printf("epoch %3d  loss %.4f  val dice %.4f\n", e.epoch, e.train_loss, e.val_dice);
    std::fflush(stdout);
  });
  const fs::path ckpt = out / "checkpoint";
  save_checkpoint(r.model, ckpt);
  std::ofstream(ckpt / "train_config.txt", std::ios::binary) << to_text(cfg);
  if (r.diverged) {
    std::cerr << "training diverged after " << r.history.size() << " epochs; best checkpoint kept\n";
    return 3;
  }
  std::cout << "best epoch " << r.best_epoch << ", checkpoint " << ckpt << "\n";
  return 0;
}

int run_eval(const fs::path& checkpoint, const fs::path& manifest, const fs::path& report) {
  const SegNet model = load_checkpoint(checkpoint);
  const Dataset data = load_dataset(manifest);
  const DiceReport r = evaluate_domains(model, data, meta_for(checkpoint));
  save_report(report, r);
  std::printf("iid %.4f", r.iid());
  if (r.has("ood_mean")) std::printf("  ood mean %.4f", r.ood_mean());
  std::printf("\n");
  return 0;
}

int run_eval_corrupt(const fs::path& checkpoint, const fs::path& manifest, const std::vector<double>& severities,
                     std::uint64_t seed, const fs::path& report) {
  const SegNet model = load_checkpoint(checkpoint);
  const Dataset data = load_dataset(manifest);
  std::vector<CorruptionSpec> specs;
  for (double s : severities)
    for (CorruptionKind k : kAllCorruptions) {
      CorruptionSpec spec;
      spec.kind = k;
      spec.severity = s;
      spec.seed = seed;
      specs.push_back(spec);
    }
  const DiceReport r = evaluate_corruptions(model, data, specs, meta_for(checkpoint));
  save_report(report, r);
  std::printf("clean %.4f\n", r.value("clean"));
  for (const auto& spec : specs) std::printf("%-16s %.4f\n", corruption_group(spec).c_str(), r.value(corruption_group(spec)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractal mixing and adversarial style augmentation for segmentation"};
  app.require_subcommand(1);

  int n = 16;
  std::int64_t size = 64, synth_size = 0;
  std::uint64_t seed = 0;
  std::string out, in, data, config, pool, checkpoint, report, kind, preset = "default";
  bool pgm = false;
  double severity = 0.5;
  int count = 8, adv_iters = 0, n_train = -1, n_val = -1, n_test = -1;
  std::vector<double> severities{0.25, 0.5, 0.75};

  auto* fractal = app.add_subcommand("fractal-gen", "Sample a pool of random IFS fractals");
  fractal->add_option("--n", n, "Number of fractals")->check(CLI::PositiveNumber);
  fractal->add_option("--size", size, "Image side (power of two)");
  fractal->add_option("--seed", seed);
  fractal->add_option("--out", out)->required();
  fractal->add_flag("--pgm", pgm, "Also write PGM previews");

  auto* preview = app.add_subcommand("augment-preview", "Dump before/after PGM pairs of the mixing pipeline");
  preview->add_option("--dataset", data, "Dataset manifest")->required()->check(CLI::ExistingFile);
  preview->add_option("--pool", pool, "Directory of fractal CSTN files")->required()->check(CLI::ExistingDirectory);
  preview->add_option("--config", config, "Config file with mix.* keys")->check(CLI::ExistingFile);
  preview->add_option("--out", out)->required();
  preview->add_option("--count", count, "Samples to preview");
  preview->add_option("--seed", seed);

  auto* corrupt_cmd = app.add_subcommand("corrupt", "Apply a simulated MRI artifact");
  corrupt_cmd->add_option("--kind", kind, "bias, spike, ghosting or motion")->required();
  corrupt_cmd->add_option("--severity", severity)->required();
  corrupt_cmd->add_option("--seed", seed);
  corrupt_cmd->add_option("--in", in, "CSTN file or directory")->required()->check(CLI::ExistingPath);
  corrupt_cmd->add_option("--out", out)->required();

  auto* synth = app.add_subcommand("synth-data", "Generate the synthetic multi-domain corpus");
  synth->add_option("--out", out)->required();
  synth->add_option("--preset", preset, "default or cardiac");
  synth->add_option("--seed", seed);
  synth->add_option("--size", synth_size, "Image side override");
  synth->add_option("--n-train", n_train);
  synth->add_option("--n-val", n_val);
  synth->add_option("--n-test", n_test);

  auto* train_cmd = app.add_subcommand("train", "Train a segmentation network");
  train_cmd->add_option("--config", config)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--data", data)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out)->required();
  train_cmd->add_option("--adv-iters", adv_iters, "Override the adversarial iteration count");

  auto* eval = app.add_subcommand("eval", "Per-domain DICE report");
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--data", data)->required()->check(CLI::ExistingFile);
  eval->add_option("--report", report)->required();

  auto* eval_corrupt = app.add_subcommand("eval-corrupt", "DICE under each corruption kind and severity");
  eval_corrupt->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingDirectory);
  eval_corrupt->add_option("--data", data)->required()->check(CLI::ExistingFile);
  eval_corrupt->add_option("--severities", severities)->delimiter(',');
  eval_corrupt->add_option("--seed", seed);
  eval_corrupt->add_option("--report", report)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fractal) return run_fractal_gen(n, size, seed, out, pgm);
    if (*preview) return run_augment_preview(data, pool, config, out, count, seed);
    if (*corrupt_cmd) return run_corrupt(kind, severity, seed, in, out);
    if (*synth) return run_synth(out, preset, seed, synth_size, n_train, n_val, n_test);
    if (*train_cmd) return run_train(config, data, out, adv_iters);
    if (*eval) return run_eval(checkpoint, data, report);
    if (*eval_corrupt) return run_eval_corrupt(checkpoint, data, severities, seed, report);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
