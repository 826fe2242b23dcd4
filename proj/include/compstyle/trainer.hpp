// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "compstyle/adversarial.hpp"
#include "compstyle/augment.hpp"
#include "compstyle/corruption.hpp"
#include "compstyle/data.hpp"
#include "compstyle/segnet.hpp"

COMPSTYLE_NAMESPACE_BEGIN

enum class Method { baseline, mixstyle, dsu, maxstyle, compstyle };

std::string method_name(Method m);
Method parse_method(const std::string& s);

struct TrainConfig {
  Method method = Method::baseline;
  int epochs = 60;
  int batch_size = 8;
  double lr = 1e-3;
  AdversarialConfig adv;
  /// Run the adversarial branch for maxstyle/compstyle. Off, the loop
  /// reduces to the plain multi-task objective.
  bool adversarial_branch = true;
  MixConfig mix;
  int fractal_pool = 32;
  // Feature-statistics baselines (mixstyle, dsu).
  double style_alpha = 0.1;
  double style_p = 0.5;
  std::vector<int> style_stages{0, 1};
  double w_seg = 1.0;
  double w_rec = 1.0;
  std::uint64_t seed = 0;
  /// num_classes and seed are taken from the dataset and `seed` at train time.
  SegNetConfig arch;

  void validate() const;
};

/// Flat `key = value` text; '#' starts a comment. Unknown keys, repeated
/// keys and unparsable values throw ConfigError. `preset = long` (allowed
/// anywhere in the file) starts from the 600-epoch, batch-20 schedule.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);
/// Canonical text holding every key; parse_train_config inverts it.
std::string to_text(const TrainConfig& cfg);
/// 16 hex digits of a hash of to_text(cfg).
std::string config_hash(const TrainConfig& cfg);
TrainConfig long_schedule();

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean total loss over the epoch's batches
  double val_dice = 0.0;    // NaN without a validation split
};

struct TrainResult {
  SegNet model;  // best validation epoch, else the final weights
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  bool diverged = false;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

/// Trains on the train split of `data` and validates on its val split.
/// Bit-exact for a given (cfg, data). A non-finite loss stops training with
/// `diverged` set and the history so far kept.
TrainResult train(const TrainConfig& cfg, const Dataset& data, const EpochObserver& observer = {});

/// 2|A and B| / (|A| + |B|) for `label`; 1 when both are empty.
double dice_score(const IntTensor& pred, const IntTensor& truth, int label);

/// Label maps [N,H,W] for images [N,1,H,W].
using Predictor = std::function<IntTensor(const Tensor& images)>;
Predictor model_predictor(const SegNet& model);

inline constexpr int kMeanLabel = -1;  // row holding the mean over foreground labels

struct DiceRow {
  std::string method;
  std::string group;  // "domain<id>", "iid", "ood_mean", "clean", "<kind>@<severity>"
  int label = kMeanLabel;
  double dice = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;

  bool operator==(const DiceRow&) const = default;
};

struct ReportMeta {
  std::string method = "model";
  std::uint64_t seed = 0;
  std::string config_hash = "-";
};

struct DiceReport {
  std::vector<DiceRow> rows;

  /// Throws ConfigError when the row is missing.
  double value(const std::string& group, int label = kMeanLabel) const;
  bool has(const std::string& group, int label = kMeanLabel) const;
  double ood_mean() const { return value("ood_mean"); }
  double iid() const { return value("iid"); }
  /// Appends rows of another report.
  void merge(const DiceReport& other);
};

/// Per-sample DICE averaged over each test domain, per foreground label and
/// their mean. The training domain (the domain of the train split, else 0)
/// gives "iid"; the others give "ood_mean".
DiceReport evaluate_domains(const Predictor& predict, const Dataset& data, const ReportMeta& meta = {});
DiceReport evaluate_domains(const SegNet& model, const Dataset& data, const ReportMeta& meta = {});

/// DICE on the training-domain test split, clean ("clean") and under each
/// corruption. Each image gets its own corruption seed derived from spec.seed.
DiceReport evaluate_corruptions(const Predictor& predict, const Dataset& data, const std::vector<CorruptionSpec>& specs,
                                const ReportMeta& meta = {});
DiceReport evaluate_corruptions(const SegNet& model, const Dataset& data, const std::vector<CorruptionSpec>& specs,
                                const ReportMeta& meta = {});

std::string corruption_group(const CorruptionSpec& spec);

/// CSV with header method,group,label,dice,seed,config_hash. DICE values are
/// printed with 17 significant digits so reading and writing is lossless.
void write_report(std::ostream& os, const DiceReport& report);
DiceReport read_report(std::istream& is);
void save_report(const std::filesystem::path& path, const DiceReport& report);
DiceReport load_report(const std::filesystem::path& path);

COMPSTYLE_NAMESPACE_END
