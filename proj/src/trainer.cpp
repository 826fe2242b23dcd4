// SPDX-License-Identifier: Apache-2.0
#include "compstyle/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "compstyle/error.hpp"
#include "compstyle/fractal.hpp"
#include "compstyle/ops.hpp"
#include "compstyle/optim.hpp"
#include "compstyle/rng.hpp"
#include "compstyle/style.hpp"

COMPSTYLE_NAMESPACE_BEGIN

// ---------------------------------------------------------------- config

std::string method_name(Method m) {
  switch (m) {
    case Method::baseline: return "baseline";
    case Method::mixstyle: return "mixstyle";
    case Method::dsu: return "dsu";
    case Method::maxstyle: return "maxstyle";
    case Method::compstyle: return "compstyle";
  }
  throw ConfigError("unknown method");
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::baseline, Method::mixstyle, Method::dsu, Method::maxstyle, Method::compstyle})
    if (method_name(m) == s) return m;
  throw ConfigError("unknown method '" + s + "'");
}

namespace {

bool uses_adversary(Method m) { return m == Method::maxstyle || m == Method::compstyle; }

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  return out;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size())
    throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int<int>(key, trim(item)));
  return out;
}

using Setter = void (*)(TrainConfig&, const std::string& key, const std::string& value);
using Getter = std::string (*)(const TrainConfig&);

struct Field {
  const char* key;
  Setter set;
  Getter get;
};

// clang-format off
const Field kFields[] = {
  {"method", [](TrainConfig& c, const std::string&, const std::string& v) { c.method = parse_method(v); },
   [](const TrainConfig& c) { return method_name(c.method); }},
  {"epochs", [](TrainConfig& c, const std::string& k, const std::string& v) { c.epochs = parse_int<int>(k, v); },
   [](const TrainConfig& c) { return std::to_string(c.epochs); }},
  {"batch_size", [](TrainConfig& c, const std::string& k, const std::string& v) { c.batch_size = parse_int<int>(k, v); },
   [](const TrainConfig& c) { return std::to_string(c.batch_size); }},
  {"lr", [](TrainConfig& c, const std::string& k, const std::string& v) { c.lr = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.lr); }},
  {"adv_iters", [](TrainConfig& c, const std::string& k, const std::string& v) { c.adv.iters = parse_int<int>(k, v); },
   [](const TrainConfig& c) { return std::to_string(c.adv.iters); }},
  {"adv_step", [](TrainConfig& c, const std::string& k, const std::string& v) { c.adv.step = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.adv.step); }},
  {"adv_lambda_alpha", [](TrainConfig& c, const std::string& k, const std::string& v) { c.adv.lambda_alpha = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.adv.lambda_alpha); }},
  {"adv_eps_clip", [](TrainConfig& c, const std::string& k, const std::string& v) { c.adv.eps_clip = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.adv.eps_clip); }},
  {"adversarial_branch", [](TrainConfig& c, const std::string& k, const std::string& v) { c.adversarial_branch = parse_bool(k, v); },
   [](const TrainConfig& c) { return std::string(c.adversarial_branch ? "true" : "false"); }},
  {"mix.p_apply", [](TrainConfig& c, const std::string& k, const std::string& v) { c.mix.p_apply = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.mix.p_apply); }},
  {"mix.intensity_max", [](TrainConfig& c, const std::string& k, const std::string& v) { c.mix.intensity_max = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.mix.intensity_max); }},
  {"mix.p_additive", [](TrainConfig& c, const std::string& k, const std::string& v) {
     const double p = parse_double(k, v);
     c.mix.mode_probs = {p, 1.0 - p};
   },
   [](const TrainConfig& c) { return format_double(c.mix.mode_probs[0]); }},
  {"mix.noise_std", [](TrainConfig& c, const std::string& k, const std::string& v) { c.mix.noise_std = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.mix.noise_std); }},
  {"mix.rotate", [](TrainConfig& c, const std::string& k, const std::string& v) { c.mix.traditional.rotate = parse_bool(k, v); },
   [](const TrainConfig& c) { return std::string(c.mix.traditional.rotate ? "true" : "false"); }},
  {"mix.contrast_lo", [](TrainConfig& c, const std::string& k, const std::string& v) { c.mix.traditional.contrast_lo = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.mix.traditional.contrast_lo); }},
  {"mix.contrast_hi", [](TrainConfig& c, const std::string& k, const std::string& v) { c.mix.traditional.contrast_hi = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.mix.traditional.contrast_hi); }},
  {"mix.min_crop_area", [](TrainConfig& c, const std::string& k, const std::string& v) { c.mix.traditional.min_crop_area = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.mix.traditional.min_crop_area); }},
  {"fractal_pool", [](TrainConfig& c, const std::string& k, const std::string& v) { c.fractal_pool = parse_int<int>(k, v); },
   [](const TrainConfig& c) { return std::to_string(c.fractal_pool); }},
  {"style_alpha", [](TrainConfig& c, const std::string& k, const std::string& v) { c.style_alpha = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.style_alpha); }},
  {"style_p", [](TrainConfig& c, const std::string& k, const std::string& v) { c.style_p = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.style_p); }},
  {"style_stages", [](TrainConfig& c, const std::string& k, const std::string& v) { c.style_stages = parse_int_list(k, v); },
   [](const TrainConfig& c) {
     std::string s;
     for (std::size_t i = 0; i < c.style_stages.size(); ++i) s += (i ? "," : "") + std::to_string(c.style_stages[i]);
     return s;
   }},
  {"w_seg", [](TrainConfig& c, const std::string& k, const std::string& v) { c.w_seg = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.w_seg); }},
  {"w_rec", [](TrainConfig& c, const std::string& k, const std::string& v) { c.w_rec = parse_double(k, v); },
   [](const TrainConfig& c) { return format_double(c.w_rec); }},
  {"seed", [](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = parse_int<std::uint64_t>(k, v); },
   [](const TrainConfig& c) { return std::to_string(c.seed); }},
  {"arch.base_width", [](TrainConfig& c, const std::string& k, const std::string& v) { c.arch.base_width = parse_int<int>(k, v); },
   [](const TrainConfig& c) { return std::to_string(c.arch.base_width); }},
  {"arch.depth", [](TrainConfig& c, const std::string& k, const std::string& v) { c.arch.depth = parse_int<int>(k, v); },
   [](const TrainConfig& c) { return std::to_string(c.arch.depth); }},
  {"arch.aux_decoder", [](TrainConfig& c, const std::string& k, const std::string& v) { c.arch.aux_decoder = parse_bool(k, v); },
   [](const TrainConfig& c) { return std::string(c.arch.aux_decoder ? "true" : "false"); }},
};
// clang-format on

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(w_seg >= 0.0) || !(w_rec >= 0.0)) throw ConfigError("loss weights must be >= 0");
  if (!(style_alpha > 0.0)) throw ConfigError("style_alpha must be > 0");
  if (!(style_p >= 0.0 && style_p <= 1.0)) throw ConfigError("style_p must lie in [0,1]");
  if (fractal_pool < 1) throw ConfigError("fractal_pool must be >= 1");
  for (int s : style_stages)
    if (s < 0) throw ConfigError("style stages must be >= 0");
  adv.validate();
  mix.validate();
  SegNetConfig a = arch;
  a.num_classes = std::max(a.num_classes, 2);
  a.validate();
  if (uses_adversary(method) && adversarial_branch && !arch.aux_decoder)
    throw ConfigError(method_name(method) + " needs the auxiliary decoder");
}

TrainConfig long_schedule() {
  TrainConfig c;
  c.epochs = 600;
  c.batch_size = 20;
  return c;
}

TrainConfig parse_train_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  TrainConfig cfg;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' appears twice");
    if (key == "preset") {
      if (value == "long")
        cfg = long_schedule();
      else if (value != "desk")
        throw ConfigError("unknown preset '" + value + "'");
      continue;
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  for (const auto& [key, value] : entries) {
    const Field* field = nullptr;
    for (const Field& f : kFields)
      if (key == f.key) field = &f;
    if (!field) throw ConfigError("unknown config key '" + key + "'");
    field->set(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

std::string to_text(const TrainConfig& cfg) {
  std::string out;
  for (const Field& f : kFields) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

std::string config_hash(const TrainConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(mix64(hash_string(to_text(cfg)))));
  return buf;
}

// ---------------------------------------------------------------- metrics

double dice_score(const IntTensor& pred, const IntTensor& truth, int label) {
  if (pred.shape != truth.shape)
    throw DimensionError("dice_score: " + shape_string(pred.shape) + " vs " + shape_string(truth.shape));
  std::int64_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] == label, t = truth.data[i] == label;
    a += p;
    b += t;
    both += p && t;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

Predictor model_predictor(const SegNet& model) {
  // The predictor keeps its own copy of the weights.
  return [net = model.frozen()](const Tensor& images) {
    NoGradGuard no_grad;
    return argmax_channels(net.forward_seg(images));
  };
}

namespace {

constexpr std::size_t kEvalChunk = 16;

struct LabelScores {
  std::vector<double> per_label;  // index l-1 for foreground label l
  double mean = 0.0;
};

// Per-sample DICE for each foreground label, averaged over samples.
LabelScores score_samples(const Predictor& predict, const std::vector<SegSample>& samples, int num_classes) {
  if (samples.empty()) throw ConfigError("cannot score an empty split");
  LabelScores s;
  s.per_label.assign(static_cast<std::size_t>(num_classes - 1), 0.0);
  for (std::size_t start = 0; start < samples.size(); start += kEvalChunk) {
    const std::size_t stop = std::min(samples.size(), start + kEvalChunk);
    const SegBatch batch = make_batch(std::span(samples).subspan(start, stop - start));
    const IntTensor pred = predict(batch.images);
    if (pred.shape != batch.masks.shape) throw DimensionError("predictor returned " + shape_string(pred.shape));
    const auto hw = static_cast<std::size_t>(batch.masks.shape[1] * batch.masks.shape[2]);
    for (std::size_t n = 0; n < stop - start; ++n) {
      IntTensor p{{batch.masks.shape[1], batch.masks.shape[2]}, {}};
      IntTensor t = p;
      p.data.assign(pred.data.begin() + static_cast<std::ptrdiff_t>(n * hw),
                    pred.data.begin() + static_cast<std::ptrdiff_t>((n + 1) * hw));
      t.data.assign(batch.masks.data.begin() + static_cast<std::ptrdiff_t>(n * hw),
                    batch.masks.data.begin() + static_cast<std::ptrdiff_t>((n + 1) * hw));
      for (int l = 1; l < num_classes; ++l) s.per_label[static_cast<std::size_t>(l - 1)] += dice_score(p, t, l);
    }
  }
  for (auto& v : s.per_label) v /= static_cast<double>(samples.size());
  for (double v : s.per_label) s.mean += v;
  s.mean /= static_cast<double>(s.per_label.size());
  return s;
}

void add_rows(DiceReport& r, const ReportMeta& meta, const std::string& group, const LabelScores& s) {
  for (std::size_t l = 0; l < s.per_label.size(); ++l)
    r.rows.push_back({meta.method, group, static_cast<int>(l + 1), s.per_label[l], meta.seed, meta.config_hash});
  r.rows.push_back({meta.method, group, kMeanLabel, s.mean, meta.seed, meta.config_hash});
}

int training_domain(const Dataset& data) {
  const auto d = data.domains(Split::train);
  return d.empty() ? 0 : d.front();
}

}  // namespace

double DiceReport::value(const std::string& group, int label) const {
  for (const auto& r : rows)
    if (r.group == group && r.label == label) return r.dice;
  throw ConfigError("report has no row for " + group + " label " + std::to_string(label));
}

bool DiceReport::has(const std::string& group, int label) const {
  return std::any_of(rows.begin(), rows.end(), [&](const DiceRow& r) { return r.group == group && r.label == label; });
}

void DiceReport::merge(const DiceReport& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }

DiceReport evaluate_domains(const Predictor& predict, const Dataset& data, const ReportMeta& meta) {
  const auto domains = data.domains(Split::test);
  if (domains.empty()) throw ConfigError("dataset has no test split");
  const int iid_domain = training_domain(data);
  DiceReport r;
  double ood_sum = 0.0;
  int ood_count = 0;
  for (int d : domains) {
    const LabelScores s = score_samples(predict, data.subset(Split::test, d), data.num_classes);
    add_rows(r, meta, "domain" + std::to_string(d), s);
    if (d == iid_domain) {
      r.rows.push_back({meta.method, "iid", kMeanLabel, s.mean, meta.seed, meta.config_hash});
    } else {
      ood_sum += s.mean;
      ++ood_count;
    }
  }
  if (ood_count > 0)
    r.rows.push_back({meta.method, "ood_mean", kMeanLabel, ood_sum / ood_count, meta.seed, meta.config_hash});
  return r;
}

DiceReport evaluate_domains(const SegNet& model, const Dataset& data, const ReportMeta& meta) {
  return evaluate_domains(model_predictor(model), data, meta);
}

std::string corruption_group(const CorruptionSpec& spec) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "@%g", spec.severity);
  return std::string(corruption_name(spec.kind)) + buf;
}

DiceReport evaluate_corruptions(const Predictor& predict, const Dataset& data, const std::vector<CorruptionSpec>& specs,
                                const ReportMeta& meta) {
  const auto clean = data.subset(Split::test, training_domain(data));
  if (clean.empty()) throw ConfigError("dataset has no test split in the training domain");
  DiceReport r;
  add_rows(r, meta, "clean", score_samples(predict, clean, data.num_classes));
  for (const CorruptionSpec& spec : specs) {
    spec.validate();
    std::vector<SegSample> corrupted = clean;
    for (std::size_t i = 0; i < corrupted.size(); ++i) {
      CorruptionSpec s = spec;
      s.seed = hash_combine(spec.seed, i);
      corrupted[i].image = corrupt(corrupted[i].image, s);
    }
    add_rows(r, meta, corruption_group(spec), score_samples(predict, corrupted, data.num_classes));
  }
  return r;
}

DiceReport evaluate_corruptions(const SegNet& model, const Dataset& data, const std::vector<CorruptionSpec>& specs,
                                const ReportMeta& meta) {
  return evaluate_corruptions(model_predictor(model), data, specs, meta);
}

// ---------------------------------------------------------------- reports

namespace {

constexpr const char* kReportHeader = "method,group,label,dice,seed,config_hash";

void check_field(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(",\n\r") != std::string::npos)
    throw FormatError(std::string("report ") + what + " '" + s + "' is empty or holds a separator");
}

}  // namespace

void write_report(std::ostream& os, const DiceReport& report) {
  os << kReportHeader << '\n';
  for (const auto& r : report.rows) {
    check_field(r.method, "method");
    check_field(r.group, "group");
    check_field(r.config_hash, "config hash");
    os << r.method << ',' << r.group << ',' << (r.label == kMeanLabel ? std::string("mean") : std::to_string(r.label))
       << ',' << format_double(r.dice) << ',' << r.seed << ',' << r.config_hash << '\n';
  }
  if (!os) throw FormatError("failed writing report");
}

DiceReport read_report(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kReportHeader) throw FormatError("report header missing");
  DiceReport report;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    const std::string where = "report line " + std::to_string(line_no);
    if (f.size() != 6 || line.back() == ',') throw FormatError(where + ": expected 6 fields");
    DiceRow r;
    r.method = f[0];
    r.group = f[1];
    r.config_hash = f[5];
    try {
      r.label = f[2] == "mean" ? kMeanLabel : parse_int<int>("label", f[2]);
      r.dice = parse_double("dice", f[3]);
      r.seed = parse_int<std::uint64_t>("seed", f[4]);
    } catch (const ConfigError& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!(r.dice >= 0.0 && r.dice <= 1.0)) throw FormatError(where + ": DICE outside [0,1]");
    report.rows.push_back(std::move(r));
  }
  return report;
}

void save_report(const std::filesystem::path& path, const DiceReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_report(out, report);
}

DiceReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_report(in);
}

// ---------------------------------------------------------------- training

namespace {

constexpr std::uint64_t kInitKey = 1;
constexpr std::uint64_t kPoolKey = 2;
constexpr std::uint64_t kEpochKey = 3;

struct StepContext {
  const TrainConfig& cfg;
  const std::vector<Tensor>& pool;
};

bool in_stages(const std::vector<int>& stages, int stage) {
  return std::find(stages.begin(), stages.end(), stage) != stages.end();
}

// One optimisation step; returns the total loss (non-finite: no update).
double train_step(SegNet& net, Adam& opt, SegBatch batch, const StepContext& ctx, const Rng& rng) {
  const TrainConfig& cfg = ctx.cfg;
  Rng mix_rng = rng.split(1), style_rng = rng.split(2), rec_rng = rng.split(3), adv_rng = rng.split(4);
  if (cfg.method == Method::compstyle) batch = apply_pipeline(batch, ctx.pool, cfg.mix, mix_rng);

  FeatureHook hook;
  if (cfg.method == Method::mixstyle || cfg.method == Method::dsu) {
    hook = [&](const Tensor& f, int stage) {
      if (!in_stages(cfg.style_stages, stage) || !style_rng.bernoulli(cfg.style_p)) return f;
      return cfg.method == Method::mixstyle ? mixstyle(f, cfg.style_alpha, style_rng) : dsu(f, style_rng);
    };
  }

  opt.zero_grad();
  const Tensor latent = net.encode(batch.images, hook);
  Tensor loss = scale(segmentation_loss(net.decode_seg(latent), batch.masks), static_cast<Real>(cfg.w_seg));
  if (cfg.w_rec > 0.0 && net.has_aux_decoder()) {
    std::vector<StyleHookParams> hooks;
    for (std::int64_t c : net.hook_channels())
      hooks.push_back(random_hook(batch.size(), c, rec_rng, cfg.adv.lambda_alpha));
    const Tensor recon = net.forward_style_decode(latent, hooks);
    loss = add(loss, scale(mse_loss(recon, batch.images), static_cast<Real>(cfg.w_rec)));
  }
  if (uses_adversary(cfg.method) && cfg.adversarial_branch) {
    const AdversarialResult adv = adversarial_style_search(net, batch, cfg.adv, adv_rng);
    // Styled images are detached; only the segmentation path sees them.
    const Tensor adv_loss = segmentation_loss(net.forward_seg(adv.styled_images), batch.masks);
    loss = add(loss, scale(adv_loss, static_cast<Real>(cfg.w_seg)));
  }
  const double value = loss.item();
  if (!std::isfinite(value)) return value;
  loss.backward();
  opt.step();
  return value;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& data, const EpochObserver& observer) {
  cfg.validate();
  const auto train_idx = data.select(Split::train);
  if (train_idx.empty()) throw ConfigError("dataset has no train split");
  if (data.domains(Split::train).size() != 1) throw ConfigError("train split must come from a single domain");
  const auto val = data.subset(Split::val);

  SegNetConfig arch = cfg.arch;
  arch.num_classes = data.num_classes;
  arch.seed = hash_combine(cfg.seed, kInitKey);
  SegNet net(arch);
  Adam opt(net.parameters(), cfg.lr);
  const Rng root(cfg.seed);

  std::vector<Tensor> pool;
  if (cfg.method == Method::compstyle)
    pool = sample_pool(cfg.fractal_pool, data.samples[train_idx.front()].image.dim(1), hash_combine(cfg.seed, kPoolKey));
  const StepContext ctx{cfg, pool};

  TrainResult result{net.frozen(), {}, -1, false};
  double best = -std::numeric_limits<double>::infinity();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs && !result.diverged; ++epoch) {
    Rng epoch_rng = root.split(hash_combine(kEpochKey, static_cast<std::uint64_t>(epoch)));
    const std::vector<int> order = epoch_rng.permutation(static_cast<int>(train_idx.size()));
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start + 1 < order.size(); start += bs) {
      // A trailing single sample is skipped: style statistics need pairs.
      std::vector<std::size_t> idx;
      for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i)
        idx.push_back(train_idx[static_cast<std::size_t>(order[i])]);
      const double value =
          train_step(net, opt, make_batch(data.samples, idx), ctx, epoch_rng.split(static_cast<std::uint64_t>(batches)));
      if (!std::isfinite(value)) {
        result.diverged = true;
        break;
      }
      loss_sum += value;
      ++batches;
    }
    if (result.diverged) break;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches ? loss_sum / batches : 0.0;
    rec.val_dice = val.empty() ? std::numeric_limits<double>::quiet_NaN()
                               : score_samples(model_predictor(net), val, data.num_classes).mean;
    result.history.push_back(rec);
    if (observer) observer(rec);
    if (!val.empty() && rec.val_dice > best) {
      best = rec.val_dice;
      result.model = net.frozen();
      result.best_epoch = epoch;
    }
  }
  if (result.best_epoch < 0 && !result.history.empty()) {
    result.model = net.frozen();
    result.best_epoch = result.history.back().epoch;
  }
  return result;
}

COMPSTYLE_NAMESPACE_END
