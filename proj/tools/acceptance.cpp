// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: one PASS/FAIL line per criterion. Thresholds, trial
// counts and the desk-scale experiment protocol are fixed below.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <tuple>

#include "compstyle/adversarial.hpp"
#include "compstyle/corruption.hpp"
#include "compstyle/data.hpp"
#include "compstyle/fft.hpp"
#include "compstyle/io.hpp"
#include "compstyle/ops.hpp"
#include "compstyle/segnet.hpp"
#include "compstyle/style.hpp"
#include "compstyle/trainer.hpp"
#include "support/gradient_suite.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace compstyle;

namespace {

// ---- pinned thresholds
constexpr int kGradTrials = 20;
constexpr double kGradTol = 1e-3;
constexpr double kGradSeconds = 120;
constexpr double kIdentityTol = 1e-4;
constexpr double kTargetStatTol = 1e-3;
constexpr double kStyleSeconds = 60;
constexpr int kVarianceBatches = 100;
constexpr double kVarianceTol = 1e-6;
constexpr double kCorruptIdentityTol = 1e-5;
constexpr double kFftTol = 1e-5;
constexpr double kParsevalRelTol = 1e-4;
constexpr double kCorruptSeconds = 60;
constexpr int kAscentTrials = 50;
constexpr double kAscentRate = 0.8;
constexpr int kSeeds = 3;
constexpr double kOodMargin = 0.05;
constexpr double kIidSlack = 0.05;
constexpr double kSpikeSeverity = 0.75;

// ---- desk-scale experiment protocol
SynthConfig desk_data(int seed, int num_classes) {
  SynthConfig c;
  c.size = 32;
  c.num_classes = num_classes;
  c.n_train = 64;
  c.n_val = 16;
  c.n_test = 24;
  c.seed = 100 + static_cast<std::uint64_t>(seed);
  return c;
}

TrainConfig desk_train(Method m, int seed) {
  TrainConfig c;
  c.method = m;
  c.epochs = 60;
  c.seed = static_cast<std::uint64_t>(seed);
  return c;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double max_abs_diff(std::span<const Real> a, std::span<const Real> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

Tensor uniform(Shape shape, Rng& rng, double lo = 0, double hi = 1) {
  std::vector<Real> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = static_cast<Real>(rng.uniform(lo, hi));
  return Tensor::from(std::move(shape), std::move(v));
}

// Features whose instances carry distinct offsets and scales.
Tensor styled_features(std::int64_t b, std::int64_t c, std::int64_t hw, Rng& rng) {
  std::vector<Real> v(static_cast<std::size_t>(b * c * hw * hw));
  for (std::int64_t i = 0; i < b * c; ++i) {
    const double s = rng.uniform(0.5, 2.0), m = rng.uniform(-1, 1);
    for (std::int64_t j = 0; j < hw * hw; ++j) v[static_cast<std::size_t>(i * hw * hw + j)] = static_cast<Real>(rng.normal() * s + m);
  }
  return Tensor::from({b, c, hw, hw}, std::move(v));
}

std::vector<int> identity_perm(std::int64_t n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  return p;
}

// ---- criteria

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::string worst_op;
  int ops = 0, trials = kGradTrials;
  for (const auto& r : test::run_gradient_suite(kGradTrials)) {
    ++ops;
    trials = std::min(trials, r.trials);
    if (!(r.worst_relative_error <= worst)) {
      worst = r.worst_relative_error;
      worst_op = r.op;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < kGradTol && trials >= kGradTrials && secs < kGradSeconds,
          std::to_string(ops) + " ops x " + std::to_string(trials) + " trials, worst rel err " + fmt("%.2e", worst) +
              " (" + worst_op + "), " + fmt("%.1f s", secs)};
}

Outcome style_algebra() {
  const auto t0 = Clock::now();
  Rng rng(21);
  double identity = 0, target = 0, mix_self = 0, dsu_flat = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t b = 2 + static_cast<std::int64_t>(rng.uniform_int(5)), c = 1 + static_cast<std::int64_t>(rng.uniform_int(4));
    const Tensor f = styled_features(b, c, 8, rng);
    const auto [mu, sigma] = instance_stats(f);
    const StyleNoiseScale scale = batch_style_variance(f);
    const StyleParams own{sigma, mu, Tensor::zeros({b, c}), Tensor::zeros({b, c}), Tensor::full({b}, 1), identity_perm(b)};
    identity = std::max(identity, max_abs_diff(apply_style(f, own, scale).data(), f.data()));

    std::vector<Tensor> rnd;
    for (int k = 0; k < 4; ++k) {
      std::vector<Real> v(static_cast<std::size_t>(b * c));
      for (auto& x : v) x = static_cast<Real>(rng.normal());
      rnd.push_back(Tensor::from({b, c}, std::move(v)));
    }
    const StyleParams p{rnd[0], rnd[1], rnd[2], rnd[3], Tensor::full({b}, 1), identity_perm(b)};
    const auto [m, s] = instance_stats(apply_style(f, p, scale));
    for (std::int64_t i = 0; i < b; ++i)
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const auto idx = static_cast<std::size_t>(i * c + ch);
        const auto cc = static_cast<std::size_t>(ch);
        const double want_mu = rnd[1].data()[idx] + scale.sigma_beta.data()[cc] * rnd[3].data()[idx];
        const double want_sigma = std::abs(rnd[0].data()[idx] + scale.sigma_gamma.data()[cc] * rnd[2].data()[idx]);
        target = std::max({target, std::abs(m.data()[idx] - want_mu), std::abs(s.data()[idx] - want_sigma)});
      }

    std::vector<int> shifted(static_cast<std::size_t>(b));
    for (std::int64_t i = 0; i < b; ++i) shifted[static_cast<std::size_t>(i)] = static_cast<int>((i + 1) % b);
    mix_self = std::max(mix_self, max_abs_diff(mixstyle_with(f, Tensor::full({b}, 1), shifted).data(), f.data()));
    mix_self = std::max(mix_self, max_abs_diff(mixstyle_with(f, uniform({b}, rng), identity_perm(b)).data(), f.data()));

    std::vector<Real> flat;
    const auto per = static_cast<std::size_t>(c * 64);
    for (std::int64_t i = 0; i < b; ++i) flat.insert(flat.end(), f.data().begin(), f.data().begin() + static_cast<std::ptrdiff_t>(per));
    const Tensor same = Tensor::from({b, c, 8, 8}, std::move(flat));
    dsu_flat = std::max(dsu_flat, max_abs_diff(dsu(same, rng).data(), same.data()));
  }
  const double secs = seconds_since(t0);
  const bool ok = identity <= kIdentityTol && target <= kTargetStatTol && mix_self <= kIdentityTol && dsu_flat <= kIdentityTol &&
                  secs < kStyleSeconds;
  return {ok, "restyle " + fmt("%.1e", identity) + ", target stats " + fmt("%.1e", target) + ", mixstyle self " +
                  fmt("%.1e", mix_self) + ", dsu flat " + fmt("%.1e", dsu_flat) + ", " + fmt("%.1f s", secs)};
}

Outcome variance_oracle() {
  Rng rng(31);
  double worst = 0;
  for (int t = 0; t < kVarianceBatches; ++t) {
    const std::int64_t b = 2 + static_cast<std::int64_t>(rng.uniform_int(15)), c = 1 + static_cast<std::int64_t>(rng.uniform_int(8));
    const std::int64_t hw = 2 + static_cast<std::int64_t>(rng.uniform_int(7));
    const Tensor f = styled_features(b, c, hw, rng);
    const StyleNoiseScale s = batch_style_variance(f);
    // Two-pass oracle from scratch in double precision.
    for (std::int64_t ch = 0; ch < c; ++ch) {
      std::vector<double> mus, sigmas;
      for (std::int64_t i = 0; i < b; ++i) {
        const Real* v = f.data().data() + (i * c + ch) * hw * hw;
        double m = 0;
        for (std::int64_t j = 0; j < hw * hw; ++j) m += v[j];
        m /= static_cast<double>(hw * hw);
        double q = 0;
        for (std::int64_t j = 0; j < hw * hw; ++j) q += (v[j] - m) * (v[j] - m);
        mus.push_back(m);
        sigmas.push_back(std::sqrt(q / static_cast<double>(hw * hw)));
      }
      const auto pop_var = [](const std::vector<double>& x) {
        double m = 0;
        for (double v : x) m += v;
        m /= static_cast<double>(x.size());
        double q = 0;
        for (double v : x) q += (v - m) * (v - m);
        return q / static_cast<double>(x.size());
      };
      worst = std::max({worst, std::abs(s.sigma_gamma.data()[static_cast<std::size_t>(ch)] - pop_var(sigmas)),
                        std::abs(s.sigma_beta.data()[static_cast<std::size_t>(ch)] - pop_var(mus))});
    }
  }
  return {worst <= kVarianceTol, std::to_string(kVarianceBatches) + " batches, max abs diff " + fmt("%.2e", worst)};
}

Outcome corruption_identities() {
  const auto t0 = Clock::now();
  Rng rng(41);
  double identity = 0, roundtrip = 0, parseval = 0, dft = 0, ghost = 0;
  int spike_ok = 0, spike_total = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = uniform({32, 32}, rng);
    for (auto kind : kAllCorruptions) {
      CorruptionSpec s;
      s.kind = kind;
      s.seed = static_cast<std::uint64_t>(trial);
      identity = std::max(identity, max_abs_diff(corrupt(x, s).data(), x.data()));
    }
    roundtrip = std::max(roundtrip, max_abs_diff(ifft2(fft2(x)).data(), x.data()));

    const Tensor y = uniform({8, 8}, rng, -1, 1);
    const Spectrum sp = fft2(y);
    const auto ref = test::direct_dft(y.data(), 8, 8);
    double e_img = 0, e_spec = 0;
    for (Real v : y.data()) e_img += static_cast<double>(v) * v;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      dft = std::max(dft, std::abs(std::complex<double>(sp.real.data()[i], sp.imag.data()[i]) - ref[i]));
      e_spec += static_cast<double>(sp.real.data()[i]) * sp.real.data()[i] + static_cast<double>(sp.imag.data()[i]) * sp.imag.data()[i];
    }
    parseval = std::max(parseval, std::abs(e_spec - e_img) / e_img);

    // Ghosting of every line but the centre on 8x8: closed form vs direct DFT.
    const Tensor g = uniform({8, 8}, rng);
    CorruptionSpec gs;
    gs.kind = CorruptionKind::ghosting;
    gs.severity = 1.0;
    gs.num_ghosts = 1;
    gs.clamp_output = false;
    const Tensor gy = ghosting(g, gs);
    const auto gf = test::direct_dft(g.data(), 8, 8);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) {
        std::complex<double> acc = 0.0;
        for (int kx = 0; kx < 8; ++kx)
          acc += gf[static_cast<std::size_t>(4 * 8 + kx)] * std::polar(1.0, 2.0 * std::numbers::pi * (kx - 4) * c / 8.0);
        ghost = std::max(ghost, std::abs(gy.data()[static_cast<std::size_t>(r * 8 + c)] - acc.real() / 8.0));
      }
  }
  // Spike stripes: every row's DFT peaks at the inserted frequency.
  const Tensor flat = Tensor::full({32, 32}, 0.5);
  for (std::int64_t k : {1, 3, 7, 12}) {
    CorruptionSpec s;
    s.kind = CorruptionKind::spike;
    s.severity = 0.2;
    s.spike_positions = {{0, k}};
    const Tensor y = spike(flat, s);
    for (std::int64_t r = 0; r < 32; ++r) {
      std::vector<double> row(32);
      for (std::int64_t c = 0; c < 32; ++c) row[static_cast<std::size_t>(c)] = y.data()[static_cast<std::size_t>(r * 32 + c)] - 0.5;
      const auto mag = test::dft_magnitudes(std::span<const double>(row));
      const auto peak = std::max_element(mag.begin() + 1, mag.begin() + 17) - mag.begin();
      spike_ok += peak == k;
      ++spike_total;
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = identity <= kCorruptIdentityTol && roundtrip <= kFftTol && dft <= kFftTol && parseval <= kParsevalRelTol &&
                  ghost <= kFftTol * 10 && spike_ok == spike_total && secs < kCorruptSeconds;
  return {ok, "identity " + fmt("%.1e", identity) + ", roundtrip " + fmt("%.1e", roundtrip) + ", DFT " + fmt("%.1e", dft) +
                  ", Parseval rel " + fmt("%.1e", parseval) + ", ghost " + fmt("%.1e", ghost) + ", spike rows " +
                  std::to_string(spike_ok) + "/" + std::to_string(spike_total) + ", " + fmt("%.1f s", secs)};
}

// Trained models shared between criteria within one invocation.
class ModelCache {
 public:
  const Dataset& data(int seed, int num_classes) {
    const auto key = std::make_pair(seed, num_classes);
    auto it = data_.find(key);
    if (it == data_.end()) it = data_.emplace(key, generate_dataset(desk_data(seed, num_classes), default_domains())).first;
    return it->second;
  }

  const TrainResult& model(Method m, int seed, int num_classes, bool verbose) {
    const auto key = std::make_tuple(static_cast<int>(m), seed, num_classes);
    auto it = models_.find(key);
    if (it == models_.end()) {
      const auto t0 = Clock::now();
      TrainResult r = train(desk_train(m, seed), data(seed, num_classes));
      if (verbose)
        std::fprintf(stderr, "  trained %s seed %d (%d classes): best epoch %d, %.0f s%s\n", method_name(m).c_str(), seed,
                     num_classes, r.best_epoch, seconds_since(t0), r.diverged ? " DIVERGED" : "");
      it = models_.emplace(key, std::move(r)).first;
    }
    return it->second;
  }

 private:
  std::map<std::pair<int, int>, Dataset> data_;
  std::map<std::tuple<int, int, int>, TrainResult> models_;
};

Outcome ascent_property(ModelCache& cache, bool verbose) {
  const TrainResult& trained = cache.model(Method::baseline, 0, 2, verbose);
  const Dataset& data = cache.data(0, 2);
  const auto pool = data.select(Split::test, 0);
  int ascended = 0;
  double mean_gain = 0;
  for (int t = 0; t < kAscentTrials; ++t) {
    Rng pick(static_cast<std::uint64_t>(1000 + t));
    const auto order = pick.permutation(static_cast<int>(pool.size()));
    std::vector<std::size_t> idx;
    for (int i = 0; i < 8; ++i) idx.push_back(pool[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    Rng rng(static_cast<std::uint64_t>(2000 + t));
    const AdversarialResult r = adversarial_style_search(trained.model, make_batch(data.samples, idx), 5, 0.1, rng);
    ascended += r.final_loss >= r.initial_loss;
    mean_gain += (r.final_loss - r.initial_loss) / kAscentTrials;
  }
  const double rate = static_cast<double>(ascended) / kAscentTrials;
  return {rate >= kAscentRate,
          std::to_string(ascended) + "/" + std::to_string(kAscentTrials) + " trials ascended, mean loss gain " + fmt("%.4f", mean_gain)};
}

Outcome ood_ordering(ModelCache& cache, bool verbose) {
  const auto t0 = Clock::now();
  std::map<Method, double> ood, iid;
  for (Method m : {Method::baseline, Method::mixstyle, Method::dsu, Method::compstyle})
    for (int s = 0; s < kSeeds; ++s) {
      const DiceReport r = evaluate_domains(cache.model(m, s, 2, verbose).model, cache.data(s, 2));
      ood[m] += r.ood_mean() / kSeeds;
      iid[m] += r.iid() / kSeeds;
    }
  const bool ok = ood[Method::compstyle] >= ood[Method::baseline] + kOodMargin && ood[Method::compstyle] >= ood[Method::mixstyle] &&
                  ood[Method::compstyle] >= ood[Method::dsu] && std::abs(iid[Method::compstyle] - iid[Method::baseline]) <= kIidSlack;
  std::string d = "OOD mean";
  for (Method m : {Method::baseline, Method::mixstyle, Method::dsu, Method::compstyle})
    d += " " + method_name(m) + " " + fmt("%.4f", ood[m]);
  d += "; IID baseline " + fmt("%.4f", iid[Method::baseline]) + " compstyle " + fmt("%.4f", iid[Method::compstyle]) + ", " +
       fmt("%.0f s", seconds_since(t0));
  return {ok, d};
}

Outcome spike_ordering(ModelCache& cache, bool verbose) {
  CorruptionSpec spec;
  spec.kind = CorruptionKind::spike;
  spec.severity = kSpikeSeverity;
  spec.seed = 77;
  std::map<Method, double> drop;
  for (Method m : {Method::baseline, Method::compstyle})
    for (int s = 0; s < kSeeds; ++s) {
      const DiceReport r = evaluate_corruptions(cache.model(m, s, 4, verbose).model, cache.data(s, 4), {spec});
      drop[m] += (r.value("clean") - r.value(corruption_group(spec))) / kSeeds;
    }
  return {drop[Method::compstyle] < drop[Method::baseline],
          "4-class spike drop baseline " + fmt("%.4f", drop[Method::baseline]) + ", compstyle " + fmt("%.4f", drop[Method::compstyle])};
}

std::vector<std::pair<std::string, std::vector<std::uint8_t>>> directory_bytes(const fs::path& dir) {
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), dir).generic_string(), read_file_bytes(e.path()));
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism(const fs::path& scratch) {
  SynthConfig sc = desk_data(5, 4);
  sc.n_train = 16;
  sc.n_val = 4;
  sc.n_test = 4;
  const Dataset data = generate_dataset(sc, default_domains());
  int identical = 0, total = 0;
  for (Method m : {Method::baseline, Method::mixstyle, Method::dsu, Method::maxstyle, Method::compstyle}) {
    TrainConfig cfg = desk_train(m, 9);
    cfg.epochs = 2;
    cfg.arch.base_width = 8;
    cfg.adv.iters = 2;
    std::vector<CorruptionSpec> specs;
    for (auto k : kAllCorruptions) {
      CorruptionSpec s;
      s.kind = k;
      s.severity = 0.5;
      s.seed = 3;
      specs.push_back(s);
    }
    std::vector<fs::path> dirs;
    for (int run = 0; run < 2; ++run) {
      const fs::path dir = scratch / (method_name(m) + "_" + std::to_string(run));
      fs::remove_all(dir);
      const TrainResult r = train(cfg, data);
      save_checkpoint(r.model, dir / "checkpoint");
      const ReportMeta meta{method_name(m), cfg.seed, config_hash(cfg)};
      DiceReport rep = evaluate_domains(r.model, data, meta);
      rep.merge(evaluate_corruptions(r.model, data, specs, meta));
      save_report(dir / "report.csv", rep);
      dirs.push_back(dir);
    }
    identical += directory_bytes(dirs[0]) == directory_bytes(dirs[1]);
    ++total;
  }
  return {identical == total, std::to_string(identical) + "/" + std::to_string(total) +
                                  " methods reproduced checkpoints and reports byte for byte"};
}

Outcome round_trips(const fs::path& scratch) {
  Rng rng(61);
  std::vector<std::string> failed;
  // Tensors, including edge shapes.
  for (const Shape& shape : {Shape{}, Shape{0}, Shape{7}, Shape{3, 5}, Shape{2, 1, 4, 4}}) {
    const Tensor t = uniform(shape, rng, -3, 3);
    const auto bytes = encode_tensor(t);
    const fs::path p = scratch / "t.cstn";
    save_tensor(p, decode_tensor(bytes));
    if (read_file_bytes(p) != bytes || encode_tensor(load_tensor(p)) != bytes) failed.push_back("cstn " + shape_string(shape));
  }
  // Checkpoints.
  SegNetConfig arch;
  arch.base_width = 4;
  arch.num_classes = 4;
  arch.seed = 5;
  const SegNet net(arch);
  save_checkpoint(net, scratch / "ck_a");
  save_checkpoint(load_checkpoint(scratch / "ck_a"), scratch / "ck_b");
  if (directory_bytes(scratch / "ck_a") != directory_bytes(scratch / "ck_b")) failed.push_back("checkpoint");
  // Dataset manifests.
  SynthConfig sc = desk_data(1, 4);
  sc.n_train = 4;
  sc.n_val = 2;
  sc.n_test = 1;
  const Dataset d = generate_dataset(sc, default_domains());
  const auto m1 = save_dataset(scratch / "ds_a", d);
  save_dataset(scratch / "ds_b", load_dataset(m1));
  if (directory_bytes(scratch / "ds_a") != directory_bytes(scratch / "ds_b")) failed.push_back("manifest");
  // Reports.
  DiceReport rep = evaluate_domains(net, d, {"baseline", 5, "0123456789abcdef"});
  rep.rows.push_back({"baseline", "spike@0.75", 2, 1.0 / 3.0, 5, "0123456789abcdef"});
  std::stringstream first, second;
  write_report(first, rep);
  const std::string text = first.str();
  write_report(second, read_report(first));
  if (second.str() != text) failed.push_back("csv report");
  std::string detail = "CSTN, checkpoint, manifest and CSV write-read-write ";
  if (failed.empty()) return {true, detail + "byte-identical"};
  for (const auto& f : failed) detail += "[" + f + " differs] ";
  return {false, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string scratch_dir = (fs::temp_directory_path() / "compstyle_acceptance").string();
  bool verbose = false;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--scratch", scratch_dir, "Directory for temporary files");
  app.add_flag("-v,--verbose", verbose, "Report training progress on stderr");
  CLI11_PARSE(app, argc, argv);

  const fs::path scratch = scratch_dir;
  fs::create_directories(scratch);
  ModelCache cache;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient integrity", [] { return gradient_integrity(); }},
      {"style algebra", [] { return style_algebra(); }},
      {"batch style variance oracle", [] { return variance_oracle(); }},
      {"corruption identities", [] { return corruption_identities(); }},
      {"adversarial ascent", [&] { return ascent_property(cache, verbose); }},
      {"OOD ordering", [&] { return ood_ordering(cache, verbose); }},
      {"spike robustness ordering", [&] { return spike_ordering(cache, verbose); }},
      {"determinism", [&] { return determinism(scratch / "determinism"); }},
      {"format round-trips", [&] { return round_trips(scratch); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::error_code ec;
  fs::remove_all(scratch, ec);
  return failures == 0 ? 0 : 1;
}
