/*
 * Copyright 2026 The cshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Oracle suites shared by `cshap verify` and the acceptance binary. Each
// check returns a pass flag and a one-line detail with the measured numbers.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "cshap/changepoint.hpp"
#include "cshap/convnet.hpp"
#include "cshap/dataset.hpp"
#include "cshap/decompose.hpp"
#include "cshap/explain.hpp"
#include "cshap/model.hpp"
#include "cshap/oracle.hpp"
#include "cshap/synth.hpp"

namespace cshap::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  std::uint64_t seed = 0;
  std::size_t shapley_cases = 20;
  std::size_t pelt_signals = 50;
  std::size_t reconstruction_signals = 100;
  std::size_t levels_seeds = 3;
  std::size_t gradient_seeds = 5;
  std::size_t gradient_stride = 11;  // check every n-th parameter
  std::size_t window_cases = 1000;
};

namespace detail {

inline std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

 private:
  using Clock = std::chrono::steady_clock;
  Clock::time_point start_ = Clock::now();
};

// Desk corpus with a 30-sample background: 6 big-core scenarios x 5 cycles.
struct DeskFixture {
  DatasetSplit split;
  BackgroundSet background;
  std::vector<WindowInstance> test;
};

inline DeskFixture desk_fixture(double overlap, std::uint64_t seed, std::size_t w = 100) {
  DeskFixture f;
  const auto traces = generate_corpus(SynthSpec::desk(overlap), 4, 7, seed);
  f.split = split_policy(traces, SplitPolicy{});
  DecomposeParams p;
  p.rng_seed = seed;
  f.background = select_background(f.split.train, {std::string("big"), std::nullopt}, 5, w, p, seed);
  f.test = slide_windows(f.split.test, {w, 50});
  return f;
}

class Mixture final : public Classifier {
 public:
  Mixture(const Classifier& f, const Classifier& g, double a) : f_(f), g_(g), a_(a) {}
  Probabilities predict_values(std::span<const double> t, std::span<const double> m) const override {
    const Probabilities x = f_.predict_values(t, m), y = g_.predict_values(t, m);
    Probabilities out;
    for (int c = 0; c < kNumClasses; ++c) out[c] = a_ * x[c] + (1.0 - a_) * y[c];
    return out;
  }
  std::string kind() const override { return "mixture"; }

 private:
  const Classifier& f_;
  const Classifier& g_;
  double a_;
};

class Constant final : public Classifier {
 public:
  Probabilities predict_values(std::span<const double>, std::span<const double>) const override {
    return {0.2, 0.5, 0.3};
  }
  std::string kind() const override { return "constant"; }
};

inline CoalitionValues random_game(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CoalitionValues v{};
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace detail

// Exact Shapley vs the 120-permutation oracle on random desk-config networks.
inline CheckResult shapley_exactness(const Options& o) {
  detail::Timer timer;
  CheckResult r;
  r.name = "shapley-exactness";
  const auto fx = detail::desk_fixture(0.5, o.seed + 11);
  ConvNetConfig cfg;
  cfg.window_size = 100;
  double max_diff = 0.0, max_gap = 0.0, max_raw_gap = 0.0, max_time = 0.0;
  bool counts_ok = true;
  for (std::size_t k = 0; k < o.shapley_cases; ++k) {
    ConvNet net(cfg);
    net.init_random(mix_seed(o.seed, k));
    const WindowInstance& w = fx.test[(k * 7) % fx.test.size()];
    DecomposeParams p;
    p.rng_seed = mix_seed(o.seed, 100 + k);
    detail::Timer one;
    const AttributionResult a = exact_shap(net, w, fx.background, p);
    max_time = std::max(max_time, one.seconds());
    const AttributionResult b = shap_permutation_oracle(net, w, fx.background, p);
    for (int c = 0; c < kNumClasses; ++c) {
      for (int i = 0; i < kNumConcepts; ++i) max_diff = std::max(max_diff, std::abs(a.phi[c][i] - b.phi[c][i]));
      double s = 0.0;
      for (double v : a.phi[c]) s += v;
      max_raw_gap = std::max(max_raw_gap, std::abs(s - (a.model_output[c] - a.base_value[c])));
    }
    max_gap = std::max(max_gap, a.efficiency_gap());
    counts_ok &= a.model_evaluations == 32 * fx.background.size();
  }
  r.passed = o.shapley_cases >= 1 && max_diff <= 1e-9 && max_gap <= 1e-9 && max_time < 5.0 && counts_ok &&
             fx.background.size() == 30;
  r.detail = std::to_string(o.shapley_cases) + " cases, |B|=" + std::to_string(fx.background.size()) +
             detail::fmt(", max |exact-perm| %.3g", max_diff) + detail::fmt(", max efficiency gap %.3g", max_gap) +
             detail::fmt(" (vs raw-window output %.3g)", max_raw_gap) +
             detail::fmt(", slowest window %.3f s", max_time);
  r.seconds = timer.seconds();
  return r;
}

// Dummy, symmetry and linearity on random games and through the pipeline.
inline CheckResult shapley_axioms(const Options& o) {
  detail::Timer timer;
  CheckResult r;
  r.name = "shapley-axioms";
  Rng rng(mix_seed(o.seed, 21));
  double dummy = 0.0, sym = 0.0, lin = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    CoalitionValues v = detail::random_game(rng);
    const int d = rep % kNumConcepts;
    for (std::uint32_t s = 0; s < kNumCoalitions; ++s) {
      if (s & (1u << d)) v[s] = v[s & ~(1u << d)];
    }
    dummy = std::max(dummy, std::abs(shapley_values(v)[d]));

    // Concepts i and j enter only through (S has i) + (S has j).
    const int i = rep % kNumConcepts, j = (rep + 2) % kNumConcepts;
    CoalitionValues base = detail::random_game(rng);
    CoalitionValues g{};
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double w1 = u(rng), w2 = u(rng);
    for (std::uint32_t s = 0; s < kNumCoalitions; ++s) {
      const int hits = ((s >> i) & 1u) + ((s >> j) & 1u);
      const std::uint32_t rest = s & ~((1u << i) | (1u << j));
      g[s] = base[rest] + w1 * hits + w2 * (hits == 2);
    }
    const ConceptValues pg = shapley_values(g);
    sym = std::max(sym, std::abs(pg[i] - pg[j]));

    const CoalitionValues a = detail::random_game(rng), b = detail::random_game(rng);
    CoalitionValues mix{};
    for (std::size_t s = 0; s < kNumCoalitions; ++s) mix[s] = w1 * a[s] + w2 * b[s];
    const auto pa = shapley_values(a), pb = shapley_values(b), pm = shapley_values(mix);
    for (int k = 0; k < kNumConcepts; ++k) lin = std::max(lin, std::abs(pm[k] - (w1 * pa[k] + w2 * pb[k])));
  }

  // Pipeline: a constant model is a dummy in every concept; a mixture of two
  // networks gets the mixture of their attributions.
  const auto fx = detail::desk_fixture(0.5, o.seed + 12);
  ConvNetConfig cfg;
  cfg.window_size = 100;
  ConvNet f(cfg), g(cfg);
  f.init_random(mix_seed(o.seed, 1));
  g.init_random(mix_seed(o.seed, 2));
  const detail::Constant constant;
  const detail::Mixture mixed(f, g, 0.3);
  for (std::size_t k = 0; k < 3; ++k) {
    const WindowInstance& w = fx.test[(k * 11) % fx.test.size()];
    DecomposeParams p;
    p.rng_seed = k;
    for (const auto& row : exact_shap(constant, w, fx.background, p).phi) {
      for (double v : row) dummy = std::max(dummy, std::abs(v));
    }
    const auto af = exact_shap(f, w, fx.background, p), ag = exact_shap(g, w, fx.background, p),
               am = exact_shap(mixed, w, fx.background, p);
    for (int c = 0; c < kNumClasses; ++c) {
      for (int i = 0; i < kNumConcepts; ++i) {
        lin = std::max(lin, std::abs(am.phi[c][i] - (0.3 * af.phi[c][i] + 0.7 * ag.phi[c][i])));
      }
    }
  }
  r.passed = dummy <= 1e-12 && sym <= 1e-9 && lin <= 1e-9;
  r.detail = detail::fmt("max dummy phi %.3g", dummy) + detail::fmt(", symmetry gap %.3g", sym) +
             detail::fmt(", linearity gap %.3g", lin);
  r.seconds = timer.seconds();
  return r;
}

// Piecewise-constant signal with Gaussian noise; returns true change points.
inline std::vector<std::size_t> step_signal(Rng& rng, std::size_t segments, double noise, Series& x) {
  std::uniform_int_distribution<std::size_t> len(150, 400);
  std::uniform_real_distribution<double> level(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, noise);
  std::vector<std::size_t> cps;
  double prev = level(rng);
  x.clear();
  for (std::size_t s = 0; s < segments; ++s) {
    double l = level(rng);
    while (std::abs(l - prev) < 0.3) l = level(rng);
    if (s == 0) l = prev;
    if (s > 0) cps.push_back(x.size());
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) x.push_back(l + nd(rng));
    prev = l;
  }
  return cps;
}

// PELT objective equals the exhaustive DP; clean steps are recovered.
inline CheckResult pelt_exactness(const Options& o) {
  detail::Timer timer;
  CheckResult r;
  r.name = "pelt-vs-exhaustive-dp";
  Rng rng(mix_seed(o.seed, 31));
  double max_obj = 0.0, max_loc = 0.0;
  std::size_t spurious = 0, missed = 0;
  for (std::size_t k = 0; k < o.pelt_signals; ++k) {
    Series x;
    const auto truth = step_signal(rng, 2 + k % 4, 0.02 + 0.01 * static_cast<double>(k % 3), x);
    CpdParams p;
    if (k % 2 == 1) {
      // Odd signals also vary the grid, penalty and minimum length.
      p.subsample = 10 + static_cast<int>(k % 3) * 15;
      p.penalty = 5.0 + 10.0 * static_cast<double>(k % 5);
      p.min_segment_length = 1 + static_cast<int>(k % 3);
    }
    const Segmentation seg = pelt_segmentation(x, p);
    const auto dp = oracle::optimal_partition(x, p, seg.bandwidth);
    max_obj = std::max(max_obj, std::abs(seg.objective - dp.objective));
    if (k % 2 == 0) {
      const auto& found = seg.change_points.indices;
      if (found.size() > truth.size()) spurious += found.size() - truth.size();
      if (found.size() < truth.size()) missed += truth.size() - found.size();
      for (std::size_t t : truth) {
        double best = 1e300;
        for (std::size_t f : found) best = std::min(best, std::abs(static_cast<double>(f) - static_cast<double>(t)));
        max_loc = std::max(max_loc, best);
      }
    }
  }
  r.passed = max_obj <= 1e-9 && max_loc <= 40.0 && spurious == 0 && missed == 0;
  r.detail = std::to_string(o.pelt_signals) + " signals" + detail::fmt(", max |PELT-DP| %.3g", max_obj) +
             detail::fmt(", worst step offset %.0f", max_loc) + ", spurious " + std::to_string(spurious) +
             ", missed " + std::to_string(missed);
  r.seconds = timer.seconds();
  return r;
}

// Reconstruction and stage conservation on synthetic cycles.
inline CheckResult reconstruction(const Options& o) {
  detail::Timer timer;
  CheckResult r;
  r.name = "decomposition-reconstruction";
  const SynthSpec spec = SynthSpec::desk(0.5);
  double recon = 0.0, peaks = 0.0, scale = 0.0;
  std::size_t resampled = 0, total = 0;
  for (std::size_t k = 0; k < o.reconstruction_signals; ++k) {
    const auto cls = static_cast<Condition>(k % kNumClasses);
    const SynthCycle cyc = generate_cycle(spec, cls, mix_seed(o.seed, 400 + k), 1400 + 4 * k, 0.0);
    const Series& x = cyc.signal.values;
    DecomposeParams p;
    Rng rng(mix_seed(o.seed, 500 + k));
    const ChangePoints cps = pelt(x, p.cpd);
    const LevelsResult lv = extract_levels(x, cps, p, rng);
    const PeaksResult pk = extract_peaks(lv.filtered, p, rng);
    const ScaleResult sc = extract_scale_lf_hf(pk.filtered, p);
    Decomposition d;
    d.levels = lv.levels;
    d.peaks = pk.peaks;
    d.scale = sc.scale;
    d.lf = sc.lf;
    d.hf = sc.hf;
    const Series y = recompose(d);
    std::size_t next = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      peaks = std::max(peaks, std::abs(pk.peaks[i] + pk.filtered[i] - lv.filtered[i]));
      scale = std::max(scale, std::abs(sc.scale * (sc.lf[i] + sc.hf[i]) - pk.filtered[i]));
      while (next < lv.resampled_indices.size() && lv.resampled_indices[next] < i) ++next;
      if (next < lv.resampled_indices.size() && lv.resampled_indices[next] == i) continue;
      recon = std::max(recon, std::abs(y[i] - x[i]));
    }
    resampled += lv.resampled_indices.size();
    total += x.size();
  }
  r.passed = recon <= 1e-12 && peaks <= 1e-12 && scale <= 1e-12;
  r.detail = std::to_string(o.reconstruction_signals) + " signals" +
             detail::fmt(", max reconstruction error %.3g", recon) +
             detail::fmt(", peaks+filtered %.3g", peaks) + detail::fmt(", scale*(lf+hf) %.3g", scale) +
             detail::fmt(", resampled fraction %.3f", static_cast<double>(resampled) / static_cast<double>(total));
  r.seconds = timer.seconds();
  return r;
}

// A classifier that only reads the window mean attributes mostly to Levels.
inline CheckResult levels_oracle_localization(const Options& o) {
  detail::Timer timer;
  CheckResult r;
  r.name = "levels-oracle-localization";
  const LevelsOracle oracle(0.74, 0.92, 0.05);
  bool ok = o.levels_seeds >= 1;
  std::string shares;
  for (std::size_t s = 0; s < o.levels_seeds; ++s) {
    const auto fx = detail::desk_fixture(0.0, mix_seed(o.seed, 600 + s));
    DecomposeParams p;
    p.rng_seed = s;
    const GlobalSummary g = aggregate_global(explain_all(oracle, fx.test, fx.background, p));
    double total = 0.0;
    for (double v : g.mean_abs) total += v;
    const auto top = std::max_element(g.mean_abs.begin(), g.mean_abs.end()) - g.mean_abs.begin();
    const double share = total > 0.0 ? g.mean_abs[0] / total : 0.0;
    ok &= top == concept_index(ConceptId::kLevels) && share >= 0.5;
    shares += (shares.empty() ? "" : ", ") + detail::fmt("%.3f", share);
  }
  r.passed = ok;
  r.detail = "Levels share of mean |phi| per seed: " + shares;
  r.seconds = timer.seconds();
  return r;
}

// Backprop against central differences on random desk-config networks.
inline CheckResult gradients(const Options& o) {
  detail::Timer timer;
  CheckResult r;
  r.name = "gradient-check";
  ConvNetConfig cfg;
  cfg.window_size = 100;
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (std::size_t s = 0; s < o.gradient_seeds; ++s) {
    ConvNet net(cfg);
    net.init_random(mix_seed(o.seed, 700 + s));
    Rng rng(mix_seed(o.seed, 800 + s));
    std::normal_distribution<double> nd(0.0, 1.0);
    ConvNet::Matrix input(2, 3 * 100);
    for (Eigen::Index i = 0; i < input.size(); ++i) input.data()[i] = nd(rng);
    const std::vector<int> labels = {0, 1, 2};
    const auto g = oracle::finite_difference_check(net, input, labels, 1e-3, o.gradient_stride);
    worst = std::max(worst, g.relative_error);
    checked += g.checked;
    skipped += g.skipped_kinks;
  }
  r.passed = o.gradient_seeds >= 1 && worst < 1e-4 && skipped * 10 < checked;
  r.detail = std::to_string(o.gradient_seeds) + " seeds" + detail::fmt(", worst relative error %.3g", worst) +
             ", " + std::to_string(checked) + " parameters checked, " + std::to_string(skipped) +
             " skipped at ReLU kinks";
  r.seconds = timer.seconds();
  return r;
}

// floor((N - W) / shift) + 1 windows, fewer as W grows.
inline CheckResult window_counts(const Options& o) {
  detail::Timer timer;
  CheckResult r;
  r.name = "window-counts";
  Rng rng(mix_seed(o.seed, 900));
  std::size_t mismatches = 0, non_decreasing = 0;
  for (std::size_t k = 0; k < o.window_cases; ++k) {
    const std::size_t n = 2 + rng() % 3000;
    const std::size_t w = 2 + rng() % 600;
    const std::size_t shift = 1 + rng() % 120;
    Signal s;
    for (std::size_t i = 0; i < n; ++i) {
      s.timestamps.push_back(1e-3 * static_cast<double>(i));
      s.values.push_back(static_cast<double>(i % 7));
    }
    const auto wins = slide_windows(s, {w, shift}, Condition::kNormal, {});
    const std::size_t expect = n < w ? 0 : (n - w) / shift + 1;
    bool ok = wins.size() == expect;
    for (std::size_t i = 0; ok && i < wins.size(); ++i) ok = wins[i].size() == w && wins[i].origin.offset == i * shift;
    mismatches += !ok;
    // Growing W by at least one shift over a long enough phase drops a window.
    if (n >= w + shift) {
      const auto bigger = slide_windows(s, {w + shift, shift}, Condition::kNormal, {});
      non_decreasing += bigger.size() >= wins.size();
    }
  }
  r.passed = mismatches == 0 && non_decreasing == 0;
  r.detail = std::to_string(o.window_cases) + " cases, " + std::to_string(mismatches) + " count mismatches, " +
             std::to_string(non_decreasing) + " non-decreasing pairs";
  r.seconds = timer.seconds();
  return r;
}

// The oracle suites run by `cshap verify`.
inline std::vector<CheckResult> run_oracle_suites(const Options& o) {
  return {shapley_axioms(o), shapley_exactness(o), pelt_exactness(o), reconstruction(o), gradients(o)};
}

}  // namespace cshap::verify
