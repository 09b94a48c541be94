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

// Synthetic machine traces with known ground-truth concepts.
//
// Each cycle is built directly from the concept model, so the generated
// signal recomposes exactly from its stored components. Classes differ mainly
// by their level palettes; the overlap knob makes Normal and NoFan share part
// of their palettes, which is what makes short windows ambiguous.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "cshap/dataset.hpp"
#include "cshap/error.hpp"
#include "cshap/numeric.hpp"
#include "cshap/signal.hpp"

namespace cshap {

struct ClassProfile {
  std::vector<double> level_palette;  // amperes
  double peak_rate = 0.004;           // per sample
  double peak_amplitude = 0.06;       // amperes
  double lf_amplitude = 0.5;          // normalized units
  double lf_period = 400.0;           // samples
  double hf_std = 0.3;                // normalized units
  double scale = 0.02;                // amperes, multiplies lf + hf
};

struct SynthSpec {
  std::array<ClassProfile, kNumClasses> classes;
  std::size_t segment_min = 150;
  std::size_t segment_max = 300;
  std::size_t cycle_min = 1400;
  std::size_t cycle_max = 1800;
  std::size_t idle_length = 60;
  double idle_level = 0.3;
  double sample_period = 1e-3;  // seconds
  double little_core_stretch = 1.25;
  int rounds = 1;
  double overlap = 0.0;  // fraction of the NoFan palette shared with Normal

  void validate() const {
    require(overlap >= 0.0 && overlap <= 1.0, "synth overlap must be in [0, 1]");
    require(segment_min >= 1 && segment_min <= segment_max, "synth segment length range invalid");
    require(cycle_min >= 1 && cycle_min <= cycle_max, "synth cycle length range invalid");
    require(sample_period > 0.0, "synth sample period must be positive");
    require(little_core_stretch > 0.0, "synth core stretch must be positive");
    for (const ClassProfile& c : classes) {
      require(!c.level_palette.empty(), "synth level palette must not be empty");
      require(c.hf_std >= 0.0 && c.peak_rate >= 0.0 && c.peak_rate <= 1.0, "synth class profile invalid");
      require(c.scale > 0.0 && c.lf_period > 0.0, "synth scale and lf period must be positive");
    }
  }

  // Palette actually used for class c after applying the overlap knob: the
  // lowest k NoFan levels are replaced by the highest k Normal levels.
  std::vector<double> palette(Condition c) const {
    std::vector<double> p = classes[class_index(c)].level_palette;
    if (c != Condition::kNoFan) return p;
    const auto& normal = classes[class_index(Condition::kNormal)].level_palette;
    std::vector<double> sorted_nofan = p, sorted_normal = normal;
    std::sort(sorted_nofan.begin(), sorted_nofan.end());
    std::sort(sorted_normal.begin(), sorted_normal.end());
    const auto k = static_cast<std::size_t>(std::lround(overlap * static_cast<double>(p.size())));
    for (std::size_t i = 0; i < std::min({k, sorted_nofan.size(), sorted_normal.size()}); ++i) {
      sorted_nofan[i] = sorted_normal[sorted_normal.size() - 1 - i];
    }
    std::sort(sorted_nofan.begin(), sorted_nofan.end());
    return sorted_nofan;
  }

  static SynthSpec desk(double overlap = 0.0) {
    SynthSpec s;
    s.overlap = overlap;
    s.classes[class_index(Condition::kNormal)].level_palette = {0.60, 0.64, 0.68, 0.72};
    s.classes[class_index(Condition::kNoFan)].level_palette = {0.76, 0.80, 0.84, 0.88};
    s.classes[class_index(Condition::kUnderVolt)].level_palette = {0.96, 1.00, 1.04, 1.08};
    s.classes[class_index(Condition::kNoFan)].peak_rate = 0.006;
    s.classes[class_index(Condition::kUnderVolt)].hf_std = 0.4;
    return s;
  }
};

struct SynthCycle {
  Signal signal;
  Decomposition truth;
};

inline SynthCycle generate_cycle(const SynthSpec& spec, Condition cls, std::uint64_t seed,
                                 std::size_t length = 0, double t0 = 0.0) {
  spec.validate();
  Rng rng(seed);
  const ClassProfile& prof = spec.classes[class_index(cls)];
  const std::vector<double> palette = spec.palette(cls);
  if (length == 0) {
    length = std::uniform_int_distribution<std::size_t>(spec.cycle_min, spec.cycle_max)(rng);
  }
  SynthCycle out;
  Decomposition& d = out.truth;
  d.levels.resize(length);
  d.peaks.assign(length, 0.0);
  d.lf.resize(length);
  d.hf.resize(length);

  std::uniform_int_distribution<std::size_t> seg_len(spec.segment_min, spec.segment_max);
  std::uniform_int_distribution<std::size_t> pick(0, palette.size() - 1);
  std::size_t prev_level = palette.size();
  for (std::size_t i = 0; i < length;) {
    std::size_t lvl = pick(rng);
    while (palette.size() > 1 && lvl == prev_level) lvl = pick(rng);
    prev_level = lvl;
    const std::size_t end = std::min(length, i + seg_len(rng));
    for (; i < end; ++i) d.levels[i] = palette[lvl];
  }

  std::bernoulli_distribution is_peak(prof.peak_rate);
  std::bernoulli_distribution positive(0.8);
  std::uniform_real_distribution<double> jitter(0.7, 1.3);
  for (std::size_t i = 0; i < length; ++i) {
    if (prof.peak_rate > 0.0 && is_peak(rng)) {
      const double sign = positive(rng) ? 1.0 : -1.0;
      d.peaks[i] = sign * prof.peak_amplitude * jitter(rng);
      d.peak_indices.push_back(i);
    }
  }

  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < length; ++i) {
    d.lf[i] = prof.lf_amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / prof.lf_period + phase);
    d.hf[i] = prof.hf_std * noise(rng);
  }
  d.scale = prof.scale * std::uniform_real_distribution<double>(0.9, 1.1)(rng);

  out.signal.values = recompose(d);
  out.signal.timestamps.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    out.signal.timestamps[i] = t0 + spec.sample_period * static_cast<double>(i);
  }
  return out;
}

struct SynthCorpus {
  std::vector<Trace> traces;
  // Ground truth per trace, one entry per cycle-op phase in order.
  std::vector<std::vector<Decomposition>> truth;
};

inline SynthCorpus generate_corpus_with_truth(const SynthSpec& spec, std::size_t scenarios_per_class,
                                              std::size_t cycles_per_scenario, std::uint64_t seed) {
  spec.validate();
  SynthCorpus corpus;
  for (Condition cls : kAllConditions) {
    for (std::size_t s = 0; s < scenarios_per_class; ++s) {
      Trace t;
      t.scenario.id = std::string(condition_name(cls)) + "-s" + std::to_string(s);
      t.scenario.workload = "wl" + std::to_string(s / 2);
      t.scenario.core_type = s % 2 == 0 ? "big" : "LITTLE";
      t.scenario.condition = cls;
      t.scenario.rounds = spec.rounds;
      t.id = t.scenario.id;
      const double stretch = s % 2 == 0 ? 1.0 : spec.little_core_stretch;
      const std::uint64_t scen_seed = mix_seed(seed, hash_string(t.id));
      Rng len_rng(mix_seed(scen_seed, 0));
      std::normal_distribution<double> idle_noise(0.0, 0.004);
      std::vector<Decomposition> truths;

      auto append_idle = [&]() {
        for (std::size_t i = 0; i < spec.idle_length; ++i) {
          t.signal.timestamps.push_back(spec.sample_period * static_cast<double>(t.signal.size()));
          t.signal.values.push_back(spec.idle_level + idle_noise(len_rng));
        }
        if (spec.idle_length > 0) {
          t.phases.push_back({t.signal.size() - spec.idle_length, t.signal.size(), "idle"});
        }
      };

      append_idle();
      for (std::size_t c = 0; c < cycles_per_scenario; ++c) {
        const auto base_len =
            std::uniform_int_distribution<std::size_t>(spec.cycle_min, spec.cycle_max)(len_rng);
        const auto len = static_cast<std::size_t>(std::lround(stretch * static_cast<double>(base_len)));
        const double t0 = spec.sample_period * static_cast<double>(t.signal.size());
        SynthCycle cyc = generate_cycle(spec, cls, mix_seed(scen_seed, c + 1), len, t0);
        const std::size_t start = t.signal.size();
        t.signal.timestamps.insert(t.signal.timestamps.end(), cyc.signal.timestamps.begin(),
                                   cyc.signal.timestamps.end());
        t.signal.values.insert(t.signal.values.end(), cyc.signal.values.begin(), cyc.signal.values.end());
        t.phases.push_back({start, t.signal.size(), "cycle-op"});
        truths.push_back(std::move(cyc.truth));
        append_idle();
      }
      corpus.traces.push_back(std::move(t));
      corpus.truth.push_back(std::move(truths));
    }
  }
  return corpus;
}

inline std::vector<Trace> generate_corpus(const SynthSpec& spec, std::size_t scenarios_per_class,
                                          std::size_t cycles_per_scenario, std::uint64_t seed) {
  return generate_corpus_with_truth(spec, scenarios_per_class, cycles_per_scenario, seed).traces;
}

}  // namespace cshap
