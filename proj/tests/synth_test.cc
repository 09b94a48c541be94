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

#include "cshap/synth.hpp"

#include <set>

#include "gtest/gtest.h"

namespace cshap {
namespace {

TEST(SynthCycleTest, TruthRecomposesExactly) {
  const SynthSpec spec = SynthSpec::desk(0.5);
  for (Condition c : kAllConditions) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const SynthCycle cyc = generate_cycle(spec, c, seed);
      EXPECT_GE(cyc.signal.size(), spec.cycle_min);
      EXPECT_LE(cyc.signal.size(), spec.cycle_max);
      EXPECT_EQ(recompose(cyc.truth), cyc.signal.values);
      EXPECT_NO_THROW(cyc.signal.validate());
    }
  }
}

TEST(SynthCycleTest, LevelsComeFromThePaletteWithoutImmediateRepeats) {
  const SynthSpec spec = SynthSpec::desk();
  const SynthCycle cyc = generate_cycle(spec, Condition::kUnderVolt, 4, 3000);
  const auto pal = spec.palette(Condition::kUnderVolt);
  const std::set<double> allowed(pal.begin(), pal.end());
  std::size_t run = 1;
  for (std::size_t i = 0; i < cyc.truth.levels.size(); ++i) {
    EXPECT_TRUE(allowed.contains(cyc.truth.levels[i]));
    if (i > 0 && cyc.truth.levels[i] == cyc.truth.levels[i - 1]) {
      ++run;
    } else if (i > 0) {
      EXPECT_GE(run, spec.segment_min);
      EXPECT_LE(run, spec.segment_max);
      run = 1;
    }
  }
}

TEST(SynthSpecTest, OverlapSharesNormalLevelsWithNoFan) {
  const SynthSpec none = SynthSpec::desk(0.0);
  const auto normal = none.palette(Condition::kNormal);
  const auto nofan0 = none.palette(Condition::kNoFan);
  EXPECT_LT(*std::max_element(normal.begin(), normal.end()), *std::min_element(nofan0.begin(), nofan0.end()));

  const auto nofan = SynthSpec::desk(0.5).palette(Condition::kNoFan);
  std::size_t shared = 0;
  for (double v : nofan) shared += std::count(normal.begin(), normal.end(), v);
  EXPECT_EQ(shared, 2u);
  EXPECT_EQ(SynthSpec::desk(0.5).palette(Condition::kUnderVolt), none.palette(Condition::kUnderVolt));
}

TEST(SynthSpecTest, RejectsBadOverlap) {
  EXPECT_THROW(SynthSpec::desk(1.5).validate(), DataError);
  EXPECT_THROW(generate_cycle(SynthSpec::desk(-0.1), Condition::kNormal, 1), DataError);
}

TEST(SynthCorpusTest, LayoutAndGroundTruth) {
  const SynthSpec spec = SynthSpec::desk(0.5);
  const SynthCorpus corpus = generate_corpus_with_truth(spec, 2, 3, 11);
  ASSERT_EQ(corpus.traces.size(), 6u);
  for (std::size_t k = 0; k < corpus.traces.size(); ++k) {
    const Trace& t = corpus.traces[k];
    EXPECT_NO_THROW(t.validate());
    const auto cycles = cut_phases(t, "cycle-op");
    ASSERT_EQ(cycles.size(), 3u);
    ASSERT_EQ(corpus.truth[k].size(), 3u);
    for (std::size_t c = 0; c < cycles.size(); ++c) {
      EXPECT_EQ(recompose(corpus.truth[k][c]), cycles[c].values);
    }
    EXPECT_EQ(cut_phases(t, "idle").size(), 4u);
    if (t.scenario.core_type == "LITTLE") {
      EXPECT_GE(cycles[0].size(), static_cast<std::size_t>(spec.cycle_min * spec.little_core_stretch) - 1);
    }
  }
  EXPECT_EQ(corpus.traces[0].scenario.id, "Normal-s0");
  EXPECT_EQ(corpus.traces[3].scenario.condition, Condition::kNoFan);
}

TEST(SynthCorpusTest, SeededDeterminism) {
  const SynthSpec spec = SynthSpec::desk(0.25);
  EXPECT_EQ(generate_corpus(spec, 1, 2, 3), generate_corpus(spec, 1, 2, 3));
  EXPECT_NE(generate_corpus(spec, 1, 2, 3), generate_corpus(spec, 1, 2, 4));
}

// Window-level mean of the levels component, per class.
std::vector<double> WindowLevelMeans(const SynthCorpus& corpus, Condition cls, std::size_t w) {
  std::vector<double> out;
  for (std::size_t k = 0; k < corpus.traces.size(); ++k) {
    if (corpus.traces[k].scenario.condition != cls) continue;
    for (const Decomposition& d : corpus.truth[k]) {
      for (std::size_t off = 0; off + w <= d.size(); off += w) {
        out.push_back(mean(std::span<const double>(d.levels).subspan(off, w)));
      }
    }
  }
  return out;
}

TEST(SynthCorpusTest, OverlapMakesLevelRangesIntersect) {
  const auto overlapping = generate_corpus_with_truth(SynthSpec::desk(0.5), 1, 4, 21);
  const auto n = WindowLevelMeans(overlapping, Condition::kNormal, 100);
  const auto f = WindowLevelMeans(overlapping, Condition::kNoFan, 100);
  EXPECT_GT(*std::max_element(n.begin(), n.end()), *std::min_element(f.begin(), f.end()));

  const auto separate = generate_corpus_with_truth(SynthSpec::desk(0.0), 1, 4, 21);
  const auto n0 = WindowLevelMeans(separate, Condition::kNormal, 100);
  const auto f0 = WindowLevelMeans(separate, Condition::kNoFan, 100);
  EXPECT_LT(*std::max_element(n0.begin(), n0.end()), *std::min_element(f0.begin(), f0.end()));
}

}  // namespace
}  // namespace cshap
