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

#include "cshap/decompose.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "gtest/gtest.h"

namespace cshap {
namespace {

Series NoisyLevels(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.2);
  std::uniform_real_distribution<double> level(0.0, 10.0);
  std::uniform_int_distribution<std::size_t> len(150, 400);
  Series x;
  while (x.size() < n) {
    const double l = level(rng);
    const std::size_t k = std::min(len(rng), n - x.size());
    for (std::size_t i = 0; i < k; ++i) {
      double v = l + noise(rng) + 0.3 * std::sin(static_cast<double>(x.size()) / 40.0);
      if (rng() % 200 == 0) v += 5.0;
      x.push_back(v);
    }
  }
  return x;
}

bool Contains(const std::vector<std::size_t>& v, std::size_t i) {
  return std::binary_search(v.begin(), v.end(), i);
}

TEST(DecomposeTest, ReconstructsOutsideResampledIndices) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Series x = NoisyLevels(seed, 600 + seed * 7);
    DecomposeParams p;
    p.rng_seed = seed;
    const Decomposition d = decompose(x, p);
    d.validate();
    const Series y = recompose(d);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (Contains(d.resampled_indices, i)) continue;
      ASSERT_NEAR(y[i], x[i], 1e-12) << "seed " << seed << " index " << i;
    }
  }
}

TEST(DecomposeTest, NoChangePointsMeansExactEverywhere) {
  Rng rng(1);
  std::normal_distribution<double> nd(2.0, 0.1);
  Series x(150);
  for (double& v : x) v = nd(rng);
  const Decomposition d = decompose(x, DecomposeParams{});
  EXPECT_TRUE(d.resampled_indices.empty());
  const Series y = recompose(d);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-12);
}

TEST(DecomposeTest, StagesConserveTheirInputs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Series x = NoisyLevels(seed + 500, 800);
    DecomposeParams p;
    Rng rng(seed);
    const PeaksResult pk = extract_peaks(x, p, rng);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(pk.peaks[i] + pk.filtered[i], x[i], 1e-12);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!Contains(pk.peak_indices, i)) {
        EXPECT_EQ(pk.peaks[i], 0.0);
      }
    }
    const ScaleResult sc = extract_scale_lf_hf(pk.filtered, p);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_NEAR(sc.scale * (sc.lf[i] + sc.hf[i]), pk.filtered[i], 1e-12);
    }
  }
}

TEST(LevelsTest, ConstantSeriesHasOneLevelAndNoResampling) {
  const Series x(500, 3.25);
  const Decomposition d = decompose(x, DecomposeParams{});
  for (double v : d.levels) EXPECT_DOUBLE_EQ(v, 3.25);
  EXPECT_TRUE(d.resampled_indices.empty());
  EXPECT_TRUE(d.peak_indices.empty());
}

TEST(LevelsTest, SegmentMeansAndHalo) {
  Series x(400, 1.0);
  for (std::size_t i = 200; i < 400; ++i) x[i] = 3.0;
  DecomposeParams p;
  Rng rng(0);
  const LevelsResult lv = extract_levels(x, ChangePoints{{200}}, p, rng);
  EXPECT_DOUBLE_EQ(lv.levels[0], 1.0);
  EXPECT_DOUBLE_EQ(lv.levels[399], 3.0);
  ASSERT_EQ(lv.resampled_indices.size(), 40u);
  EXPECT_EQ(lv.resampled_indices.front(), 180u);
  EXPECT_EQ(lv.resampled_indices.back(), 219u);
}

TEST(LevelsTest, OverlappingHalosMerge) {
  Series x(300, 0.0);
  for (std::size_t i = 100; i < 130; ++i) x[i] = 1.0;
  DecomposeParams p;
  Rng rng(0);
  const LevelsResult lv = extract_levels(x, ChangePoints{{100, 130}}, p, rng);
  // [80, 120) and [110, 150) merge into [80, 150).
  ASSERT_EQ(lv.resampled_indices.size(), 70u);
  EXPECT_EQ(lv.resampled_indices.front(), 80u);
  EXPECT_EQ(lv.resampled_indices.back(), 149u);
  EXPECT_THROW(extract_levels(x, ChangePoints{{130, 100}}, p, rng), DataError);
}

TEST(PeaksTest, SingleSpikeIsFlagged) {
  Series x(100, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * static_cast<double>(i % 5);
  x[50] = 10.0;
  Rng rng(3);
  const PeaksResult pk = extract_peaks(x, DecomposeParams{}, rng);
  ASSERT_EQ(pk.peak_indices, std::vector<std::size_t>{50});
  EXPECT_GT(pk.peaks[50], 9.0);
}

TEST(PeaksTest, TooShortOrConstantHasNoPeaks) {
  Rng rng(0);
  EXPECT_TRUE(extract_peaks(Series{1.0, 100.0, 2.0}, DecomposeParams{}, rng).peak_indices.empty());
  EXPECT_TRUE(extract_peaks(Series(50, 2.0), DecomposeParams{}, rng).peak_indices.empty());
}

TEST(PeaksTest, TukeyFlagRateOnGaussianNoise) {
  // Expected two-sided tail mass beyond the fences of a normal is about 0.70%.
  Rng rng(11);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::size_t flagged = 0, total = 0;
  for (int rep = 0; rep < 50; ++rep) {
    Series x(2000);
    for (double& v : x) v = nd(rng);
    flagged += extract_peaks(x, DecomposeParams{}, rng).peak_indices.size();
    total += x.size();
  }
  const double rate = static_cast<double>(flagged) / static_cast<double>(total);
  EXPECT_NEAR(rate, 0.007, 0.004);
}

TEST(PeaksTest, LiteralQuartileFlagsHalfTheSamples) {
  Rng rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  Series x(1001);
  for (double& v : x) v = nd(rng);
  DecomposeParams p;
  p.peak_rule.kind = PeakRuleKind::kLiteralQuartile;
  const PeaksResult pk = extract_peaks(x, p, rng);
  EXPECT_NEAR(static_cast<double>(pk.peak_indices.size()) / 1001.0, 0.5, 0.01);
}

TEST(ScaleTest, ZeroSeriesUsesUnitScale) {
  const ScaleResult sc = extract_scale_lf_hf(Series(20, 0.0), DecomposeParams{});
  EXPECT_EQ(sc.scale, 1.0);
  for (double v : sc.lf) EXPECT_EQ(v, 0.0);
}

TEST(ScaleTest, NormalizedAmplitudeAndSmoothLf) {
  Series x(300);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = -4.0 + std::sin(static_cast<double>(i));
  const ScaleResult sc = extract_scale_lf_hf(x, DecomposeParams{});
  EXPECT_NEAR(sc.scale, 5.0, 1e-2);
  // Away from the edges the window-75 average of a period-2pi sine is tiny.
  EXPECT_NEAR(sc.lf[150], -4.0 / sc.scale, 0.02);
}

TEST(DecomposeTest, SeededDeterminism) {
  const Series x = NoisyLevels(77, 1200);
  DecomposeParams p;
  p.rng_seed = 5;
  EXPECT_EQ(decompose(x, p), decompose(x, p));
}

TEST(DecomposeTest, RejectsEmptyAndBadParams) {
  EXPECT_THROW(decompose(Series{}, DecomposeParams{}), DataError);
  DecomposeParams p;
  p.lf_window = 0;
  EXPECT_THROW(decompose(Series(10, 1.0), p), DataError);
}

TEST(DecomposeTest, DebugDumpHasOneRowPerSample) {
  const Series x = NoisyLevels(3, 300);
  const Decomposition d = decompose(x, DecomposeParams{});
  std::ostringstream os;
  write_decomposition_debug(os, x, d);
  const std::string s = os.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 301);
  EXPECT_EQ(s.substr(0, s.find('\n')), "index,original,levels,peaks,lf,hf,scale");
}

}  // namespace
}  // namespace cshap
