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

#include "cshap/explain.hpp"

#include <random>
#include <sstream>

#include "cshap/convnet.hpp"
#include "cshap/oracle.hpp"
#include "cshap/synth.hpp"
#include "gtest/gtest.h"

namespace cshap {
namespace {

class ConstantModel final : public Classifier {
 public:
  Probabilities predict_values(std::span<const double>, std::span<const double>) const override {
    return {0.2, 0.5, 0.3};
  }
  std::string kind() const override { return "constant"; }
};

// Shared fixture data: a small overlap corpus, its split and a background pool.
struct Corpus {
  std::vector<Trace> traces;
  DatasetSplit split;
  BackgroundSet background;
  std::vector<WindowInstance> test;
};

const Corpus& SmallCorpus() {
  static const Corpus c = [] {
    Corpus out;
    out.traces = generate_corpus(SynthSpec::desk(0.5), 2, 4, 31);
    out.split = split_policy(out.traces, SplitPolicy{});
    out.background = select_background(out.split.train, {}, 2, 100, DecomposeParams{}, 7);
    out.test = slide_windows(out.split.test, {100, 150});
    return out;
  }();
  return c;
}

CoalitionValues RandomGame(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CoalitionValues v{};
  for (double& x : v) x = u(rng);
  return v;
}

TEST(ShapleyTest, ClosedFormMatchesPermutations) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const CoalitionValues v = RandomGame(seed);
    const ConceptValues a = shapley_values(v);
    const ConceptValues b = permutation_shapley_values(v);
    for (int i = 0; i < kNumConcepts; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(ShapleyTest, Efficiency) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const CoalitionValues v = RandomGame(seed);
    const ConceptValues phi = shapley_values(v);
    double s = 0.0;
    for (double p : phi) s += p;
    EXPECT_NEAR(s, v[kNumCoalitions - 1] - v[0], 1e-12);
  }
}

TEST(ShapleyTest, AdditiveGameReturnsWeights) {
  const ConceptValues w = {0.5, -1.25, 3.0, 0.0, 2.0};
  const ConceptValues phi = shapley_values(oracle::additive_game(w));
  for (int i = 0; i < kNumConcepts; ++i) EXPECT_NEAR(phi[i], w[i], 1e-12);
}

TEST(ShapleyTest, SymmetricConceptsGetEqualShares) {
  // Peaks and LF enter symmetrically, with an interaction term.
  CoalitionValues v{};
  for (std::uint32_t s = 0; s < kNumCoalitions; ++s) {
    const bool pk = s & 2u, lf = s & 8u;
    v[s] = 0.7 * pk + 0.7 * lf + 0.4 * (pk && lf) + 0.1 * std::popcount(s & 0b10101u);
  }
  const ConceptValues phi = shapley_values(v);
  EXPECT_NEAR(phi[1], phi[3], 1e-12);
  EXPECT_NEAR(phi[1], 0.9, 1e-12);
}

TEST(ShapleyTest, DummyConceptGetsZero) {
  CoalitionValues v = RandomGame(3);
  // Make HF (bit 4) a dummy: v(S + HF) = v(S).
  for (std::uint32_t s = 0; s < kNumCoalitions; ++s) {
    if (s & 16u) v[s] = v[s & ~16u];
  }
  EXPECT_NEAR(shapley_values(v)[4], 0.0, 1e-15);
}

TEST(ShapleyTest, Linearity) {
  const CoalitionValues a = RandomGame(1), b = RandomGame(2);
  CoalitionValues mix{};
  for (std::size_t s = 0; s < kNumCoalitions; ++s) mix[s] = 2.0 * a[s] - 0.5 * b[s];
  const auto pa = shapley_values(a), pb = shapley_values(b), pm = shapley_values(mix);
  for (int i = 0; i < kNumConcepts; ++i) EXPECT_NEAR(pm[i], 2.0 * pa[i] - 0.5 * pb[i], 1e-12);
}

TEST(CoalitionTest, FullEmptyAndSelfBackground) {
  const Corpus& c = SmallCorpus();
  const LevelsOracle oracle(0.74, 0.92, 0.05);
  ConvNetConfig cfg;
  cfg.window_size = 100;
  ConvNet net(cfg);
  net.init_random(1);
  for (const Classifier* m : {static_cast<const Classifier*>(&oracle), static_cast<const Classifier*>(&net)}) {
    for (std::size_t k = 0; k < 3; ++k) {
      const WindowInstance& w = c.test[k * 7];
      Rng rng(k);
      const Decomposition d = decompose(w.metric_channel, DecomposeParams{}, rng);
      const auto full = coalition_value(*m, d, c.background, ConceptMask::all(), w.time_channel);
      const auto direct = m->predict_values(w.time_channel, recompose(d));
      for (int cls = 0; cls < kNumClasses; ++cls) EXPECT_NEAR(full[cls], direct[cls], 1e-12);

      // Empty coalition ignores the instance.
      const Decomposition other = c.background.decompositions[0];
      const auto e1 = coalition_value(*m, d, c.background, ConceptMask::none(), w.time_channel);
      const auto e2 = coalition_value(*m, other, c.background, ConceptMask::none(), w.time_channel);
      EXPECT_EQ(e1, e2);

      BackgroundSet self;
      self.window_size = 100;
      self.decompositions = {d};
      const CoalitionGame g = evaluate_coalitions(*m, d, self, w.time_channel);
      for (const auto& v : g.values) {
        for (int cls = 0; cls < kNumClasses; ++cls) EXPECT_NEAR(v[cls], g.values[0][cls], 1e-12);
      }
    }
  }
}

TEST(CoalitionTest, PairedGameMatchesPerCoalitionValues) {
  const Corpus& c = SmallCorpus();
  const LevelsOracle oracle(0.74, 0.92, 0.05);
  const WindowInstance& w = c.test[3];
  Rng rng(5);
  const Decomposition d = decompose(w.metric_channel, DecomposeParams{}, rng);
  const CoalitionGame g = evaluate_coalitions(oracle, d, c.background, w.time_channel);
  EXPECT_EQ(g.model_evaluations, kNumCoalitions * c.background.size());
  for (std::uint32_t s = 0; s < kNumCoalitions; ++s) {
    const auto v = coalition_value(oracle, d, c.background, ConceptMask(s), w.time_channel);
    for (int cls = 0; cls < kNumClasses; ++cls) EXPECT_NEAR(g.values[s][cls], v[cls], 1e-12);
  }
}

TEST(CoalitionTest, Errors) {
  const Corpus& c = SmallCorpus();
  const WindowInstance& w = c.test[0];
  const LevelsOracle oracle(0.74, 0.92);
  EXPECT_THROW(exact_shap(oracle, w, BackgroundSet{}, DecomposeParams{}), DataError);
  const BackgroundSet wrong = select_background(c.split.train, {}, 1, 120, DecomposeParams{}, 1);
  EXPECT_THROW(exact_shap(oracle, w, wrong, DecomposeParams{}), DataError);
  const ExternalPredictions ext({});
  EXPECT_THROW(exact_shap(ext, w, c.background, DecomposeParams{}), UsageError);
}

TEST(ExactShapTest, ConstantModelGivesZeroAttributions) {
  const Corpus& c = SmallCorpus();
  const ConstantModel m;
  for (std::size_t k = 0; k < 5; ++k) {
    const AttributionResult r = exact_shap(m, c.test[k], c.background, DecomposeParams{});
    for (const auto& row : r.phi) {
      for (double p : row) EXPECT_NEAR(p, 0.0, 1e-12);
    }
  }
}

TEST(ExactShapTest, MatchesPermutationOracleAndIsEfficient) {
  const Corpus& c = SmallCorpus();
  ConvNetConfig cfg;
  cfg.window_size = 100;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ConvNet net(cfg);
    net.init_random(seed);
    const WindowInstance& w = c.test[(seed * 5) % c.test.size()];
    DecomposeParams p;
    p.rng_seed = seed;
    const AttributionResult a = exact_shap(net, w, c.background, p);
    const AttributionResult b = shap_permutation_oracle(net, w, c.background, p);
    for (int cls = 0; cls < kNumClasses; ++cls) {
      for (int i = 0; i < kNumConcepts; ++i) EXPECT_NEAR(a.phi[cls][i], b.phi[cls][i], 1e-9);
    }
    EXPECT_LE(a.efficiency_gap(), 1e-9);
    EXPECT_EQ(a.model_evaluations, 32 * c.background.size());
    EXPECT_EQ(a.ground_truth, w.label);
    EXPECT_EQ(a.origin, w.origin);
  }
}

TEST(ExactShapTest, Deterministic) {
  const Corpus& c = SmallCorpus();
  const LevelsOracle oracle(0.74, 0.92, 0.05);
  const auto a = exact_shap(oracle, c.test[2], c.background, DecomposeParams{});
  const auto b = exact_shap(oracle, c.test[2], c.background, DecomposeParams{});
  EXPECT_EQ(a.phi, b.phi);
}

TEST(ExplainAllTest, WorkerCountDoesNotChangeResults) {
  const Corpus& c = SmallCorpus();
  ConvNetConfig cfg;
  cfg.window_size = 100;
  ConvNet net(cfg);
  net.init_random(8);
  std::vector<WindowInstance> some(c.test.begin(), c.test.begin() + 8);
  const auto one = explain_all(net, some, c.background, DecomposeParams{}, 1);
  const auto three = explain_all(net, some, c.background, DecomposeParams{}, 3);
  ASSERT_EQ(one.size(), three.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].phi, three[i].phi);
    EXPECT_EQ(one[i].origin, some[i].origin);
  }
}

TEST(GlobalTest, SingleWindowAndOrderInvariance) {
  const Corpus& c = SmallCorpus();
  const LevelsOracle oracle(0.74, 0.92, 0.05);
  std::vector<WindowInstance> some(c.test.begin(), c.test.begin() + 6);
  auto results = explain_all(oracle, some, c.background, DecomposeParams{});
  const GlobalSummary single = aggregate_global({results[0]});
  for (int i = 0; i < kNumConcepts; ++i) {
    EXPECT_EQ(single.mean_abs[i], std::abs(results[0].phi[class_index(results[0].ground_truth)][i]));
    EXPECT_EQ(single.std_abs[i], 0.0);
  }
  const GlobalSummary fwd = aggregate_global(results);
  std::reverse(results.begin(), results.end());
  const GlobalSummary rev = aggregate_global(results);
  for (int i = 0; i < kNumConcepts; ++i) {
    EXPECT_NEAR(fwd.mean_abs[i], rev.mean_abs[i], 1e-15);
    EXPECT_GE(fwd.mean_abs[i], 0.0);
  }
}

TEST(GlobalTest, LevelsOracleAttributesMostlyToLevels) {
  const Corpus& c = SmallCorpus();
  const LevelsOracle oracle(0.74, 0.92, 0.05);
  const auto results = explain_all(oracle, c.test, c.background, DecomposeParams{});
  const GlobalSummary g = aggregate_global(results);
  double total = 0.0;
  for (double v : g.mean_abs) total += v;
  const int top = static_cast<int>(std::max_element(g.mean_abs.begin(), g.mean_abs.end()) - g.mean_abs.begin());
  EXPECT_EQ(top, concept_index(ConceptId::kLevels));
  EXPECT_GE(g.mean_abs[0] / total, 0.5);
}

TEST(CompareTest, IdentityAntisymmetryAndMatching) {
  const Corpus& c = SmallCorpus();
  ConvNetConfig cfg;
  cfg.window_size = 100;
  ConvNet n1(cfg), n2(cfg);
  n1.init_random(1);
  n2.init_random(2);
  std::vector<WindowInstance> some(c.test.begin(), c.test.begin() + 6);
  const GlobalSummary a = aggregate_global(explain_all(n1, some, c.background, DecomposeParams{}));
  const GlobalSummary b = aggregate_global(explain_all(n2, some, c.background, DecomposeParams{}));
  const RunComparison same = compare_runs(a, a);
  for (const auto& d : same.concepts) {
    EXPECT_EQ(d.delta_mean_abs, 0.0);
    EXPECT_EQ(d.mean_diff, 0.0);
    EXPECT_EQ(d.std_diff, 0.0);
  }
  const RunComparison ab = compare_runs(a, b), ba = compare_runs(b, a);
  EXPECT_EQ(ab.matched_windows, 6u);
  for (int i = 0; i < kNumConcepts; ++i) {
    EXPECT_NEAR(ab.concepts[i].delta_mean_abs, -ba.concepts[i].delta_mean_abs, 1e-15);
    EXPECT_NEAR(ab.concepts[i].mean_diff, -ba.concepts[i].mean_diff, 1e-15);
    EXPECT_NEAR(ab.concepts[i].std_diff, ba.concepts[i].std_diff, 1e-15);
  }
  GlobalSummary moved = b;
  for (auto& w : moved.windows) w.origin.offset += 1;
  EXPECT_THROW(compare_runs(a, moved), DataError);
}

TEST(AttributionFileTest, RoundTrip) {
  const Corpus& c = SmallCorpus();
  const LevelsOracle oracle(0.74, 0.92, 0.05);
  std::vector<WindowInstance> some(c.test.begin(), c.test.begin() + 4);
  const auto results = explain_all(oracle, some, c.background, DecomposeParams{});
  std::stringstream ss;
  write_attributions(ss, results);
  const auto back = read_attributions(ss);
  ASSERT_EQ(back.size(), results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    EXPECT_EQ(back[i].phi, results[i].phi);
    EXPECT_EQ(back[i].base_value, results[i].base_value);
    EXPECT_EQ(back[i].full_value, results[i].full_value);
    EXPECT_EQ(back[i].model_output, results[i].model_output);
    EXPECT_EQ(back[i].origin, results[i].origin);
    EXPECT_EQ(back[i].ground_truth, results[i].ground_truth);
    EXPECT_EQ(back[i].levels_mean, results[i].levels_mean);
  }
  EXPECT_EQ(parse_origin("a:b:3:4").trace_id, "a:b");
  EXPECT_THROW(parse_origin("nocolon"), DataError);
}

}  // namespace
}  // namespace cshap
