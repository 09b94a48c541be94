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

// Explains a mean-threshold classifier on a small synthetic corpus and prints
// the global concept summary. Almost all attribution should land on Levels.

#include <cstdio>

#include "cshap/cshap.hpp"

using namespace cshap;

int main() {
  const auto traces = generate_corpus(SynthSpec::desk(0.0), 4, 7, 11);
  const DatasetSplit split = split_policy(traces, {});
  DecomposeParams p;
  p.rng_seed = 11;
  const BackgroundSet bg = select_background(split.train, {std::string("big"), std::nullopt}, 5, 100, p, 11);
  const auto test = slide_windows(split.test, {100, 100});

  // Thresholds halfway between the class palettes.
  const LevelsOracle oracle = make_levels_oracle(0.74, 0.92, 0.05);
  const auto results = explain_all(oracle, test, bg, p);
  const GlobalSummary g = aggregate_global(results);

  std::printf("%zu windows, |B| = %zu\n", results.size(), bg.size());
  std::printf("%-8s %10s %10s\n", "concept", "mean|phi|", "std|phi|");
  for (ConceptId c : kAllConcepts) {
    const int i = concept_index(c);
    std::printf("%-8s %10.4f %10.4f\n", std::string(concept_name(c)).c_str(), g.mean_abs[i], g.std_abs[i]);
  }
  write_artifact(".", "levels_oracle_global", render_global(g));
  return 0;
}
