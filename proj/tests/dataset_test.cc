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

#include "cshap/dataset.hpp"

#include <filesystem>
#include <random>
#include <sstream>

#include "cshap/synth.hpp"
#include "gtest/gtest.h"

namespace cshap {
namespace {

namespace fs = std::filesystem;

fs::path ScratchDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cshap_dataset_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Signal Ramp(std::size_t n) {
  Signal s;
  for (std::size_t i = 0; i < n; ++i) {
    s.timestamps.push_back(0.5 + 0.001 * static_cast<double>(i));
    s.values.push_back(static_cast<double>(i));
  }
  return s;
}

TEST(TraceParseTest, ReadsPhasesFromColumns) {
  std::istringstream in(
      "timestamp_s,value,phase_kind,phase_id\n"
      "0.0,1.0,idle,0\n"
      "0.1,1.5,cycle-op,1\n"
      "0.2,1.6,cycle-op,1\n"
      "0.3,1.7,cycle-op,2\n"
      "0.4,0.2,,\n");
  const Trace t = parse_trace_stream(in);
  ASSERT_EQ(t.signal.size(), 5u);
  ASSERT_EQ(t.phases.size(), 3u);
  EXPECT_EQ(t.phases[1].start, 1u);
  EXPECT_EQ(t.phases[1].end, 3u);
  EXPECT_EQ(t.phases[2].start, 3u);
  EXPECT_EQ(t.phases[2].end, 4u);
  EXPECT_EQ(cut_phases(t, "cycle-op").size(), 2u);
}

TEST(TraceParseTest, AcceptsReorderedColumnsAndOtherDelimiters) {
  std::istringstream in("value;timestamp_s\n3;1\n4;2\n");
  const Trace t = parse_trace_stream(in, TraceFormat{';'});
  EXPECT_EQ(t.signal.values, (Series{3.0, 4.0}));
  EXPECT_EQ(t.signal.timestamps, (Series{1.0, 2.0}));
  EXPECT_TRUE(t.phases.empty());
}

TEST(TraceParseTest, ErrorsNameTheRow) {
  std::istringstream bad("timestamp_s,value\n0,1\n1,abc\n");
  try {
    parse_trace_stream(bad);
    FAIL() << "expected a parse error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("trace row 2"), std::string::npos) << e.what();
  }
  std::istringstream backwards("timestamp_s,value\n1,1\n1,2\n");
  EXPECT_THROW(parse_trace_stream(backwards), DataError);
  std::istringstream missing("time,value\n1,1\n");
  EXPECT_THROW(parse_trace_stream(missing), DataError);
  std::istringstream empty("timestamp_s,value\n");
  EXPECT_THROW(parse_trace_stream(empty), DataError);
  std::istringstream short_row("timestamp_s,value\n1\n");
  EXPECT_THROW(parse_trace_stream(short_row), DataError);
}

TEST(TraceFileTest, WriteThenReadRoundTrips) {
  const fs::path dir = ScratchDir("roundtrip");
  const SynthSpec spec = SynthSpec::desk(0.5);
  const auto traces = generate_corpus(spec, 1, 2, 17);
  for (const Trace& t : traces) write_trace(dir / (t.id + ".csv"), t);
  const auto loaded = load_traces(dir);
  ASSERT_EQ(loaded.size(), traces.size());
  for (const Trace& t : traces) {
    const auto it = std::find_if(loaded.begin(), loaded.end(), [&](const Trace& l) { return l.id == t.id; });
    ASSERT_NE(it, loaded.end());
    EXPECT_TRUE(*it == t) << t.id;
  }
  EXPECT_THROW(parse_trace(dir / "absent.csv"), DataError);
  EXPECT_THROW(load_traces(dir / "absent"), DataError);
}

TEST(WindowTest, CountFormulaOnRandomCases) {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = rng() % 800;
    WindowProfile p;
    p.window_size = 2 + rng() % 300;
    p.shift = 1 + rng() % 50;
    const auto windows = slide_windows(Ramp(n), p, Condition::kNormal, ScenarioMeta{});
    const std::size_t expected = n < p.window_size ? 0 : (n - p.window_size) / p.shift + 1;
    ASSERT_EQ(windows.size(), expected) << "n=" << n << " W=" << p.window_size << " s=" << p.shift;
    ASSERT_EQ(window_count(n, p), expected);
    for (const auto& w : windows) {
      ASSERT_EQ(w.size(), p.window_size);
      ASSERT_LE(w.origin.offset + p.window_size, n);
    }
  }
}

TEST(WindowTest, CountsShrinkAsWindowsGrow) {
  const Signal phase = Ramp(1500);
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (std::size_t w : {100, 200, 400}) {
    const std::size_t c = window_count(phase.size(), {w, 10});
    EXPECT_LT(c, prev);
    prev = c;
  }
  EXPECT_EQ(window_count(99, {100, 10}), 0u);
  EXPECT_EQ(window_count(100, {100, 10}), 1u);
}

TEST(WindowTest, TimeChannelIsRelativeAndMetricIsCopied) {
  const auto w = slide_windows(Ramp(50), WindowProfile{20, 15}, Condition::kNoFan, ScenarioMeta{}, "tr", 3);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[1].origin.offset, 15u);
  EXPECT_EQ(w[1].origin.id(), "tr:3:15");
  EXPECT_DOUBLE_EQ(w[1].time_channel[0], 0.0);
  EXPECT_NEAR(w[1].time_channel[19], 0.019, 1e-12);
  EXPECT_EQ(w[1].metric_channel[0], 15.0);
  EXPECT_EQ(w[1].label, Condition::kNoFan);
}

TEST(WindowTest, RejectsDegenerateProfiles) {
  EXPECT_THROW(slide_windows(Ramp(10), WindowProfile{5, 0}, Condition::kNormal, ScenarioMeta{}), DataError);
  EXPECT_THROW(slide_windows(Ramp(10), WindowProfile{1, 1}, Condition::kNormal, ScenarioMeta{}), DataError);
}

TEST(SplitTest, FirstAndLastPhasesOfTestScenariosAreHeldOut) {
  const auto traces = generate_corpus(SynthSpec::desk(), 2, 4, 5);
  const DatasetSplit split = split_policy(traces, SplitPolicy{});
  // 3 classes x 2 scenarios x 4 cycles; one scenario per class gives 2 test phases.
  EXPECT_EQ(split.test.size(), 6u);
  EXPECT_EQ(split.train.size(), 18u);
  for (const PhaseSample& ph : split.test) {
    EXPECT_TRUE(ph.phase_id == 0 || ph.phase_id == 3);
    EXPECT_EQ(ph.scenario.id.substr(ph.scenario.id.size() - 3), "-s0");
  }
  for (const PhaseSample& tr : split.train) {
    for (const PhaseSample& te : split.test) {
      EXPECT_FALSE(tr.trace_id == te.trace_id && tr.phase_id == te.phase_id);
    }
  }
  const auto tr = slide_windows(split.train, {100, 10});
  const auto te = slide_windows(split.test, {100, 10});
  const auto counts = class_counts(te, [](const WindowInstance& w) { return w.label; });
  for (std::size_t c : counts) EXPECT_GT(c, 0u);
  EXPECT_NE(balance_report(tr, te).find("NoFan"), std::string::npos);
}

TEST(SplitTest, ScenarioWithOnePhaseCannotBeTested) {
  const auto traces = generate_corpus(SynthSpec::desk(), 1, 1, 5);
  EXPECT_THROW(split_policy(traces, SplitPolicy{}), DataError);
  SplitPolicy p;
  p.test_scenarios = {"Nope"};
  EXPECT_THROW(split_policy(generate_corpus(SynthSpec::desk(), 1, 3, 5), p), DataError);
}

TEST(BackgroundTest, SelectsPerScenarioAndFitsLength) {
  const auto traces = generate_corpus(SynthSpec::desk(), 2, 4, 8);
  const DatasetSplit split = split_policy(traces, SplitPolicy{});
  DecomposeParams p;
  const BackgroundSet b = select_background(split.train, {}, 2, 100, p, 3);
  EXPECT_EQ(b.size(), 12u);  // 6 scenarios x 2
  EXPECT_TRUE(b.warnings.empty());
  for (const auto& d : b.decompositions) EXPECT_EQ(d.size(), 100u);

  BackgroundFilter big;
  big.core_type = "big";
  const BackgroundSet bb = select_background(split.train, big, 10, 100, p, 3);
  EXPECT_FALSE(bb.warnings.empty());
  for (const auto& prov : bb.provenance) EXPECT_EQ(prov.scenario_id.back(), '0');

  BackgroundFilter none;
  none.rounds = 99;
  EXPECT_THROW(select_background(split.train, none, 2, 100, p, 3), DataError);

  const BackgroundSet again = select_background(split.train, {}, 2, 100, p, 3);
  EXPECT_EQ(again.decompositions, b.decompositions);
}

TEST(BackgroundTest, FitLengthTruncatesOrPads) {
  EXPECT_EQ(fit_length(Series{1, 2, 3}, 2), (Series{1, 2}));
  EXPECT_EQ(fit_length(Series{1, 2, 3}, 5), (Series{1, 2, 3, 3, 3}));
  Decomposition d;
  d.levels = {1, 1};
  d.peaks = {0, 2};
  d.lf = {0, 0};
  d.hf = {0, 0};
  d.peak_indices = {1};
  const Decomposition f = fit_decomposition(d, 4);
  EXPECT_EQ(f.peak_indices, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_NO_THROW(f.validate());
}

TEST(BackgroundTest, CacheRoundTripAndKeyMismatch) {
  const fs::path dir = ScratchDir("cache");
  const auto traces = generate_corpus(SynthSpec::desk(), 1, 3, 2);
  const DatasetSplit split = split_policy(traces, SplitPolicy{});
  const BackgroundSet b = select_background(split.train, {}, 1, 120, DecomposeParams{}, 4);
  BackgroundKey key;
  key.seed = 4;
  key.window_size = 120;
  key.cycles_per_scenario = 1;
  const fs::path path = dir / key.file_name();
  save_background(path, b, key);
  const auto loaded = load_background(path, key);
  ASSERT_TRUE(loaded.has_value());
  EXPECT_EQ(loaded->decompositions, b.decompositions);
  BackgroundKey other = key;
  other.seed = 5;
  EXPECT_NE(other.file_name(), key.file_name());
  EXPECT_FALSE(load_background(path, other).has_value());
  EXPECT_FALSE(load_background(dir / "missing.json", key).has_value());
}

TEST(ManifestTest, RoundTripAndMaterialize) {
  const auto traces = generate_corpus(SynthSpec::desk(), 1, 3, 6);
  const DatasetSplit split = split_policy(traces, SplitPolicy{});
  const auto windows = slide_windows(split.test, {200, 50});
  std::vector<ManifestRow> rows;
  for (const auto& w : windows) rows.push_back(manifest_row(w, "test"));
  std::stringstream ss;
  write_manifest(ss, rows);
  const auto back = read_manifest(ss);
  EXPECT_EQ(back, rows);
  const auto again = materialize(back, traces);
  ASSERT_EQ(again.size(), windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    EXPECT_EQ(again[i].metric_channel, windows[i].metric_channel);
    EXPECT_EQ(again[i].time_channel, windows[i].time_channel);
    EXPECT_EQ(again[i].origin, windows[i].origin);
  }
  rows[0].origin.offset = 1u << 30;
  EXPECT_THROW(materialize(rows, traces), DataError);
  std::istringstream bad("nope\n");
  EXPECT_THROW(read_manifest(bad), DataError);
}

TEST(ConditionTest, NamesRoundTrip) {
  for (Condition c : kAllConditions) EXPECT_EQ(parse_condition(condition_name(c)), c);
  EXPECT_THROW(parse_condition("Broken"), DataError);
  ScenarioMeta m{"a", "wl0", "big", Condition::kUnderVolt, 2};
  const ScenarioMeta back = scenario_from_json(to_json(m));
  EXPECT_EQ(back, m);
}

}  // namespace
}  // namespace cshap
