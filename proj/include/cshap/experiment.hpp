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

// Window-size experiment: generate an overlap corpus, then for every window
// size train a ConvNet, score the held-out phases and explain a fixed set of
// test windows whose origins exist at every size. Repeated over seeds derived
// from one master seed.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cshap/convnet.hpp"
#include "cshap/dataset.hpp"
#include "cshap/decompose.hpp"
#include "cshap/explain.hpp"
#include "cshap/model.hpp"
#include "cshap/numeric.hpp"
#include "cshap/report.hpp"
#include "cshap/synth.hpp"
#include "cshap/version.hpp"

namespace cshap {

struct ExperimentConfig {
  std::uint64_t seed = 7;
  std::size_t repeats = 3;
  std::vector<std::size_t> window_sizes = {100, 200, 400};

  // corpus
  double overlap = 0.5;
  std::size_t scenarios_per_class = 4;
  std::size_t cycles_per_scenario = 10;

  std::size_t shift = 20;
  std::vector<std::string> test_scenarios;  // empty: first scenario of each class

  ConvNetConfig model = [] {
    ConvNetConfig m;
    m.training.epochs = 8;
    return m;
  }();  // window_size is set per run
  DecomposeParams decompose;

  BackgroundFilter background_filter{std::string("big"), std::nullopt};
  std::size_t background_cycles = 5;

  std::size_t explain_per_class = 12;
  std::size_t explain_stride = 200;  // explained offsets are multiples of this
  unsigned workers = 1;

  void validate() const {
    require(repeats >= 1, "experiment repeats must be >= 1");
    require(!window_sizes.empty(), "experiment needs at least one window size");
    for (std::size_t w : window_sizes) require(w >= 2, "window sizes must be >= 2");
    require(overlap >= 0.0 && overlap <= 1.0, "overlap must be in [0, 1]");
    require(scenarios_per_class >= 1 && cycles_per_scenario >= 2, "corpus needs >= 1 scenario and >= 2 cycles");
    require(shift >= 1, "shift must be >= 1");
    require(background_cycles >= 1, "background cycles must be >= 1");
    require(explain_stride >= 1 && explain_stride % shift == 0, "explain stride must be a multiple of shift");
    require(workers >= 1, "workers must be >= 1");
    decompose.validate();
    ConvNetConfig m = model;
    m.window_size = window_sizes.front();
    m.validate();
  }

  nlohmann::json to_json() const {
    nlohmann::json bg = {{"cycles_per_scenario", background_cycles}};
    bg["core_type"] = background_filter.core_type ? nlohmann::json(*background_filter.core_type) : nlohmann::json();
    bg["rounds"] = background_filter.rounds ? nlohmann::json(*background_filter.rounds) : nlohmann::json();
    nlohmann::json model_json = model.to_json();
    model_json.erase("window_size");
    model_json["training"].erase("seed");
    const CpdParams& cpd = decompose.cpd;
    nlohmann::json dec = {
        {"penalty", cpd.penalty},
        {"subsample", cpd.subsample},
        {"min_segment_length", cpd.min_segment_length},
        {"resample_halo", decompose.resample_halo},
        {"resample_smooth_window", decompose.resample_smooth_window},
        {"peak_rule", decompose.peak_rule.kind == PeakRuleKind::kTukey ? "tukey" : "literal_quartile"},
        {"tukey_k", decompose.peak_rule.tukey_k},
        {"peak_noise_smooth_window", decompose.peak_noise_smooth_window},
        {"lf_window", decompose.lf_window}};
    dec["kernel_bandwidth"] = cpd.kernel_bandwidth ? nlohmann::json(*cpd.kernel_bandwidth) : nlohmann::json();
    return {{"seed", seed},
            {"repeats", repeats},
            {"window_sizes", window_sizes},
            {"corpus",
             {{"overlap", overlap},
              {"scenarios_per_class", scenarios_per_class},
              {"cycles_per_scenario", cycles_per_scenario}}},
            {"windows", {{"shift", shift}}},
            {"split", {{"test_scenarios", test_scenarios}}},
            {"model", model_json},
            {"decompose", dec},
            {"background", bg},
            {"explain",
             {{"windows_per_class", explain_per_class}, {"offset_stride", explain_stride}, {"workers", workers}}}};
  }

  static ExperimentConfig from_json(const nlohmann::json& j);
};

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
  if (!j.is_object()) throw DataError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok |= key == a;
    if (!ok) throw DataError("config: unknown key '" + where + (where.empty() ? "" : ".") + key + "'");
  }
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    detail::check_keys(j, {"seed", "repeats", "window_sizes", "corpus", "windows", "split", "model", "decompose",
                           "background", "explain"},
                       "");
    c.seed = j.value("seed", c.seed);
    c.repeats = j.value("repeats", c.repeats);
    c.window_sizes = j.value("window_sizes", c.window_sizes);
    if (j.contains("corpus")) {
      const auto& s = j["corpus"];
      detail::check_keys(s, {"overlap", "scenarios_per_class", "cycles_per_scenario"}, "corpus");
      c.overlap = s.value("overlap", c.overlap);
      c.scenarios_per_class = s.value("scenarios_per_class", c.scenarios_per_class);
      c.cycles_per_scenario = s.value("cycles_per_scenario", c.cycles_per_scenario);
    }
    if (j.contains("windows")) {
      detail::check_keys(j["windows"], {"shift"}, "windows");
      c.shift = j["windows"].value("shift", c.shift);
    }
    if (j.contains("split")) {
      detail::check_keys(j["split"], {"test_scenarios"}, "split");
      c.test_scenarios = j["split"].value("test_scenarios", c.test_scenarios);
    }
    if (j.contains("model")) {
      detail::check_keys(j["model"], {"channel_sizes", "kernel_size", "fc_size", "training"}, "model");
      if (j["model"].contains("training")) {
        detail::check_keys(j["model"]["training"], {"epochs", "batch_size", "learning_rate", "momentum"},
                           "model.training");
      }
      nlohmann::json m = c.model.to_json();
      m.merge_patch(j["model"]);
      m["window_size"] = c.window_sizes.empty() ? 100 : c.window_sizes.front();
      c.model = ConvNetConfig::from_json(m);
    }
    if (j.contains("decompose")) {
      const auto& d = j["decompose"];
      detail::check_keys(d, {"penalty", "subsample", "min_segment_length", "kernel_bandwidth", "resample_halo",
                             "resample_smooth_window", "peak_rule", "tukey_k", "peak_noise_smooth_window",
                             "lf_window"},
                         "decompose");
      auto& p = c.decompose;
      p.cpd.penalty = d.value("penalty", p.cpd.penalty);
      p.cpd.subsample = d.value("subsample", p.cpd.subsample);
      p.cpd.min_segment_length = d.value("min_segment_length", p.cpd.min_segment_length);
      if (d.contains("kernel_bandwidth") && !d["kernel_bandwidth"].is_null()) {
        p.cpd.kernel_bandwidth = d["kernel_bandwidth"].get<double>();
      }
      p.resample_halo = d.value("resample_halo", p.resample_halo);
      p.resample_smooth_window = d.value("resample_smooth_window", p.resample_smooth_window);
      const std::string rule = d.value("peak_rule", std::string("tukey"));
      if (rule == "tukey") {
        p.peak_rule.kind = PeakRuleKind::kTukey;
      } else if (rule == "literal_quartile") {
        p.peak_rule.kind = PeakRuleKind::kLiteralQuartile;
      } else {
        throw DataError("config: decompose.peak_rule must be 'tukey' or 'literal_quartile'");
      }
      p.peak_rule.tukey_k = d.value("tukey_k", p.peak_rule.tukey_k);
      p.peak_noise_smooth_window = d.value("peak_noise_smooth_window", p.peak_noise_smooth_window);
      p.lf_window = d.value("lf_window", p.lf_window);
    }
    if (j.contains("background")) {
      const auto& b = j["background"];
      detail::check_keys(b, {"core_type", "rounds", "cycles_per_scenario"}, "background");
      c.background_cycles = b.value("cycles_per_scenario", c.background_cycles);
      if (b.contains("core_type")) {
        c.background_filter.core_type =
            b["core_type"].is_null() ? std::nullopt : std::optional<std::string>(b["core_type"].get<std::string>());
      }
      if (b.contains("rounds")) {
        c.background_filter.rounds =
            b["rounds"].is_null() ? std::nullopt : std::optional<int>(b["rounds"].get<int>());
      }
    }
    if (j.contains("explain")) {
      const auto& e = j["explain"];
      detail::check_keys(e, {"windows_per_class", "offset_stride", "workers"}, "explain");
      c.explain_per_class = e.value("windows_per_class", c.explain_per_class);
      c.explain_stride = e.value("offset_stride", c.explain_stride);
      c.workers = e.value("workers", c.workers);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

// FNV-1a of the canonical config JSON, as 16 hex digits.
inline std::string config_hash(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash_string(config.dump())));
  return buf;
}

inline nlohmann::json provenance_record(const nlohmann::json& config, std::uint64_t seed, std::string_view command) {
  return {{"schema_version", kReportSchemaVersion},
          {"command", command},
          {"config_hash", config_hash(config)},
          {"seed", seed},
          {"versions",
           {{"cshap", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__}}}};
}

// Offsets explained at every window size: multiples of the stride where the
// largest window still fits, thinned evenly to `per_class` per class.
struct ExplainSite {
  const PhaseSample* phase = nullptr;
  std::size_t offset = 0;
};

inline std::vector<ExplainSite> explain_sites(const std::vector<PhaseSample>& test, std::size_t max_window,
                                              std::size_t stride, std::size_t per_class) {
  std::array<std::vector<ExplainSite>, kNumClasses> by_class;
  for (const PhaseSample& ph : test) {
    for (std::size_t off = 0; off + max_window <= ph.signal.size(); off += stride) {
      by_class[class_index(ph.scenario.condition)].push_back({&ph, off});
    }
  }
  std::vector<ExplainSite> out;
  for (auto& sites : by_class) {
    if (sites.size() <= per_class) {
      out.insert(out.end(), sites.begin(), sites.end());
      continue;
    }
    for (std::size_t k = 0; k < per_class; ++k) out.push_back(sites[k * sites.size() / per_class]);
  }
  return out;
}

struct SizeRun {
  std::size_t window_size = 0;
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
  Metrics metrics;
  std::vector<double> loss_curve;
  std::size_t background_size = 0;
  std::vector<AttributionResult> attributions;
};

struct RepeatRun {
  std::uint64_t seed = 0;
  std::vector<SizeRun> sizes;
};

struct ConceptDeltaRow {
  std::size_t from = 0, to = 0;
  std::uint64_t seed = 0;  // 0 for the mean over repeats
  ConceptId concept_id = ConceptId::kLevels;
  ConceptDelta delta;
  std::size_t matched = 0;
};

struct ExperimentResult {
  nlohmann::json config;
  std::vector<RepeatRun> repeats;
  std::vector<GlobalSummary> pooled;  // per window size, all repeats
  StabilityReport stability;
  std::vector<ConceptDeltaRow> deltas;
  double accuracy_gain_pp = 0.0;    // last size minus first, mean over repeats
  double levels_delta_mean_abs = 0.0;  // last size minus first, mean over repeats
  LevelsPhiSplit levels_split;         // pooled over all sizes and repeats
};

using ProgressFn = std::function<void(const std::string&)>;

inline std::uint64_t repeat_seed(std::uint64_t master, std::size_t k) { return mix_seed(master, 1000 + k); }

inline RepeatRun run_repeat(const ExperimentConfig& cfg, std::uint64_t seed, const ProgressFn& log = {}) {
  RepeatRun run;
  run.seed = seed;
  const auto traces = generate_corpus(SynthSpec::desk(cfg.overlap), cfg.scenarios_per_class,
                                      cfg.cycles_per_scenario, mix_seed(seed, 1));
  SplitPolicy policy;
  policy.test_scenarios = cfg.test_scenarios;
  const DatasetSplit split = split_policy(traces, policy);
  DecomposeParams dp = cfg.decompose;
  dp.rng_seed = mix_seed(seed, 2);

  const std::size_t max_w = *std::max_element(cfg.window_sizes.begin(), cfg.window_sizes.end());
  const auto sites = explain_sites(split.test, max_w, cfg.explain_stride, cfg.explain_per_class);

  for (std::size_t w : cfg.window_sizes) {
    SizeRun sr;
    sr.window_size = w;
    const WindowProfile profile{w, cfg.shift};
    const auto train = slide_windows(split.train, profile);
    const auto test = slide_windows(split.test, profile);
    sr.train_windows = train.size();
    sr.test_windows = test.size();
    ConvNetConfig mc = cfg.model;
    mc.window_size = w;
    mc.training.seed = mix_seed(seed, 3 + w);
    TrainResult tr = train_convnet(train, mc);
    sr.loss_curve = tr.loss_curve;
    sr.metrics = evaluate(tr.model, test);
    if (log) {
      log("seed " + std::to_string(seed) + " W=" + std::to_string(w) + ": " + std::to_string(train.size()) +
          " train / " + std::to_string(test.size()) + " test windows, accuracy " +
          std::to_string(sr.metrics.accuracy));
    }
    const BackgroundSet bg =
        select_background(split.train, cfg.background_filter, cfg.background_cycles, w, dp, mix_seed(seed, 4));
    sr.background_size = bg.size();
    std::vector<WindowInstance> to_explain;
    for (const ExplainSite& s : sites) {
      to_explain.push_back(make_window(s.phase->signal, s.offset, w, s.phase->scenario.condition,
                                       s.phase->scenario, {s.phase->trace_id, s.phase->phase_id, s.offset}));
    }
    sr.attributions = explain_all(tr.model, to_explain, bg, dp, cfg.workers);
    run.sizes.push_back(std::move(sr));
  }
  return run;
}

inline ExperimentResult run_window_size_experiment(const ExperimentConfig& cfg, const ProgressFn& log = {}) {
  cfg.validate();
  ExperimentResult res;
  res.config = cfg.to_json();
  for (std::size_t k = 0; k < cfg.repeats; ++k) res.repeats.push_back(run_repeat(cfg, repeat_seed(cfg.seed, k), log));

  const std::size_t nsizes = cfg.window_sizes.size();
  std::vector<StabilityRow> rows;
  std::vector<AttributionResult> everything;
  for (std::size_t i = 0; i < nsizes; ++i) {
    std::vector<AttributionResult> pooled;
    double acc = 0.0;
    for (const RepeatRun& r : res.repeats) {
      pooled.insert(pooled.end(), r.sizes[i].attributions.begin(), r.sizes[i].attributions.end());
      acc += r.sizes[i].metrics.accuracy;
    }
    everything.insert(everything.end(), pooled.begin(), pooled.end());
    res.pooled.push_back(aggregate_global(pooled));
    const int lv = concept_index(ConceptId::kLevels);
    rows.push_back({cfg.window_sizes[i], acc / static_cast<double>(res.repeats.size()),
                    res.pooled.back().mean_abs[lv], res.pooled.back().std_abs[lv], pooled.size()});
  }
  res.stability = stability_report(rows);
  res.levels_split = levels_phi_split(everything);

  // Deltas from the first size to each later one, per repeat and averaged.
  for (std::size_t i = 1; i < nsizes; ++i) {
    std::array<ConceptDelta, kNumConcepts> sum{};
    std::size_t matched = 0;
    for (const RepeatRun& r : res.repeats) {
      const RunComparison cmp =
          compare_runs(aggregate_global(r.sizes[0].attributions), aggregate_global(r.sizes[i].attributions));
      for (ConceptId c : kAllConcepts) {
        const int ci = concept_index(c);
        res.deltas.push_back({cfg.window_sizes[0], cfg.window_sizes[i], r.seed, c, cmp.concepts[ci],
                              cmp.matched_windows});
        sum[ci].delta_mean_abs += cmp.concepts[ci].delta_mean_abs;
        sum[ci].mean_diff += cmp.concepts[ci].mean_diff;
        sum[ci].std_diff += cmp.concepts[ci].std_diff;
      }
      matched += cmp.matched_windows;
    }
    const double n = static_cast<double>(res.repeats.size());
    for (ConceptId c : kAllConcepts) {
      ConceptDelta d = sum[concept_index(c)];
      d.delta_mean_abs /= n;
      d.mean_diff /= n;
      d.std_diff /= n;
      res.deltas.push_back({cfg.window_sizes[0], cfg.window_sizes[i], 0, c, d, matched});
      if (i + 1 == nsizes && c == ConceptId::kLevels) res.levels_delta_mean_abs = d.delta_mean_abs;
    }
  }
  if (nsizes >= 2) {
    res.accuracy_gain_pp = 100.0 * (res.stability.rows.back().accuracy - res.stability.rows.front().accuracy);
  }
  return res;
}

// Writes every artifact of a run into `dir`; returns the written file names.
inline std::vector<std::string> write_experiment(const std::filesystem::path& dir, const ExperimentResult& res) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  auto put = [&](const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    files.push_back(name);
  };

  std::ostringstream acc;
  acc << "seed,window_size,train_windows,test_windows,accuracy,final_loss,background_size,explained_windows\n";
  for (const RepeatRun& r : res.repeats) {
    for (const SizeRun& s : r.sizes) {
      acc << r.seed << ',' << s.window_size << ',' << s.train_windows << ',' << s.test_windows << ','
          << format_double(s.metrics.accuracy) << ','
          << format_double(s.loss_curve.empty() ? 0.0 : s.loss_curve.back()) << ',' << s.background_size << ','
          << s.attributions.size() << '\n';
    }
  }
  put("accuracy.csv", acc.str());
  put("stability.csv", res.stability.csv());

  std::ostringstream deltas;
  deltas << "from_window,to_window,seed,concept,delta_mean_abs,mean_diff,std_diff,matched_windows\n";
  for (const ConceptDeltaRow& d : res.deltas) {
    deltas << d.from << ',' << d.to << ',' << (d.seed ? std::to_string(d.seed) : std::string("mean")) << ','
           << concept_name(d.concept_id) << ',' << format_double(d.delta.delta_mean_abs) << ','
           << format_double(d.delta.mean_diff) << ',' << format_double(d.delta.std_diff) << ',' << d.matched << '\n';
  }
  put("shap_deltas.csv", deltas.str());

  const auto sizes = res.config.at("window_sizes").get<std::vector<std::size_t>>();
  for (std::size_t i = 0; i < res.pooled.size(); ++i) {
    const std::string stem = "global_w" + std::to_string(sizes[i]);
    const Artifact a = render_global(res.pooled[i], "Mean |SHAP| per concept, W=" + std::to_string(sizes[i]));
    put(stem + ".csv", a.csv);
    put(stem + ".svg", a.svg);
  }
  for (const RepeatRun& r : res.repeats) {
    for (const SizeRun& s : r.sizes) {
      std::ostringstream os;
      write_attributions(os, s.attributions);
      put("attributions_s" + std::to_string(r.seed) + "_w" + std::to_string(s.window_size) + ".csv", os.str());
    }
  }

  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["window_sizes"] = sizes;
  auto& reps = j["repeats"] = nlohmann::json::array();
  for (const RepeatRun& r : res.repeats) {
    nlohmann::json rj = {{"seed", r.seed}};
    for (const SizeRun& s : r.sizes) {
      rj["accuracy"][std::to_string(s.window_size)] = s.metrics.accuracy;
      rj["confusion"][std::to_string(s.window_size)] = s.metrics.confusion;
    }
    reps.push_back(rj);
  }
  j["stability"] = res.stability.to_json();
  j["accuracy_gain_pp"] = res.accuracy_gain_pp;
  j["levels_delta_mean_abs"] = res.levels_delta_mean_abs;
  j["levels_phi"] = {{"misclassified_mean", res.levels_split.misclassified_mean},
                     {"correct_mean", res.levels_split.correct_mean},
                     {"misclassified", res.levels_split.misclassified},
                     {"correct", res.levels_split.correct}};
  put("summary.json", j.dump(2) + "\n");
  put("stability.txt", res.stability.table());
  return files;
}

}  // namespace cshap
