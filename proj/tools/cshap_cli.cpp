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

// cshap: synthetic corpora, training, concept attributions and reports.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 verification failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cshap/experiment.hpp"
#include "cshap/verify.hpp"

namespace fs = std::filesystem;
using namespace cshap;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitVerify = 3;

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
};

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config.empty()) {
    if (!fs::exists(c.config)) throw DataError("config file not found: " + c.config);
    cfg = load_experiment_config(c.config);
  }
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

template <typename T>
void override_if(std::optional<T> v, T& dst) {
  if (v) dst = *v;
}

void write_provenance(const fs::path& dir, const ExperimentConfig& cfg, std::string_view command) {
  write_text(dir / "provenance.json", provenance_record(cfg.to_json(), cfg.seed, command).dump(2) + "\n");
}

fs::path existing(const std::string& p, const char* what) {
  if (p.empty() || !fs::exists(p)) throw DataError(std::string(what) + " not found: " + p);
  return p;
}

std::vector<ManifestRow> load_manifest(const std::string& path) {
  std::ifstream in(existing(path, "manifest"));
  return read_manifest(in);
}

std::vector<ManifestRow> rows_of(const std::vector<ManifestRow>& rows, std::string_view split) {
  std::vector<ManifestRow> out;
  for (const ManifestRow& r : rows) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

// Training phases named by the manifest, for background sampling.
std::vector<PhaseSample> train_phases(const std::vector<Trace>& traces, const std::vector<ManifestRow>& rows) {
  std::set<std::pair<std::string, std::size_t>> used;
  for (const ManifestRow& r : rows) {
    if (r.split == "train") used.insert({r.origin.trace_id, r.origin.phase_id});
  }
  std::vector<PhaseSample> out;
  for (const Trace& t : traces) {
    for (PhaseSample& ph : cut_phase_samples(t, "cycle-op")) {
      if (used.contains({ph.trace_id, ph.phase_id})) out.push_back(std::move(ph));
    }
  }
  return out;
}

std::size_t window_size_of(const std::vector<ManifestRow>& rows) {
  require(!rows.empty(), "manifest has no rows");
  const std::size_t w = rows.front().window_size;
  for (const ManifestRow& r : rows) require(r.window_size == w, "manifest mixes window sizes");
  return w;
}

// ---- subcommands -------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::optional<double> overlap;
  std::optional<std::size_t> scenarios, cycles;
};

int run_synth(const Common& c, const SynthArgs& a) {
  ExperimentConfig cfg = load_config(c);
  override_if(a.overlap, cfg.overlap);
  override_if(a.scenarios, cfg.scenarios_per_class);
  override_if(a.cycles, cfg.cycles_per_scenario);
  cfg.validate();
  const auto traces =
      generate_corpus(SynthSpec::desk(cfg.overlap), cfg.scenarios_per_class, cfg.cycles_per_scenario, cfg.seed);
  fs::create_directories(a.out);
  for (const Trace& t : traces) write_trace(fs::path(a.out) / (t.id + ".csv"), t);
  write_provenance(a.out, cfg, "synth");
  std::cout << "wrote " << traces.size() << " traces to " << a.out << "\n";
  return 0;
}

struct IngestArgs {
  std::string traces, out;
  std::optional<std::size_t> window, shift;
  std::vector<std::string> test_scenarios;
};

int run_ingest(const Common& c, const IngestArgs& a) {
  ExperimentConfig cfg = load_config(c);
  override_if(a.shift, cfg.shift);
  if (!a.test_scenarios.empty()) cfg.test_scenarios = a.test_scenarios;
  const std::size_t w = a.window.value_or(cfg.window_sizes.front());
  const auto traces = load_traces(existing(a.traces, "trace directory"));
  SplitPolicy policy;
  policy.test_scenarios = cfg.test_scenarios;
  const DatasetSplit split = split_policy(traces, policy);
  const WindowProfile profile{w, cfg.shift};
  const auto train = slide_windows(split.train, profile);
  const auto test = slide_windows(split.test, profile);
  std::vector<ManifestRow> rows;
  for (const auto& win : train) rows.push_back(manifest_row(win, "train"));
  for (const auto& win : test) rows.push_back(manifest_row(win, "test"));
  fs::create_directories(a.out);
  std::ofstream out(fs::path(a.out) / "manifest.csv", std::ios::binary);
  write_manifest(out, rows);
  write_provenance(a.out, cfg, "ingest");
  std::cout << balance_report(train, test);
  return 0;
}

struct TrainArgs {
  std::string traces, manifest, out;
  std::optional<int> epochs;
};

int run_train(const Common& c, const TrainArgs& a) {
  ExperimentConfig cfg = load_config(c);
  override_if(a.epochs, cfg.model.training.epochs);
  const auto rows = load_manifest(a.manifest);
  const auto traces = load_traces(existing(a.traces, "trace directory"));
  const auto train = materialize(rows_of(rows, "train"), traces);
  const auto test = materialize(rows_of(rows, "test"), traces);
  ConvNetConfig mc = cfg.model;
  mc.window_size = window_size_of(rows);
  mc.training.seed = mix_seed(cfg.seed, 3 + mc.window_size);
  const TrainResult tr = train_convnet(train, mc);
  fs::create_directories(a.out);
  tr.model.save(fs::path(a.out) / "model.bin");
  const Metrics m = evaluate(tr.model, test);
  {
    std::ofstream preds(fs::path(a.out) / "predictions.csv", std::ios::binary);
    write_predictions(preds, tr.model, test);
  }
  nlohmann::json j = {{"schema_version", kReportSchemaVersion},
                      {"accuracy", m.accuracy},
                      {"confusion", m.confusion},
                      {"precision", m.precision},
                      {"recall", m.recall},
                      {"test_windows", test.size()},
                      {"loss_curve", tr.loss_curve}};
  write_text(fs::path(a.out) / "metrics.json", j.dump(2) + "\n");
  write_provenance(a.out, cfg, "train");
  std::cout << "test accuracy " << m.accuracy << " on " << test.size() << " windows\n";
  return 0;
}

struct ExplainArgs {
  std::string traces, manifest, model, predictions, out;
  std::optional<std::size_t> background_cycles, max_windows;
  std::optional<std::string> core_type;
  std::optional<unsigned> workers;
};

int run_explain(const Common& c, const ExplainArgs& a) {
  ExperimentConfig cfg = load_config(c);
  override_if(a.background_cycles, cfg.background_cycles);
  override_if(a.workers, cfg.workers);
  if (a.core_type) {
    cfg.background_filter.core_type =
        *a.core_type == "any" ? std::nullopt : std::optional<std::string>(*a.core_type);
  }
  const auto rows = load_manifest(a.manifest);
  if (!a.predictions.empty()) {
    // Static predictions cannot score hybrid windows.
    const ExternalPredictions ext =
        load_external_predictions(rows_of(rows, "test"), existing(a.predictions, "predictions file"));
    if (!ext.supports_masking()) {
      throw UsageError("model '" + ext.kind() + "' cannot score masked windows; it cannot be explained");
    }
  }
  const ConvNet net = ConvNet::load(existing(a.model, "model checkpoint"));
  const auto traces = load_traces(existing(a.traces, "trace directory"));
  auto test_rows = rows_of(rows, "test");
  const std::size_t limit = a.max_windows.value_or(0);
  if (limit > 0 && test_rows.size() > limit) {
    std::vector<ManifestRow> thinned;
    for (std::size_t k = 0; k < limit; ++k) thinned.push_back(test_rows[k * test_rows.size() / limit]);
    test_rows = std::move(thinned);
  }
  const auto test = materialize(test_rows, traces);
  const std::size_t w = window_size_of(rows);
  require(net.config().window_size == w, "model window size differs from the manifest");
  DecomposeParams dp = cfg.decompose;
  dp.rng_seed = mix_seed(cfg.seed, 2);
  const BackgroundSet bg = select_background(train_phases(traces, rows), cfg.background_filter,
                                             cfg.background_cycles, w, dp, mix_seed(cfg.seed, 4));
  for (const std::string& warn : bg.warnings) std::cerr << "warning: " << warn << "\n";
  const auto results = explain_all(net, test, bg, dp, cfg.workers);
  fs::create_directories(a.out);
  std::ofstream out(fs::path(a.out) / "attributions.csv", std::ios::binary);
  write_attributions(out, results);
  write_provenance(a.out, cfg, "explain");
  std::cout << "explained " << results.size() << " windows with |B|=" << bg.size() << "\n";
  return 0;
}

struct ReportArgs {
  std::string attributions, traces, out;
  std::optional<std::size_t> window, bins;
  bool levels_only = false;
};

int run_report(const Common& c, const ReportArgs& a) {
  ExperimentConfig cfg = load_config(c);
  std::ifstream in(existing(a.attributions, "attributions file"));
  const auto results = read_attributions(in);
  std::vector<PhaseSample> phases;
  if (!a.traces.empty()) {
    std::set<std::pair<std::string, std::size_t>> used;
    for (const AttributionResult& r : results) used.insert({r.origin.trace_id, r.origin.phase_id});
    for (const Trace& t : load_traces(existing(a.traces, "trace directory"))) {
      for (PhaseSample& ph : cut_phase_samples(t, "cycle-op")) {
        if (used.contains({ph.trace_id, ph.phase_id})) phases.push_back(std::move(ph));
      }
    }
  }
  ReportOptions opt;
  opt.window_size = a.window.value_or(cfg.window_sizes.front());
  override_if(a.bins, opt.histogram_bins);
  if (a.levels_only) opt.local_concepts = {ConceptId::kLevels};
  DecomposeParams dp = cfg.decompose;
  dp.rng_seed = mix_seed(cfg.seed, 2);
  const nlohmann::json summary = write_report(a.out, results, phases, dp, opt);
  write_provenance(a.out, cfg, "report");
  std::cout << "report for " << results.size() << " windows in " << a.out << "\n";
  return 0;
}

struct ExperimentArgs {
  std::string out;
  std::optional<std::size_t> repeats, explain_per_class;
  std::optional<int> epochs;
  std::optional<unsigned> workers;
};

int run_experiment(const Common& c, const ExperimentArgs& a) {
  ExperimentConfig cfg = load_config(c);
  override_if(a.repeats, cfg.repeats);
  override_if(a.epochs, cfg.model.training.epochs);
  override_if(a.workers, cfg.workers);
  override_if(a.explain_per_class, cfg.explain_per_class);
  cfg.validate();
  const ExperimentResult res = run_window_size_experiment(cfg, [](const std::string& s) { std::cerr << s << "\n"; });
  write_experiment(a.out, res);
  write_provenance(a.out, cfg, "experiment window-size");
  std::cout << res.stability.table();
  char line[160];
  std::snprintf(line, sizeof(line), "accuracy gain %zu->%zu: %+.2f pp; delta mean|phi_Levels|: %+.4f\n",
                cfg.window_sizes.front(), cfg.window_sizes.back(), res.accuracy_gain_pp, res.levels_delta_mean_abs);
  std::cout << line;
  return 0;
}

struct VerifyArgs {
  bool quick = false;
};

int run_verify(const Common& c, const VerifyArgs& a) {
  verify::Options o;
  if (c.seed) o.seed = *c.seed;
  if (a.quick) {
    o.shapley_cases = 5;
    o.pelt_signals = 10;
    o.reconstruction_signals = 10;
    o.gradient_seeds = 1;
    o.gradient_stride = 97;
  }
  bool ok = true;
  for (const verify::CheckResult& r : verify::run_oracle_suites(o)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    ok &= r.passed;
  }
  return ok ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept-based Shapley attributions for current-trace classifiers"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Master seed for all randomness");
    sub->add_option("--config", common.config, "JSON run configuration; flags override it");
  };

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic trace corpus");
  add_common(s);
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--overlap", synth.overlap, "Share of the NoFan level palette overlapping Normal");
  s->add_option("--scenarios", synth.scenarios, "Scenarios per class");
  s->add_option("--cycles", synth.cycles, "Cycles per scenario");

  IngestArgs ingest;
  auto* in = app.add_subcommand("ingest", "Parse traces, cut windows, split and write a manifest");
  add_common(in);
  in->add_option("--traces", ingest.traces, "Trace directory")->required();
  in->add_option("--out", ingest.out, "Output directory")->required();
  in->add_option("--window", ingest.window, "Window size");
  in->add_option("--shift", ingest.shift, "Window shift");
  in->add_option("--test-scenarios", ingest.test_scenarios, "Held-out scenario ids")->delimiter(',');

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Train the reference ConvNet on a manifest");
  add_common(tr);
  tr->add_option("--traces", train.traces, "Trace directory")->required();
  tr->add_option("--manifest", train.manifest, "Manifest from ingest")->required();
  tr->add_option("--out", train.out, "Output directory")->required();
  tr->add_option("--epochs", train.epochs, "Training epochs");

  ExplainArgs explain;
  auto* ex = app.add_subcommand("explain", "Exact concept Shapley values for test windows");
  add_common(ex);
  ex->add_option("--traces", explain.traces, "Trace directory")->required();
  ex->add_option("--manifest", explain.manifest, "Manifest from ingest")->required();
  ex->add_option("--out", explain.out, "Output directory")->required();
  auto* model_opt = ex->add_option("--model", explain.model, "Model checkpoint");
  auto* preds_opt = ex->add_option("--predictions", explain.predictions, "Static predictions file");
  model_opt->excludes(preds_opt);
  ex->add_option("--background-cycles", explain.background_cycles, "Background cycles per scenario");
  ex->add_option("--core-type", explain.core_type, "Background core type filter ('any' disables it)");
  ex->add_option("--max-windows", explain.max_windows, "Explain at most this many test windows");
  ex->add_option("--workers", explain.workers, "Worker threads");

  ReportArgs report;
  auto* rp = app.add_subcommand("report", "Render figures and CSV tables from attributions");
  add_common(rp);
  rp->add_option("--attributions", report.attributions, "Attribution file from explain")->required();
  rp->add_option("--out", report.out, "Output directory")->required();
  rp->add_option("--traces", report.traces, "Trace directory, enables local plots");
  rp->add_option("--window", report.window, "Window size of the explained windows");
  rp->add_option("--bins", report.bins, "Histogram bins");
  rp->add_flag("--levels-only", report.levels_only, "Local plots show only the Levels component");

  ExperimentArgs experiment;
  auto* xp = app.add_subcommand("experiment", "Multi-run experiments");
  xp->require_subcommand(1);
  auto* ws = xp->add_subcommand("window-size", "Accuracy and attributions across window sizes");
  add_common(ws);
  ws->add_option("--out", experiment.out, "Output directory")->required();
  ws->add_option("--repeats", experiment.repeats, "Number of seeds");
  ws->add_option("--epochs", experiment.epochs, "Training epochs");
  ws->add_option("--workers", experiment.workers, "Worker threads for explanations");
  ws->add_option("--explain-per-class", experiment.explain_per_class, "Explained windows per class");

  VerifyArgs verify_args;
  auto* vf = app.add_subcommand("verify", "Run the oracle suites");
  add_common(vf);
  vf->add_flag("--quick", verify_args.quick, "Fewer cases per suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*s) return run_synth(common, synth);
    if (*in) return run_ingest(common, ingest);
    if (*tr) return run_train(common, train);
    if (*ex) {
      if (explain.model.empty() && explain.predictions.empty()) {
        throw UsageError("explain needs --model or --predictions");
      }
      return run_explain(common, explain);
    }
    if (*rp) return run_report(common, report);
    if (*ws) return run_experiment(common, experiment);
    if (*vf) return run_verify(common, verify_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
