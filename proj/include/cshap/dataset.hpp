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

// Trace ingestion, phase compartmentalization, sliding windows, the held-out
// test split and the background pool used for concept masking.
//
// Trace file: delimiter-separated text with a header row naming the columns
//   timestamp_s,value[,phase_kind[,phase_id]]
// Consecutive rows sharing (phase_kind, phase_id) with a non-empty kind form
// one phase. Scenario metadata lives in a JSON sidecar with the same stem:
//   {"id": "...", "workload": "...", "core_type": "big", "condition": "NoFan", "rounds": 1}

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cshap/decompose.hpp"
#include "cshap/error.hpp"
#include "cshap/numeric.hpp"
#include "cshap/signal.hpp"

namespace cshap {

enum class Condition : std::uint8_t { kNormal = 0, kNoFan = 1, kUnderVolt = 2 };
inline constexpr int kNumClasses = 3;
inline constexpr std::array<Condition, kNumClasses> kAllConditions = {
    Condition::kNormal, Condition::kNoFan, Condition::kUnderVolt};

inline constexpr std::string_view condition_name(Condition c) {
  switch (c) {
    case Condition::kNormal: return "Normal";
    case Condition::kNoFan: return "NoFan";
    case Condition::kUnderVolt: return "UnderVolt";
  }
  return "?";
}

inline Condition parse_condition(std::string_view s) {
  for (Condition c : kAllConditions) {
    if (condition_name(c) == s) return c;
  }
  throw DataError("unknown condition '" + std::string(s) + "' (expected Normal, NoFan or UnderVolt)");
}

inline constexpr int class_index(Condition c) { return static_cast<int>(c); }

struct ScenarioMeta {
  std::string id;
  std::string workload;
  std::string core_type;
  Condition condition = Condition::kNormal;
  int rounds = 1;

  bool operator==(const ScenarioMeta&) const = default;
};

inline nlohmann::json to_json(const ScenarioMeta& m) {
  return {{"id", m.id},
          {"workload", m.workload},
          {"core_type", m.core_type},
          {"condition", std::string(condition_name(m.condition))},
          {"rounds", m.rounds}};
}

inline ScenarioMeta scenario_from_json(const nlohmann::json& j) {
  try {
    ScenarioMeta m;
    m.id = j.at("id").get<std::string>();
    m.workload = j.value("workload", "");
    m.core_type = j.value("core_type", "");
    m.condition = parse_condition(j.at("condition").get<std::string>());
    m.rounds = j.value("rounds", 1);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scenario metadata: ") + e.what());
  }
}

struct PhaseMark {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  std::string kind;

  bool operator==(const PhaseMark&) const = default;
};

struct Trace {
  std::string id;
  ScenarioMeta scenario;
  Signal signal;
  std::vector<PhaseMark> phases;

  void validate() const {
    signal.validate();
    std::size_t prev_end = 0;
    for (const PhaseMark& m : phases) {
      require(m.start < m.end && m.end <= signal.size(), "phase mark out of bounds");
      require(m.start >= prev_end, "phase marks overlap or are out of order");
      prev_end = m.end;
    }
  }

  bool operator==(const Trace&) const = default;
};

struct TraceFormat {
  char delimiter = ',';
};

// Parses trace rows from a stream. Errors name the 1-based data row.
inline Trace parse_trace_stream(std::istream& in, const TraceFormat& fmt = {}) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("trace: empty file (missing header)");
  const auto header = split_fields(line, fmt.delimiter);
  int col_t = -1, col_v = -1, col_kind = -1, col_id = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string name(header[c]);
    name.erase(std::remove_if(name.begin(), name.end(), [](char ch) { return ch == '\r' || ch == ' '; }),
               name.end());
    if (name == "timestamp_s") col_t = static_cast<int>(c);
    else if (name == "value") col_v = static_cast<int>(c);
    else if (name == "phase_kind") col_kind = static_cast<int>(c);
    else if (name == "phase_id") col_id = static_cast<int>(c);
  }
  if (col_t < 0 || col_v < 0) throw DataError("trace header must name timestamp_s and value columns");

  Trace t;
  std::string cur_kind, cur_id;
  std::size_t cur_start = 0;
  std::size_t row = 0;
  auto close_phase = [&](std::size_t end) {
    if (!cur_kind.empty() && end > cur_start) t.phases.push_back({cur_start, end, cur_kind});
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto fields = split_fields(line, fmt.delimiter);
    const auto need = static_cast<std::size_t>(std::max(col_t, col_v) + 1);
    const std::string where = "trace row " + std::to_string(row) + " (line " + std::to_string(row + 1) + ")";
    if (fields.size() < need) {
      throw DataError(where + ": expected " + std::to_string(need) + " fields, got " +
                      std::to_string(fields.size()));
    }
    double ts = 0.0, v = 0.0;
    try {
      ts = parse_double(fields[col_t]);
      v = parse_double(fields[col_v]);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!std::isfinite(ts) || !std::isfinite(v)) throw DataError(where + ": non-finite value");
    if (!t.signal.timestamps.empty() && ts <= t.signal.timestamps.back()) {
      throw DataError(where + ": timestamp " + format_double(ts) + " is not after the previous row");
    }
    std::string kind = col_kind >= 0 && static_cast<std::size_t>(col_kind) < fields.size()
                           ? std::string(fields[col_kind]) : std::string();
    std::string pid = col_id >= 0 && static_cast<std::size_t>(col_id) < fields.size()
                          ? std::string(fields[col_id]) : std::string();
    const std::size_t idx = t.signal.size();
    if (kind != cur_kind || pid != cur_id) {
      close_phase(idx);
      cur_kind = kind;
      cur_id = pid;
      cur_start = idx;
    }
    t.signal.timestamps.push_back(ts);
    t.signal.values.push_back(v);
  }
  close_phase(t.signal.size());
  if (t.signal.size() == 0) throw DataError("trace has no data rows");
  return t;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& trace_path) {
  auto p = trace_path;
  p.replace_extension(".json");
  return p;
}

// Reads a trace file plus its JSON sidecar (if present).
inline Trace parse_trace(const std::filesystem::path& path, const TraceFormat& fmt = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace file " + path.string());
  Trace t;
  try {
    t = parse_trace_stream(in, fmt);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  t.id = path.stem().string();
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    std::ifstream sj(side);
    nlohmann::json j;
    try {
      sj >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(side.string() + ": " + e.what());
    }
    t.scenario = scenario_from_json(j);
  } else {
    t.scenario.id = t.id;
  }
  t.validate();
  return t;
}

inline void write_trace_stream(std::ostream& os, const Trace& t, char delim = ',') {
  os << "timestamp_s" << delim << "value" << delim << "phase_kind" << delim << "phase_id\n";
  std::size_t next = 0;
  for (std::size_t i = 0; i < t.signal.size(); ++i) {
    while (next < t.phases.size() && t.phases[next].end <= i) ++next;
    const bool in_phase = next < t.phases.size() && t.phases[next].start <= i;
    os << format_double(t.signal.timestamps[i]) << delim << format_double(t.signal.values[i]) << delim;
    if (in_phase) os << t.phases[next].kind << delim << next;
    else os << delim;
    os << '\n';
  }
}

inline void write_trace(const std::filesystem::path& path, const Trace& t) {
  {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write trace file " + path.string());
    write_trace_stream(out, t);
  }
  std::ofstream side(sidecar_path(path));
  side << to_json(t.scenario).dump(2) << '\n';
}

inline std::vector<Trace> load_traces(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Trace> traces;
  for (const auto& f : files) traces.push_back(parse_trace(f));
  return traces;
}

inline Signal slice_signal(const Signal& s, std::size_t start, std::size_t end) {
  Signal out;
  out.timestamps.assign(s.timestamps.begin() + static_cast<std::ptrdiff_t>(start),
                        s.timestamps.begin() + static_cast<std::ptrdiff_t>(end));
  out.values.assign(s.values.begin() + static_cast<std::ptrdiff_t>(start),
                    s.values.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

inline std::vector<Signal> cut_phases(const Trace& t, std::string_view keep_kind) {
  std::vector<Signal> out;
  for (const PhaseMark& m : t.phases) {
    if (m.kind == keep_kind) out.push_back(slice_signal(t.signal, m.start, m.end));
  }
  return out;
}

// A kept phase together with where it came from.
struct PhaseSample {
  std::string trace_id;
  std::size_t phase_id = 0;  // ordinal among the trace's kept phases
  ScenarioMeta scenario;
  Signal signal;
};

inline std::vector<PhaseSample> cut_phase_samples(const Trace& t, std::string_view keep_kind) {
  std::vector<PhaseSample> out;
  auto signals = cut_phases(t, keep_kind);
  for (std::size_t k = 0; k < signals.size(); ++k) {
    out.push_back({t.id, k, t.scenario, std::move(signals[k])});
  }
  return out;
}

struct WindowProfile {
  std::size_t window_size = 100;
  std::size_t shift = 10;

  void validate() const {
    require(window_size >= 2, "window size must be >= 2");
    require(shift >= 1, "window shift must be >= 1");
  }
};

struct WindowOrigin {
  std::string trace_id;
  std::size_t phase_id = 0;
  std::size_t offset = 0;

  std::string id() const {
    return trace_id + ":" + std::to_string(phase_id) + ":" + std::to_string(offset);
  }
  auto operator<=>(const WindowOrigin&) const = default;
};

struct WindowInstance {
  Series time_channel;    // offsets from the window's first timestamp
  Series metric_channel;
  Condition label = Condition::kNormal;
  ScenarioMeta scenario;
  WindowOrigin origin;

  std::size_t size() const { return metric_channel.size(); }
};

inline std::size_t window_count(std::size_t n, const WindowProfile& p) {
  if (n < p.window_size) return 0;
  return (n - p.window_size) / p.shift + 1;
}

inline WindowInstance make_window(const Signal& phase, std::size_t offset, std::size_t size,
                                  Condition label, const ScenarioMeta& meta, WindowOrigin origin) {
  WindowInstance w;
  w.time_channel.resize(size);
  w.metric_channel.resize(size);
  const double t0 = phase.timestamps[offset];
  for (std::size_t i = 0; i < size; ++i) {
    w.time_channel[i] = phase.timestamps[offset + i] - t0;
    w.metric_channel[i] = phase.values[offset + i];
  }
  w.label = label;
  w.scenario = meta;
  w.origin = std::move(origin);
  w.origin.offset = offset;
  return w;
}

inline std::vector<WindowInstance> slide_windows(const Signal& phase, const WindowProfile& p,
                                                 Condition label, const ScenarioMeta& meta,
                                                 const std::string& trace_id = {},
                                                 std::size_t phase_id = 0) {
  p.validate();
  std::vector<WindowInstance> out;
  const std::size_t count = window_count(phase.size(), p);
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(make_window(phase, k * p.shift, p.window_size, label, meta, {trace_id, phase_id, 0}));
  }
  return out;
}

inline std::vector<WindowInstance> slide_windows(const std::vector<PhaseSample>& phases,
                                                 const WindowProfile& p) {
  std::vector<WindowInstance> out;
  for (const PhaseSample& ph : phases) {
    auto w = slide_windows(ph.signal, p, ph.scenario.condition, ph.scenario, ph.trace_id, ph.phase_id);
    std::move(w.begin(), w.end(), std::back_inserter(out));
  }
  return out;
}

struct SplitPolicy {
  // Scenario ids held out for testing; empty selects the first scenario (by
  // id) of every class.
  std::vector<std::string> test_scenarios;
  std::string keep_kind = "cycle-op";
};

struct DatasetSplit {
  std::vector<PhaseSample> train;
  std::vector<PhaseSample> test;
};

inline std::vector<std::string> default_test_scenarios(const std::vector<Trace>& traces) {
  std::map<Condition, std::string> first;
  for (const Trace& t : traces) {
    auto it = first.find(t.scenario.condition);
    if (it == first.end() || t.scenario.id < it->second) first[t.scenario.condition] = t.scenario.id;
  }
  std::vector<std::string> out;
  for (const auto& [cond, id] : first) out.push_back(id);
  return out;
}

// Holds out the earliest and the latest kept phase of every designated test
// scenario; everything else trains.
inline DatasetSplit split_policy(const std::vector<Trace>& traces, const SplitPolicy& policy) {
  const auto test_ids = policy.test_scenarios.empty() ? default_test_scenarios(traces)
                                                      : policy.test_scenarios;
  const std::set<std::string> test_set(test_ids.begin(), test_ids.end());
  std::map<std::string, std::vector<PhaseSample>> by_scenario;
  std::vector<std::string> order;
  for (const Trace& t : traces) {
    if (!by_scenario.contains(t.scenario.id)) order.push_back(t.scenario.id);
    auto phases = cut_phase_samples(t, policy.keep_kind);
    auto& dst = by_scenario[t.scenario.id];
    std::move(phases.begin(), phases.end(), std::back_inserter(dst));
  }
  for (const auto& id : test_ids) {
    require(by_scenario.contains(id), "test scenario '" + id + "' not found among traces");
  }
  DatasetSplit out;
  for (const auto& id : order) {
    auto& phases = by_scenario[id];
    if (!test_set.contains(id)) {
      std::move(phases.begin(), phases.end(), std::back_inserter(out.train));
      continue;
    }
    if (phases.size() < 2) {
      throw DataError("test scenario '" + id + "' has " + std::to_string(phases.size()) +
                      " '" + policy.keep_kind + "' phases; at least 2 are required");
    }
    for (std::size_t k = 0; k < phases.size(); ++k) {
      auto& dst = (k == 0 || k + 1 == phases.size()) ? out.test : out.train;
      dst.push_back(std::move(phases[k]));
    }
  }
  return out;
}

template <typename Item, typename LabelOf>
std::array<std::size_t, kNumClasses> class_counts(const std::vector<Item>& items, LabelOf label_of) {
  std::array<std::size_t, kNumClasses> counts{};
  for (const Item& it : items) ++counts[class_index(label_of(it))];
  return counts;
}

inline std::string balance_report(const std::vector<WindowInstance>& train,
                                  const std::vector<WindowInstance>& test) {
  std::ostringstream os;
  auto label = [](const WindowInstance& w) { return w.label; };
  const auto tr = class_counts(train, label);
  const auto te = class_counts(test, label);
  os << "class,train,test\n";
  for (Condition c : kAllConditions) {
    os << condition_name(c) << ',' << tr[class_index(c)] << ',' << te[class_index(c)] << '\n';
  }
  return os.str();
}

inline Series fit_length(std::span<const double> component, std::size_t w) {
  require(!component.empty(), "fit_length: empty component");
  Series out(component.begin(), component.begin() + static_cast<std::ptrdiff_t>(std::min(w, component.size())));
  out.resize(w, component.back());
  return out;
}

inline Decomposition fit_decomposition(const Decomposition& d, std::size_t w) {
  Decomposition out;
  out.levels = fit_length(d.levels, w);
  out.peaks = fit_length(d.peaks, w);
  out.scale = d.scale;
  out.lf = fit_length(d.lf, w);
  out.hf = fit_length(d.hf, w);
  const std::size_t n = d.size();
  for (std::size_t i : d.resampled_indices) {
    if (i < w) out.resampled_indices.push_back(i);
  }
  for (std::size_t i : d.peak_indices) {
    if (i < w) out.peak_indices.push_back(i);
  }
  // Padding repeats the last sample; keep the peak bookkeeping consistent.
  if (w > n && !d.peak_indices.empty() && d.peak_indices.back() == n - 1) {
    for (std::size_t i = n; i < w; ++i) out.peak_indices.push_back(i);
  }
  return out;
}

struct BackgroundFilter {
  std::optional<std::string> core_type;
  std::optional<int> rounds;

  bool matches(const ScenarioMeta& m) const {
    return (!core_type || m.core_type == *core_type) && (!rounds || m.rounds == *rounds);
  }
};

struct BackgroundProvenance {
  std::string scenario_id;
  std::string trace_id;
  std::size_t phase_id = 0;

  bool operator==(const BackgroundProvenance&) const = default;
};

struct BackgroundSet {
  std::size_t window_size = 0;
  std::vector<Decomposition> decompositions;
  std::vector<BackgroundProvenance> provenance;
  std::vector<std::string> warnings;

  std::size_t size() const { return decompositions.size(); }
};

// Samples `cycles_per_scenario` training phases per matching scenario,
// decomposes each full phase and fits every component to `w` samples.
inline BackgroundSet select_background(const std::vector<PhaseSample>& train,
                                       const BackgroundFilter& filter,
                                       std::size_t cycles_per_scenario, std::size_t w,
                                       const DecomposeParams& p, std::uint64_t seed) {
  require(w >= 1, "background window size must be >= 1");
  std::map<std::string, std::vector<const PhaseSample*>> by_scenario;
  for (const PhaseSample& ph : train) {
    if (filter.matches(ph.scenario)) by_scenario[ph.scenario.id].push_back(&ph);
  }
  if (by_scenario.empty()) throw DataError("background filter matches no training scenario");

  BackgroundSet out;
  out.window_size = w;
  for (auto& [id, phases] : by_scenario) {
    std::vector<std::size_t> idx(phases.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng pick(mix_seed(seed, hash_string(id)));
    std::shuffle(idx.begin(), idx.end(), pick);
    if (phases.size() < cycles_per_scenario) {
      out.warnings.push_back("scenario '" + id + "' has only " + std::to_string(phases.size()) +
                             " training cycles; using all of them");
    }
    idx.resize(std::min(cycles_per_scenario, idx.size()));
    std::sort(idx.begin(), idx.end());
    for (std::size_t k : idx) {
      const PhaseSample& ph = *phases[k];
      Rng rng(mix_seed(seed, hash_string(ph.trace_id + ":" + std::to_string(ph.phase_id))));
      const Decomposition full = decompose(ph.signal, p, rng);
      out.decompositions.push_back(fit_decomposition(full, w));
      out.provenance.push_back({id, ph.trace_id, ph.phase_id});
    }
  }
  return out;
}

namespace detail {

inline nlohmann::json decomposition_json(const Decomposition& d) {
  return {{"levels", d.levels}, {"peaks", d.peaks}, {"scale", d.scale}, {"lf", d.lf},
          {"hf", d.hf}, {"resampled_indices", d.resampled_indices}, {"peak_indices", d.peak_indices}};
}

inline Decomposition decomposition_from_json(const nlohmann::json& j) {
  Decomposition d;
  d.levels = j.at("levels").get<Series>();
  d.peaks = j.at("peaks").get<Series>();
  d.scale = j.at("scale").get<double>();
  d.lf = j.at("lf").get<Series>();
  d.hf = j.at("hf").get<Series>();
  d.resampled_indices = j.at("resampled_indices").get<std::vector<std::size_t>>();
  d.peak_indices = j.at("peak_indices").get<std::vector<std::size_t>>();
  d.validate();
  return d;
}

}  // namespace detail

// Identifies a cached background set.
struct BackgroundKey {
  std::uint64_t seed = 0;
  BackgroundFilter filter;
  std::size_t window_size = 0;
  std::size_t cycles_per_scenario = 5;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"seed", seed}, {"window_size", window_size},
                        {"cycles_per_scenario", cycles_per_scenario}};
    j["core_type"] = filter.core_type ? nlohmann::json(*filter.core_type) : nlohmann::json(nullptr);
    j["rounds"] = filter.rounds ? nlohmann::json(*filter.rounds) : nlohmann::json(nullptr);
    return j;
  }

  std::string file_name() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(hash_string(to_json().dump())));
    return std::string("background_") + buf + ".json";
  }
};

inline void save_background(const std::filesystem::path& path, const BackgroundSet& b,
                            const BackgroundKey& key) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["key"] = key.to_json();
  j["window_size"] = b.window_size;
  auto& items = j["items"] = nlohmann::json::array();
  for (std::size_t i = 0; i < b.size(); ++i) {
    items.push_back({{"scenario", b.provenance[i].scenario_id},
                     {"trace", b.provenance[i].trace_id},
                     {"phase", b.provenance[i].phase_id},
                     {"decomposition", detail::decomposition_json(b.decompositions[i])}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write background cache " + path.string());
  out << j.dump() << '\n';
}

// Returns nullopt when the file is missing or was built for a different key.
inline std::optional<BackgroundSet> load_background(const std::filesystem::path& path,
                                                    const BackgroundKey& key) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    nlohmann::json j;
    in >> j;
    if (j.at("key") != key.to_json()) return std::nullopt;
    BackgroundSet b;
    b.window_size = j.at("window_size").get<std::size_t>();
    for (const auto& item : j.at("items")) {
      b.provenance.push_back({item.at("scenario").get<std::string>(), item.at("trace").get<std::string>(),
                              item.at("phase").get<std::size_t>()});
      b.decompositions.push_back(detail::decomposition_from_json(item.at("decomposition")));
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("background cache " + path.string() + ": " + e.what());
  }
}

// Dataset manifest: one row per window instance.
struct ManifestRow {
  std::string instance_id;
  std::string split;  // "train" | "test"
  Condition label = Condition::kNormal;
  std::string scenario_id;
  WindowOrigin origin;
  std::size_t window_size = 0;

  bool operator==(const ManifestRow&) const = default;
};

inline ManifestRow manifest_row(const WindowInstance& w, std::string split) {
  return {w.origin.id(), std::move(split), w.label, w.scenario.id, w.origin, w.size()};
}

inline void write_manifest(std::ostream& os, const std::vector<ManifestRow>& rows) {
  os << "instance_id,split,label,scenario,trace_id,phase_id,offset,window_size\n";
  for (const ManifestRow& r : rows) {
    os << r.instance_id << ',' << r.split << ',' << condition_name(r.label) << ',' << r.scenario_id
       << ',' << r.origin.trace_id << ',' << r.origin.phase_id << ',' << r.origin.offset << ','
       << r.window_size << '\n';
  }
}

inline std::vector<ManifestRow> read_manifest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("instance_id,", 0) != 0) {
    throw DataError("manifest: missing or unexpected header");
  }
  std::vector<ManifestRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line, ',');
    if (f.size() != 8) throw DataError("manifest line " + std::to_string(lineno) + ": expected 8 fields");
    ManifestRow r;
    r.instance_id = std::string(f[0]);
    r.split = std::string(f[1]);
    r.label = parse_condition(f[2]);
    r.scenario_id = std::string(f[3]);
    r.origin.trace_id = std::string(f[4]);
    r.origin.phase_id = static_cast<std::size_t>(parse_int(f[5]));
    r.origin.offset = static_cast<std::size_t>(parse_int(f[6]));
    r.window_size = static_cast<std::size_t>(parse_int(f[7]));
    rows.push_back(std::move(r));
  }
  return rows;
}

// Rebuilds window instances for manifest rows from the traces they name.
inline std::vector<WindowInstance> materialize(const std::vector<ManifestRow>& rows,
                                               const std::vector<Trace>& traces,
                                               std::string_view keep_kind = "cycle-op") {
  std::map<std::string, const Trace*> by_id;
  for (const Trace& t : traces) by_id[t.id] = &t;
  std::map<std::pair<std::string, std::size_t>, Signal> phase_cache;
  std::vector<WindowInstance> out;
  out.reserve(rows.size());
  for (const ManifestRow& r : rows) {
    auto it = by_id.find(r.origin.trace_id);
    if (it == by_id.end()) throw DataError("manifest references unknown trace '" + r.origin.trace_id + "'");
    const auto key = std::make_pair(r.origin.trace_id, r.origin.phase_id);
    if (!phase_cache.contains(key)) {
      auto phases = cut_phases(*it->second, keep_kind);
      for (std::size_t k = 0; k < phases.size(); ++k) phase_cache[{r.origin.trace_id, k}] = std::move(phases[k]);
    }
    auto ph = phase_cache.find(key);
    if (ph == phase_cache.end() || r.origin.offset + r.window_size > ph->second.size()) {
      throw DataError("manifest row " + r.instance_id + " is out of range of its phase");
    }
    out.push_back(make_window(ph->second, r.origin.offset, r.window_size, r.label, it->second->scenario,
                              r.origin));
  }
  return out;
}

}  // namespace cshap
