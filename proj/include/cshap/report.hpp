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

// Static report artifacts: SVG plots, each paired with a CSV that holds every
// plotted number. Output is a pure function of the inputs; coordinates are
// printed with fixed precision and CSV values with round-trip precision, so
// equal inputs give byte-identical files.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cshap/dataset.hpp"
#include "cshap/decompose.hpp"
#include "cshap/explain.hpp"
#include "cshap/numeric.hpp"
#include "cshap/signal.hpp"

namespace cshap {

inline constexpr int kReportSchemaVersion = 1;

struct Artifact {
  std::string svg;
  std::string csv;
};

inline constexpr std::array<std::string_view, kNumClasses> kClassColors = {"#4c72b0", "#dd8452", "#55a868"};
inline constexpr std::string_view kMisclassifiedColor = "#c44e52";

namespace detail {

inline std::string fx(double v, int precision = 2) {
  if (!std::isfinite(v)) v = 0.0;
  if (v == 0.0) v = 0.0;  // no "-0.00"
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
  std::string s(buf, res.ptr);
  if (s.find_first_not_of("-0.") == std::string::npos) return "0";
  return s;
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

class Svg {
 public:
  Svg(double width, double height) {
    os_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fx(width) << "\" height=\""
        << fx(height) << "\" viewBox=\"0 0 " << fx(width) << ' ' << fx(height) << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << fx(width) << "\" height=\"" << fx(height)
        << "\" fill=\"#ffffff\"/>\n";
  }

  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view extra = {}) {
    if (h < 0) {
      y += h;
      h = -h;
    }
    os_ << "<rect x=\"" << fx(x) << "\" y=\"" << fx(y) << "\" width=\"" << fx(w) << "\" height=\"" << fx(h)
        << "\" fill=\"" << fill << '"';
    if (!extra.empty()) os_ << ' ' << extra;
    os_ << "/>\n";
  }

  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0) {
    os_ << "<line x1=\"" << fx(x1) << "\" y1=\"" << fx(y1) << "\" x2=\"" << fx(x2) << "\" y2=\"" << fx(y2)
        << "\" stroke=\"" << stroke << "\" stroke-width=\"" << fx(width) << "\"/>\n";
  }

  void text(double x, double y, std::string_view s, double size = 12.0, std::string_view anchor = "start") {
    os_ << "<text x=\"" << fx(x) << "\" y=\"" << fx(y) << "\" font-family=\"sans-serif\" font-size=\""
        << fx(size) << "\" text-anchor=\"" << anchor << "\">" << xml_escape(s) << "</text>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke, double width = 1.0) {
    os_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << fx(width) << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) os_ << ' ';
      os_ << fx(pts[i].first) << ',' << fx(pts[i].second);
    }
    os_ << "\"/>\n";
  }

  void raw(std::string_view s) { os_ << s; }

  std::string finish() {
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  std::ostringstream os_;
};

// Maps [lo, hi] onto [a, b]; a flat range maps to the midpoint.
struct Scale1d {
  double lo, hi, a, b;
  double operator()(double v) const {
    if (hi <= lo) return 0.5 * (a + b);
    return a + (v - lo) / (hi - lo) * (b - a);
  }
};

inline std::pair<double, double> range_of(std::span<const double> x) {
  if (x.empty()) return {0.0, 1.0};
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  return {*mn, *mx};
}

}  // namespace detail

// ---- global summary ---------------------------------------------------------

inline Artifact render_global(const GlobalSummary& g, std::string_view title = "Mean |SHAP| per concept") {
  Artifact a;
  std::ostringstream csv;
  csv << "concept,mean_abs,std_abs,windows\n";
  for (ConceptId c : kAllConcepts) {
    const int i = concept_index(c);
    csv << concept_name(c) << ',' << format_double(g.mean_abs[i]) << ',' << format_double(g.std_abs[i]) << ','
        << g.windows.size() << '\n';
  }
  a.csv = csv.str();

  constexpr double W = 520, H = 340, left = 60, right = 20, top = 40, bottom = 50;
  detail::Svg svg(W, H);
  svg.text(W / 2, 24, title, 14, "middle");
  double ymax = 0.0;
  for (int i = 0; i < kNumConcepts; ++i) ymax = std::max(ymax, g.mean_abs[i] + g.std_abs[i]);
  if (ymax <= 0.0) ymax = 1.0;
  const detail::Scale1d y{0.0, ymax, H - bottom, top};
  svg.line(left, H - bottom, W - right, H - bottom, "#333333");
  svg.line(left, H - bottom, left, top, "#333333");
  for (int t = 0; t <= 4; ++t) {
    const double v = ymax * t / 4.0;
    svg.line(left - 4, y(v), left, y(v), "#333333");
    svg.text(left - 6, y(v) + 4, detail::fx(v, 3), 10, "end");
  }
  const double slot = (W - left - right) / kNumConcepts;
  for (ConceptId c : kAllConcepts) {
    const int i = concept_index(c);
    const double x = left + slot * i + slot * 0.2;
    const double bw = slot * 0.6;
    svg.rect(x, y(0.0), bw, y(g.mean_abs[i]) - y(0.0), "#4c72b0",
             "class=\"bar\" data-concept=\"" + std::string(concept_name(c)) + "\"");
    const double cx = x + bw / 2;
    svg.line(cx, y(std::max(0.0, g.mean_abs[i] - g.std_abs[i])), cx, y(g.mean_abs[i] + g.std_abs[i]), "#222222");
    svg.text(cx, H - bottom + 18, concept_name(c), 12, "middle");
  }
  a.svg = svg.finish();
  return a;
}

// Reads the CSV written by render_global back into mean/std arrays.
inline GlobalSummary parse_global_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("concept,mean_abs,std_abs", 0) != 0) {
    throw DataError("global summary csv: unexpected header");
  }
  GlobalSummary g;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_fields(line, ',');
    if (f.size() < 3) throw DataError("global summary csv: short row");
    const auto c = parse_concept(f[0]);
    if (!c) throw DataError("global summary csv: unknown concept '" + std::string(f[0]) + "'");
    g.mean_abs[concept_index(*c)] = parse_double(f[1]);
    g.std_abs[concept_index(*c)] = parse_double(f[2]);
  }
  return g;
}

// ---- local view --------------------------------------------------------------

struct LocalWindow {
  std::size_t offset = 0;
  std::size_t size = 0;
  int predicted = 0;
  int truth = 0;
  ConceptValues phi{};  // ground-truth class

  bool misclassified() const { return predicted != truth; }
};

struct LocalPlot {
  std::string title;
  Series signal;
  Decomposition components;  // of the whole signal; may be empty
  std::vector<LocalWindow> windows;
  std::vector<ConceptId> concepts = {kAllConcepts.begin(), kAllConcepts.end()};
};

// Builds a local plot for one phase from the attributions of its windows.
inline LocalPlot local_plot_for_phase(const PhaseSample& phase, const std::vector<AttributionResult>& results,
                                      const DecomposeParams& p, std::vector<ConceptId> concepts,
                                      std::size_t window_size) {
  LocalPlot lp;
  lp.title = phase.trace_id + " phase " + std::to_string(phase.phase_id);
  lp.signal = phase.signal.values;
  Rng rng(mix_seed(p.rng_seed, hash_string(phase.trace_id + ":" + std::to_string(phase.phase_id))));
  lp.components = decompose(std::span<const double>(lp.signal), p, rng);
  lp.concepts = std::move(concepts);
  for (const AttributionResult& r : results) {
    if (r.origin.trace_id != phase.trace_id || r.origin.phase_id != phase.phase_id) continue;
    LocalWindow w;
    w.offset = r.origin.offset;
    w.size = std::min(window_size, lp.signal.size() - std::min(w.offset, lp.signal.size()));
    w.predicted = r.predicted_class;
    w.truth = class_index(r.ground_truth);
    w.phi = r.phi[w.truth];
    lp.windows.push_back(w);
  }
  std::sort(lp.windows.begin(), lp.windows.end(),
            [](const LocalWindow& a, const LocalWindow& b) { return a.offset < b.offset; });
  return lp;
}

inline Series concept_curve(const Decomposition& d, ConceptId c) {
  const std::size_t n = d.size();
  Series out(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (c) {
      case ConceptId::kLevels: out[i] = d.levels[i]; break;
      case ConceptId::kPeaks: out[i] = d.peaks[i]; break;
      case ConceptId::kScale: out[i] = d.scale; break;
      case ConceptId::kLF: out[i] = d.scale * d.lf[i]; break;
      case ConceptId::kHF: out[i] = d.scale * d.hf[i]; break;
    }
  }
  return out;
}

inline Artifact render_local(const LocalPlot& lp) {
  for (const LocalWindow& w : lp.windows) {
    require(w.size == 0 || w.offset + w.size <= lp.signal.size(), "local plot window exceeds the signal");
  }
  Artifact a;
  std::ostringstream csv;
  csv << "offset,size,predicted,ground_truth,misclassified";
  for (ConceptId c : lp.concepts) csv << ",phi_" << concept_name(c);
  csv << '\n';
  for (const LocalWindow& w : lp.windows) {
    csv << w.offset << ',' << w.size << ',' << condition_name(static_cast<Condition>(w.predicted)) << ','
        << condition_name(static_cast<Condition>(w.truth)) << ',' << (w.misclassified() ? 1 : 0);
    for (ConceptId c : lp.concepts) csv << ',' << format_double(w.phi[concept_index(c)]);
    csv << '\n';
  }
  a.csv = csv.str();

  const bool with_components = lp.components.size() == lp.signal.size() && !lp.signal.empty();
  const std::size_t rows = 1 + (with_components ? lp.concepts.size() : 0);
  constexpr double W = 900, left = 70, right = 20, top = 40, row_h = 150, gap = 30;
  const double H = top + rows * (row_h + gap) + 10;
  detail::Svg svg(W, H);
  svg.text(W / 2, 24, lp.title, 14, "middle");
  const double n = std::max<double>(1.0, static_cast<double>(lp.signal.size()));
  const detail::Scale1d x{0.0, n, left, W - right};

  // Row 0: signal with predicted-class overlays.
  {
    const double y0 = top, y1 = top + row_h;
    for (const LocalWindow& w : lp.windows) {
      const std::size_t size = w.size ? w.size : 1;
      const auto color = w.misclassified() ? kMisclassifiedColor : kClassColors[w.predicted];
      std::string extra = "fill-opacity=\"0.25\" class=\"";
      extra += w.misclassified() ? "window misclassified\" stroke=\"#c44e52\" stroke-width=\"2\"" : "window\"";
      svg.rect(x(static_cast<double>(w.offset)), y0, x(static_cast<double>(w.offset + size)) - x(w.offset),
               row_h, color, extra);
    }
    const auto [lo, hi] = detail::range_of(lp.signal);
    const detail::Scale1d y{lo, hi, y1 - 5, y0 + 5};
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < lp.signal.size(); ++i) pts.emplace_back(x(static_cast<double>(i)), y(lp.signal[i]));
    svg.polyline(pts, "#222222");
    svg.text(left - 6, y0 + 12, "signal", 11, "end");
  }

  if (with_components) {
    for (std::size_t r = 0; r < lp.concepts.size(); ++r) {
      const ConceptId c = lp.concepts[r];
      const double y0 = top + (r + 1) * (row_h + gap);
      const double mid = y0 + row_h * 0.6;
      const Series curve = concept_curve(lp.components, c);
      auto [lo, hi] = detail::range_of(curve);
      const detail::Scale1d y{lo, hi, mid - 5, y0 + 5};
      std::vector<std::pair<double, double>> pts;
      for (std::size_t i = 0; i < curve.size(); ++i) pts.emplace_back(x(static_cast<double>(i)), y(curve[i]));
      svg.polyline(pts, "#4c72b0");
      svg.text(left - 6, y0 + 12, concept_name(c), 11, "end");
      // phi bars below the curve
      double pmax = 0.0;
      for (const LocalWindow& w : lp.windows) pmax = std::max(pmax, std::abs(w.phi[concept_index(c)]));
      if (pmax <= 0.0) pmax = 1.0;
      const double base = y0 + row_h * 0.8;
      svg.line(left, base, W - right, base, "#999999", 0.5);
      for (const LocalWindow& w : lp.windows) {
        const double v = w.phi[concept_index(c)];
        const double h = -v / pmax * row_h * 0.18;
        const double cx = x(static_cast<double>(w.offset) + static_cast<double>(w.size) / 2.0);
        svg.rect(cx - 1.5, base, 3.0, h, v >= 0 ? "#55a868" : "#c44e52",
                 w.misclassified() ? "class=\"phi misclassified\"" : "class=\"phi\"");
      }
    }
  }
  a.svg = svg.finish();
  return a;
}

// ---- levels histogram --------------------------------------------------------

struct LevelsHistogram {
  std::vector<double> edges;                                   // bins + 1
  std::array<std::vector<std::size_t>, kNumClasses> counts;    // [class][bin]
  std::vector<bool> shared;                                    // >= 2 classes present
  double normal_nofan_overlap = 0.0;  // fraction of Normal+NoFan windows in bins holding both

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : counts) {
      for (std::size_t v : row) n += v;
    }
    return n;
  }
};

inline LevelsHistogram levels_histogram(const std::vector<std::pair<Condition, double>>& values, std::size_t bins) {
  require(bins >= 1, "histogram needs at least one bin");
  LevelsHistogram h;
  double lo = 0.0, hi = 1.0;
  if (!values.empty()) {
    lo = hi = values.front().second;
    for (const auto& [c, v] : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi <= lo) hi = lo + 1.0;
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * static_cast<double>(b) / bins);
  for (auto& row : h.counts) row.assign(bins, 0);
  for (const auto& [c, v] : values) {
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    b = std::min(b, bins - 1);
    ++h.counts[class_index(c)][b];
  }
  h.shared.assign(bins, false);
  std::size_t nf_total = 0, nf_shared = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    int present = 0;
    for (const auto& row : h.counts) present += row[b] > 0;
    h.shared[b] = present >= 2;
    const std::size_t n0 = h.counts[0][b], n1 = h.counts[1][b];
    nf_total += n0 + n1;
    if (n0 > 0 && n1 > 0) nf_shared += n0 + n1;
  }
  h.normal_nofan_overlap = nf_total ? static_cast<double>(nf_shared) / static_cast<double>(nf_total) : 0.0;
  return h;
}

inline Artifact render_levels_histogram(const LevelsHistogram& h, std::string_view title = "Levels per class") {
  Artifact a;
  std::ostringstream csv;
  csv << "bin,lower,upper,Normal,NoFan,UnderVolt,shared\n";
  const std::size_t bins = h.shared.size();
  for (std::size_t b = 0; b < bins; ++b) {
    csv << b << ',' << format_double(h.edges[b]) << ',' << format_double(h.edges[b + 1]);
    for (const auto& row : h.counts) csv << ',' << row[b];
    csv << ',' << (h.shared[b] ? 1 : 0) << '\n';
  }
  a.csv = csv.str();

  constexpr double W = 640, H = 360, left = 60, right = 20, top = 40, bottom = 50;
  detail::Svg svg(W, H);
  svg.text(W / 2, 24, title, 14, "middle");
  std::size_t cmax = 1;
  for (const auto& row : h.counts) {
    for (std::size_t v : row) cmax = std::max(cmax, v);
  }
  const detail::Scale1d y{0.0, static_cast<double>(cmax), H - bottom, top};
  const double slot = (W - left - right) / static_cast<double>(std::max<std::size_t>(bins, 1));
  for (std::size_t b = 0; b < bins; ++b) {
    const double x0 = left + slot * static_cast<double>(b);
    if (h.shared[b]) svg.rect(x0, top, slot, H - bottom - top, "#f2c14e", "fill-opacity=\"0.25\" class=\"shared\"");
    const double bw = slot / kNumClasses;
    for (int c = 0; c < kNumClasses; ++c) {
      const double v = static_cast<double>(h.counts[c][b]);
      if (v > 0) svg.rect(x0 + bw * c, y(0.0), bw, y(v) - y(0.0), kClassColors[c], "fill-opacity=\"0.85\"");
    }
  }
  svg.line(left, H - bottom, W - right, H - bottom, "#333333");
  svg.line(left, H - bottom, left, top, "#333333");
  if (bins > 0) {
    svg.text(left, H - bottom + 16, detail::fx(h.edges.front(), 3), 10, "middle");
    svg.text(W - right, H - bottom + 16, detail::fx(h.edges.back(), 3), 10, "middle");
  }
  svg.text(left - 6, top + 4, std::to_string(cmax), 10, "end");
  for (int c = 0; c < kNumClasses; ++c) {
    svg.rect(W - right - 110, top + 4 + 16.0 * c, 10, 10, kClassColors[c]);
    svg.text(W - right - 95, top + 13 + 16.0 * c, condition_name(static_cast<Condition>(c)), 11);
  }
  a.svg = svg.finish();
  return a;
}

// Window-level Levels value: the mean of the Levels component of each window,
// decomposed with the same per-window seeding as the explainer.
inline std::vector<std::pair<Condition, double>> window_levels_values(const std::vector<WindowInstance>& windows,
                                                                      const DecomposeParams& p) {
  std::vector<std::pair<Condition, double>> out;
  out.reserve(windows.size());
  for (const WindowInstance& w : windows) {
    Rng rng(window_seed(p, w.origin));
    const Decomposition d = decompose(std::span<const double>(w.metric_channel), p, rng);
    out.emplace_back(w.label, mean(d.levels));
  }
  return out;
}

// ---- stability across window sizes ------------------------------------------

struct StabilityRow {
  std::size_t window_size = 0;
  double accuracy = 0.0;
  double mean_abs_levels = 0.0;
  double std_abs_levels = 0.0;
  std::size_t explained_windows = 0;

  bool operator==(const StabilityRow&) const = default;
};

struct StabilityReport {
  std::vector<StabilityRow> rows;  // ascending window size
  bool accuracy_increasing = false;
  bool mean_abs_levels_increasing = false;
  bool std_abs_levels_decreasing = false;

  std::string csv() const {
    std::ostringstream os;
    os << "window_size,accuracy,mean_abs_levels,std_abs_levels,explained_windows\n";
    for (const StabilityRow& r : rows) {
      os << r.window_size << ',' << format_double(r.accuracy) << ',' << format_double(r.mean_abs_levels) << ','
         << format_double(r.std_abs_levels) << ',' << r.explained_windows << '\n';
    }
    return os.str();
  }

  std::string table() const {
    std::ostringstream os;
    os << "  W    accuracy  mean|phi_Levels|  std|phi_Levels|\n";
    for (const StabilityRow& r : rows) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%4zu    %.4f    %.4f            %.4f\n", r.window_size, r.accuracy,
                    r.mean_abs_levels, r.std_abs_levels);
      os << buf;
    }
    os << "accuracy increasing: " << (accuracy_increasing ? "yes" : "no")
       << "; mean|phi_Levels| increasing: " << (mean_abs_levels_increasing ? "yes" : "no")
       << "; std|phi_Levels| decreasing: " << (std_abs_levels_decreasing ? "yes" : "no") << '\n';
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = kReportSchemaVersion;
    auto& arr = j["rows"] = nlohmann::json::array();
    for (const StabilityRow& r : rows) {
      arr.push_back({{"window_size", r.window_size},
                     {"accuracy", r.accuracy},
                     {"mean_abs_levels", r.mean_abs_levels},
                     {"std_abs_levels", r.std_abs_levels},
                     {"explained_windows", r.explained_windows}});
    }
    j["accuracy_increasing"] = accuracy_increasing;
    j["mean_abs_levels_increasing"] = mean_abs_levels_increasing;
    j["std_abs_levels_decreasing"] = std_abs_levels_decreasing;
    return j;
  }
};

inline StabilityReport stability_report(std::vector<StabilityRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const StabilityRow& a, const StabilityRow& b) { return a.window_size < b.window_size; });
  StabilityReport r;
  r.rows = std::move(rows);
  r.accuracy_increasing = r.mean_abs_levels_increasing = r.std_abs_levels_decreasing = r.rows.size() >= 2;
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    r.accuracy_increasing &= r.rows[i].accuracy > r.rows[i - 1].accuracy;
    r.mean_abs_levels_increasing &= r.rows[i].mean_abs_levels > r.rows[i - 1].mean_abs_levels;
    r.std_abs_levels_decreasing &= r.rows[i].std_abs_levels < r.rows[i - 1].std_abs_levels;
  }
  return r;
}

// ---- bundle ------------------------------------------------------------------

// Mean ground-truth-class Levels phi over misclassified and correctly
// classified windows.
struct LevelsPhiSplit {
  double misclassified_mean = 0.0;
  double correct_mean = 0.0;
  std::size_t misclassified = 0;
  std::size_t correct = 0;
};

inline LevelsPhiSplit levels_phi_split(const std::vector<AttributionResult>& results) {
  LevelsPhiSplit s;
  for (const AttributionResult& r : results) {
    const double v = r.phi[class_index(r.ground_truth)][concept_index(ConceptId::kLevels)];
    if (r.predicted_class != class_index(r.ground_truth)) {
      s.misclassified_mean += v;
      ++s.misclassified;
    } else {
      s.correct_mean += v;
      ++s.correct;
    }
  }
  if (s.misclassified) s.misclassified_mean /= static_cast<double>(s.misclassified);
  if (s.correct) s.correct_mean /= static_cast<double>(s.correct);
  return s;
}

inline void write_artifact(const std::filesystem::path& dir, const std::string& stem, const Artifact& a) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream svg(dir / (stem + ".svg"), std::ios::binary);
    if (!svg) throw DataError("cannot write " + (dir / (stem + ".svg")).string());
    svg << a.svg;
  }
  std::ofstream csv(dir / (stem + ".csv"), std::ios::binary);
  csv << a.csv;
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

struct ReportOptions {
  std::size_t histogram_bins = 30;
  std::vector<ConceptId> local_concepts = {kAllConcepts.begin(), kAllConcepts.end()};
  std::size_t max_local_plots = 6;
  std::size_t window_size = 0;  // explained window size, for local overlays
};

// Writes global, histogram and (given phases) local artifacts plus a JSON
// summary into `dir`.
inline nlohmann::json write_report(const std::filesystem::path& dir, const std::vector<AttributionResult>& results,
                                   const std::vector<PhaseSample>& phases, const DecomposeParams& p,
                                   const ReportOptions& opt = {}) {
  const GlobalSummary g = aggregate_global(results);
  write_artifact(dir, "global", render_global(g));

  std::vector<std::pair<Condition, double>> all, wrong;
  for (const AttributionResult& r : results) {
    all.emplace_back(r.ground_truth, r.levels_mean);
    if (r.predicted_class != class_index(r.ground_truth)) wrong.emplace_back(r.ground_truth, r.levels_mean);
  }
  const LevelsHistogram h_all = levels_histogram(all, opt.histogram_bins);
  write_artifact(dir, "levels_histogram", render_levels_histogram(h_all, "Levels per class (explained windows)"));
  const LevelsHistogram h_wrong = levels_histogram(wrong, opt.histogram_bins);
  write_artifact(dir, "levels_histogram_misclassified",
                 render_levels_histogram(h_wrong, "Levels per class (misclassified windows)"));

  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["windows"] = results.size();
  for (ConceptId c : kAllConcepts) {
    j["global"][std::string(concept_name(c))] = {{"mean_abs", g.mean_abs[concept_index(c)]},
                                                 {"std_abs", g.std_abs[concept_index(c)]}};
  }
  j["levels_histogram"] = {{"windows", h_all.total()}, {"normal_nofan_overlap", h_all.normal_nofan_overlap}};
  j["misclassified_windows"] = wrong.size();
  const LevelsPhiSplit split = levels_phi_split(results);
  j["levels_phi"] = {{"misclassified_mean", split.misclassified_mean},
                     {"correct_mean", split.correct_mean},
                     {"misclassified", split.misclassified},
                     {"correct", split.correct}};

  auto& locals = j["local_plots"] = nlohmann::json::array();
  std::size_t written = 0;
  for (const PhaseSample& ph : phases) {
    if (written >= opt.max_local_plots) break;
    LocalPlot lp = local_plot_for_phase(ph, results, p, opt.local_concepts, opt.window_size);
    if (lp.windows.empty()) continue;
    const std::string stem = "local_" + ph.trace_id + "_" + std::to_string(ph.phase_id);
    write_artifact(dir, stem, render_local(lp));
    locals.push_back(stem);
    ++written;
  }
  write_text(dir / "summary.json", j.dump(2) + "\n");
  return j;
}

}  // namespace cshap
