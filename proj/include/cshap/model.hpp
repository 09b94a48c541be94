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

// Classifier interface, evaluation metrics and the two non-network
// classifiers: a rule on the window mean and a lookup of precomputed
// predictions.

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cshap/dataset.hpp"
#include "cshap/error.hpp"
#include "cshap/numeric.hpp"

namespace cshap {

using Probabilities = std::array<double, kNumClasses>;

inline int argmax(const Probabilities& p) {
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (p[c] > p[best]) best = c;
  }
  return best;
}

class Classifier {
 public:
  virtual ~Classifier() = default;

  // Probabilities for an arbitrary two-channel window.
  virtual Probabilities predict_values(std::span<const double> time,
                                       std::span<const double> metric) const = 0;

  virtual Probabilities predict_proba(const WindowInstance& w) const {
    return predict_values(w.time_channel, w.metric_channel);
  }

  // Several metric channels sharing one time channel.
  virtual std::vector<Probabilities> predict_batch(std::span<const double> time,
                                                   const std::vector<Series>& metrics) const {
    std::vector<Probabilities> out;
    out.reserve(metrics.size());
    for (const Series& m : metrics) out.push_back(predict_values(time, m));
    return out;
  }

  // False for models that cannot score synthetic (masked) windows.
  virtual bool supports_masking() const { return true; }

  virtual std::string kind() const = 0;
};

inline Probabilities predict_proba(const Classifier& model, const WindowInstance& w) {
  return model.predict_proba(w);
}

// Classifies by the mean of the metric channel:
//   mean < t1 -> Normal, t1 <= mean < t2 -> NoFan, otherwise UnderVolt.
class LevelsOracle final : public Classifier {
 public:
  LevelsOracle(double t1, double t2, double epsilon = 1e-3) : t1_(t1), t2_(t2), eps_(epsilon) {
    require(t1 < t2, "levels oracle thresholds must satisfy t1 < t2");
    require(epsilon >= 0.0 && epsilon < 1.0 / 3.0, "levels oracle epsilon must be in [0, 1/3)");
  }

  Probabilities predict_values(std::span<const double>, std::span<const double> metric) const override {
    const double m = mean(metric);
    const int cls = m < t1_ ? 0 : (m < t2_ ? 1 : 2);
    Probabilities p;
    p.fill(eps_);
    p[cls] = 1.0 - 2.0 * eps_;
    return p;
  }

  std::string kind() const override { return "levels-oracle"; }

 private:
  double t1_, t2_, eps_;
};

inline LevelsOracle make_levels_oracle(double t1, double t2, double epsilon = 1e-3) {
  return LevelsOracle(t1, t2, epsilon);
}

// Probabilities loaded from a file, keyed by instance id. Valid for
// evaluation only: it cannot score masked hybrids.
class ExternalPredictions final : public Classifier {
 public:
  explicit ExternalPredictions(std::map<std::string, Probabilities> rows) : rows_(std::move(rows)) {}

  Probabilities predict_proba(const WindowInstance& w) const override {
    auto it = rows_.find(w.origin.id());
    if (it == rows_.end()) throw DataError("no external prediction for instance '" + w.origin.id() + "'");
    return it->second;
  }

  Probabilities predict_values(std::span<const double>, std::span<const double>) const override {
    throw UsageError("external predictions can only be looked up by instance id");
  }

  bool supports_masking() const override { return false; }
  std::string kind() const override { return "external"; }
  std::size_t size() const { return rows_.size(); }

 private:
  std::map<std::string, Probabilities> rows_;
};

// Predictions file: instance_id,p_Normal,p_NoFan,p_UnderVolt
inline ExternalPredictions read_external_predictions(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("instance_id", 0) != 0) {
    throw DataError("predictions file: missing header");
  }
  std::map<std::string, Probabilities> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line, ',');
    const std::string where = "predictions line " + std::to_string(lineno);
    if (f.size() != 1 + kNumClasses) throw DataError(where + ": expected 4 fields");
    Probabilities p;
    double sum = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      p[c] = parse_double(f[1 + c]);
      if (!(p[c] >= 0.0)) throw DataError(where + ": negative probability");
      sum += p[c];
    }
    if (std::abs(sum - 1.0) > 1e-6) throw DataError(where + ": probabilities sum to " + format_double(sum));
    rows[std::string(f[0])] = p;
  }
  return ExternalPredictions(std::move(rows));
}

inline ExternalPredictions load_external_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions file " + path.string());
  return read_external_predictions(in);
}

// Fails if any manifest instance has no prediction row.
inline ExternalPredictions load_external_predictions(const std::vector<ManifestRow>& manifest,
                                                     const std::filesystem::path& path) {
  ExternalPredictions p = load_external_predictions(path);
  WindowInstance probe;
  for (const ManifestRow& r : manifest) {
    probe.origin = r.origin;
    (void)p.predict_proba(probe);
  }
  return p;
}

inline void write_predictions(std::ostream& os, const Classifier& model,
                              const std::vector<WindowInstance>& windows) {
  os << "instance_id,p_Normal,p_NoFan,p_UnderVolt\n";
  for (const WindowInstance& w : windows) {
    const Probabilities p = model.predict_proba(w);
    os << w.origin.id() << ',' << format_double(p[0]) << ',' << format_double(p[1]) << ','
       << format_double(p[2]) << '\n';
  }
}

struct Misclassification {
  WindowOrigin origin;
  Condition truth;
  Condition predicted;
};

struct Metrics {
  double accuracy = 0.0;
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};  // [truth][predicted]
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::vector<Misclassification> misclassified;
  std::vector<int> predicted;  // per evaluated window

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : confusion) {
      for (std::size_t v : row) n += v;
    }
    return n;
  }

  bool operator==(const Metrics& o) const {
    return accuracy == o.accuracy && confusion == o.confusion && precision == o.precision &&
           recall == o.recall && predicted == o.predicted;
  }
};

inline Metrics evaluate(const Classifier& model, const std::vector<WindowInstance>& test) {
  Metrics m;
  m.predicted.reserve(test.size());
  for (const WindowInstance& w : test) {
    const int pred = argmax(model.predict_proba(w));
    const int truth = class_index(w.label);
    ++m.confusion[truth][pred];
    m.predicted.push_back(pred);
    if (pred != truth) {
      m.misclassified.push_back({w.origin, w.label, static_cast<Condition>(pred)});
    }
  }
  std::size_t correct = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    correct += m.confusion[c][c];
    std::size_t row = 0, col = 0;
    for (int k = 0; k < kNumClasses; ++k) {
      row += m.confusion[c][k];
      col += m.confusion[k][c];
    }
    m.recall[c] = row ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(row) : 0.0;
    m.precision[c] = col ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(col) : 0.0;
  }
  m.accuracy = test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
  return m;
}

}  // namespace cshap
