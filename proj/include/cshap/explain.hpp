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

// Exact concept-level Shapley values.
//
// A coalition S of concepts keeps S from the explained window and takes the
// remaining concepts from a background decomposition. Its value is the
// model's class-probability vector averaged over the background pool, with
// the same background samples used for every coalition:
//
//   v(S) = 1/|B| * sum_b f(window(time, substitute(x, b, S)))
//
// With five concepts all 32 coalitions are evaluated once and reused by both
// the closed-form Shapley sum and the permutation oracle.

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <istream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cshap/dataset.hpp"
#include "cshap/decompose.hpp"
#include "cshap/error.hpp"
#include "cshap/model.hpp"
#include "cshap/signal.hpp"

namespace cshap {

inline constexpr std::size_t kNumCoalitions = std::size_t{1} << kNumConcepts;

using ConceptValues = std::array<double, kNumConcepts>;
using CoalitionValues = std::array<double, kNumCoalitions>;  // indexed by ConceptMask::bits()

// Class-probability value of every coalition.
struct CoalitionGame {
  std::array<Probabilities, kNumCoalitions> values{};
  std::size_t model_evaluations = 0;

  CoalitionValues for_class(int c) const {
    CoalitionValues v{};
    for (std::size_t s = 0; s < kNumCoalitions; ++s) v[s] = values[s][c];
    return v;
  }
};

namespace detail {

constexpr double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

}  // namespace detail

// phi_i = sum_{S not containing i} |S|! (n - |S| - 1)! / n! * (v(S + i) - v(S))
inline ConceptValues shapley_values(const CoalitionValues& v) {
  ConceptValues phi{};
  constexpr double n_fact = detail::factorial(kNumConcepts);
  for (int i = 0; i < kNumConcepts; ++i) {
    const std::uint32_t bit = 1u << i;
    double acc = 0.0;
    for (std::uint32_t s = 0; s < kNumCoalitions; ++s) {
      if (s & bit) continue;
      const int size = std::popcount(s);
      const double weight = detail::factorial(size) * detail::factorial(kNumConcepts - size - 1) / n_fact;
      acc += weight * (v[s | bit] - v[s]);
    }
    phi[i] = acc;
  }
  return phi;
}

// Average marginal contribution over all 5! orderings of the concepts.
inline ConceptValues permutation_shapley_values(const CoalitionValues& v) {
  std::array<int, kNumConcepts> order;
  std::iota(order.begin(), order.end(), 0);
  ConceptValues phi{};
  std::size_t count = 0;
  do {
    std::uint32_t s = 0;
    for (int i : order) {
      phi[i] += v[s | (1u << i)] - v[s];
      s |= 1u << i;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& p : phi) p /= static_cast<double>(count);
  return phi;
}

// v(keep) for one coalition.
inline Probabilities coalition_value(const Classifier& model, const Decomposition& instance,
                                     const BackgroundSet& background, ConceptMask keep,
                                     std::span<const double> time_channel) {
  if (background.size() == 0) throw DataError("background set is empty");
  std::vector<Series> hybrids;
  hybrids.reserve(background.size());
  for (const Decomposition& b : background.decompositions) hybrids.push_back(substitute(instance, b, keep));
  const auto preds = model.predict_batch(time_channel, hybrids);
  Probabilities v{};
  for (const Probabilities& p : preds) {
    for (int c = 0; c < kNumClasses; ++c) v[c] += p[c];
  }
  for (double& x : v) x /= static_cast<double>(preds.size());
  return v;
}

inline CoalitionGame evaluate_coalitions(const Classifier& model, const Decomposition& instance,
                                         const BackgroundSet& background,
                                         std::span<const double> time_channel) {
  if (!model.supports_masking()) {
    throw UsageError("model '" + model.kind() + "' cannot score masked windows; it cannot be explained");
  }
  if (background.size() == 0) throw DataError("background set is empty");
  for (const Decomposition& b : background.decompositions) {
    if (b.size() != instance.size()) {
      throw DataError("background length " + std::to_string(b.size()) + " != window length " +
                      std::to_string(instance.size()));
    }
  }
  CoalitionGame game;
  std::vector<Series> hybrids;
  hybrids.reserve(kNumCoalitions);
  // One background sample at a time: all 32 hybrids share it.
  for (const Decomposition& b : background.decompositions) {
    hybrids.clear();
    for (std::uint32_t s = 0; s < kNumCoalitions; ++s) hybrids.push_back(substitute(instance, b, ConceptMask(s)));
    const auto preds = model.predict_batch(time_channel, hybrids);
    game.model_evaluations += preds.size();
    for (std::size_t s = 0; s < kNumCoalitions; ++s) {
      for (int c = 0; c < kNumClasses; ++c) game.values[s][c] += preds[s][c];
    }
  }
  for (auto& v : game.values) {
    for (double& x : v) x /= static_cast<double>(background.size());
  }
  return game;
}

struct AttributionResult {
  std::array<ConceptValues, kNumClasses> phi{};  // [class][concept]
  Probabilities base_value{};                    // v(empty coalition)
  Probabilities full_value{};                    // v(all concepts)
  Probabilities model_output{};                  // f on the original window
  int predicted_class = 0;
  Condition ground_truth = Condition::kNormal;
  WindowOrigin origin;
  std::size_t model_evaluations = 0;
  double levels_mean = 0.0;  // mean of the window's Levels component

  // max_c |sum_i phi[c][i] - (v(all)[c] - v(empty)[c])|
  double efficiency_gap() const {
    double worst = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      double sum = 0.0;
      for (double p : phi[c]) sum += p;
      worst = std::max(worst, std::abs(sum - (full_value[c] - base_value[c])));
    }
    return worst;
  }
};

enum class ShapleyMethod { kExact, kPermutation };

inline AttributionResult attribution_from_game(const CoalitionGame& game, ShapleyMethod method) {
  AttributionResult r;
  for (int c = 0; c < kNumClasses; ++c) {
    const CoalitionValues v = game.for_class(c);
    r.phi[c] = method == ShapleyMethod::kExact ? shapley_values(v) : permutation_shapley_values(v);
  }
  r.base_value = game.values[ConceptMask::none().bits()];
  r.full_value = game.values[ConceptMask::all().bits()];
  r.model_evaluations = game.model_evaluations;
  return r;
}

// Decomposition seed for one window: the configured seed mixed with the
// window's identity, so results do not depend on evaluation order.
inline std::uint64_t window_seed(const DecomposeParams& p, const WindowOrigin& origin) {
  return mix_seed(p.rng_seed, hash_string(origin.id()));
}

inline AttributionResult explain_window(const Classifier& model, const WindowInstance& instance,
                                        const BackgroundSet& background, const DecomposeParams& p,
                                        ShapleyMethod method) {
  if (!model.supports_masking()) {
    throw UsageError("model '" + model.kind() + "' cannot score masked windows; it cannot be explained");
  }
  Rng rng(window_seed(p, instance.origin));
  const Decomposition d = decompose(std::span<const double>(instance.metric_channel), p, rng);
  const CoalitionGame game = evaluate_coalitions(model, d, background, instance.time_channel);
  AttributionResult r = attribution_from_game(game, method);
  r.model_output = model.predict_proba(instance);
  r.predicted_class = argmax(r.model_output);
  r.ground_truth = instance.label;
  r.origin = instance.origin;
  r.levels_mean = mean(d.levels);
  return r;
}

inline AttributionResult exact_shap(const Classifier& model, const WindowInstance& instance,
                                    const BackgroundSet& background, const DecomposeParams& p) {
  return explain_window(model, instance, background, p, ShapleyMethod::kExact);
}

inline AttributionResult shap_permutation_oracle(const Classifier& model, const WindowInstance& instance,
                                                 const BackgroundSet& background, const DecomposeParams& p) {
  return explain_window(model, instance, background, p, ShapleyMethod::kPermutation);
}

// Explains every window; results are in input order and independent of the
// number of workers.
inline std::vector<AttributionResult> explain_all(const Classifier& model,
                                                  const std::vector<WindowInstance>& windows,
                                                  const BackgroundSet& background, const DecomposeParams& p,
                                                  unsigned workers = 1) {
  std::vector<AttributionResult> out(windows.size());
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(windows.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < windows.size(); ++i) out[i] = exact_shap(model, windows[i], background, p);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < windows.size(); i = next++) {
          try {
            out[i] = exact_shap(model, windows[i], background, p);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

enum class ClassSelector { kGroundTruth, kPredicted };

struct WindowAttribution {
  WindowOrigin origin;
  int cls = 0;
  ConceptValues phi{};
};

struct GlobalSummary {
  ConceptValues mean_abs{};
  ConceptValues std_abs{};
  std::vector<WindowAttribution> windows;
};

inline GlobalSummary aggregate_global(const std::vector<AttributionResult>& results,
                                      ClassSelector selector = ClassSelector::kGroundTruth) {
  GlobalSummary g;
  for (const AttributionResult& r : results) {
    const int cls = selector == ClassSelector::kGroundTruth ? class_index(r.ground_truth) : r.predicted_class;
    g.windows.push_back({r.origin, cls, r.phi[cls]});
  }
  if (g.windows.empty()) return g;
  const double n = static_cast<double>(g.windows.size());
  for (int i = 0; i < kNumConcepts; ++i) {
    double s = 0.0;
    for (const WindowAttribution& w : g.windows) s += std::abs(w.phi[i]);
    g.mean_abs[i] = s / n;
    double v = 0.0;
    for (const WindowAttribution& w : g.windows) {
      const double d = std::abs(w.phi[i]) - g.mean_abs[i];
      v += d * d;
    }
    g.std_abs[i] = std::sqrt(v / n);
  }
  return g;
}

struct ConceptDelta {
  double delta_mean_abs = 0.0;  // b.mean_abs - a.mean_abs
  double mean_diff = 0.0;       // mean over matched windows of |phi_b| - |phi_a|
  double std_diff = 0.0;
};

struct RunComparison {
  std::array<ConceptDelta, kNumConcepts> concepts{};
  std::size_t matched_windows = 0;
};

// Change from run a to run b; windows are matched by origin.
inline RunComparison compare_runs(const GlobalSummary& a, const GlobalSummary& b) {
  RunComparison out;
  std::map<WindowOrigin, const WindowAttribution*> index;
  for (const WindowAttribution& w : a.windows) index[w.origin] = &w;
  std::vector<std::pair<const WindowAttribution*, const WindowAttribution*>> pairs;
  for (const WindowAttribution& w : b.windows) {
    auto it = index.find(w.origin);
    if (it != index.end()) pairs.emplace_back(it->second, &w);
  }
  if (pairs.empty()) throw DataError("compare_runs: the two runs share no window origins");
  out.matched_windows = pairs.size();
  for (int i = 0; i < kNumConcepts; ++i) {
    ConceptDelta& d = out.concepts[i];
    d.delta_mean_abs = b.mean_abs[i] - a.mean_abs[i];
    std::vector<double> diffs;
    for (const auto& [wa, wb] : pairs) diffs.push_back(std::abs(wb->phi[i]) - std::abs(wa->phi[i]));
    d.mean_diff = mean(diffs);
    d.std_diff = stddev(diffs);
  }
  return out;
}

// Attribution file: one row per (window, class, concept).
inline void write_attributions(std::ostream& os, const std::vector<AttributionResult>& results) {
  os << "window_id,class,concept,phi,base_value,full_value,model_output,predicted_class,"
        "ground_truth_class,levels_mean\n";
  for (const AttributionResult& r : results) {
    for (Condition cls : kAllConditions) {
      const int c = class_index(cls);
      for (ConceptId k : kAllConcepts) {
        os << r.origin.id() << ',' << condition_name(cls) << ',' << concept_name(k) << ','
           << format_double(r.phi[c][concept_index(k)]) << ',' << format_double(r.base_value[c]) << ','
           << format_double(r.full_value[c]) << ',' << format_double(r.model_output[c]) << ','
           << condition_name(static_cast<Condition>(r.predicted_class)) << ','
           << condition_name(r.ground_truth) << ',' << format_double(r.levels_mean) << '\n';
      }
    }
  }
}

inline WindowOrigin parse_origin(std::string_view id) {
  const auto p2 = id.rfind(':');
  const auto p1 = p2 == std::string_view::npos ? p2 : id.rfind(':', p2 - 1);
  if (p1 == std::string_view::npos || p2 == std::string_view::npos) {
    throw DataError("malformed window id '" + std::string(id) + "'");
  }
  return {std::string(id.substr(0, p1)), static_cast<std::size_t>(parse_int(id.substr(p1 + 1, p2 - p1 - 1))),
          static_cast<std::size_t>(parse_int(id.substr(p2 + 1)))};
}

inline std::vector<AttributionResult> read_attributions(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("window_id,", 0) != 0) {
    throw DataError("attribution file: missing header");
  }
  std::vector<AttributionResult> out;
  std::map<std::string, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line, ',');
    if (f.size() != 10) throw DataError("attribution line " + std::to_string(lineno) + ": expected 10 fields");
    const std::string id(f[0]);
    auto [it, inserted] = index.try_emplace(id, out.size());
    if (inserted) {
      AttributionResult r;
      r.origin = parse_origin(id);
      r.predicted_class = class_index(parse_condition(f[7]));
      r.ground_truth = parse_condition(f[8]);
      r.levels_mean = parse_double(f[9]);
      out.push_back(r);
    }
    AttributionResult& r = out[it->second];
    const int c = class_index(parse_condition(f[1]));
    const auto k = parse_concept(f[2]);
    if (!k) throw DataError("attribution line " + std::to_string(lineno) + ": unknown concept");
    r.phi[c][concept_index(*k)] = parse_double(f[3]);
    r.base_value[c] = parse_double(f[4]);
    r.full_value[c] = parse_double(f[5]);
    r.model_output[c] = parse_double(f[6]);
  }
  return out;
}

}  // namespace cshap
