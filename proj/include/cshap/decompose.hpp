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

// Builds the five concepts from a signal, extracting components left to right:
// Levels (changepoint segment means), Peaks (outliers), Scale (max |.|),
// LF (moving average) and HF (residual).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "cshap/changepoint.hpp"
#include "cshap/error.hpp"
#include "cshap/numeric.hpp"
#include "cshap/signal.hpp"

namespace cshap {

enum class PeakRuleKind { kTukey, kLiteralQuartile };

struct PeakRule {
  PeakRuleKind kind = PeakRuleKind::kTukey;
  double tukey_k = 1.5;
};

struct DecomposeParams {
  CpdParams cpd;
  int resample_halo = 20;
  int resample_smooth_window = 20;
  PeakRule peak_rule;
  int peak_noise_smooth_window = 20;
  int lf_window = 75;
  std::uint64_t rng_seed = 0;

  void validate() const {
    cpd.validate();
    require(resample_halo >= 0, "resample_halo must be >= 0");
    require(resample_smooth_window >= 1 && peak_noise_smooth_window >= 1 && lf_window >= 1,
            "decomposition windows must be >= 1");
    require(peak_rule.tukey_k >= 0.0, "tukey_k must be >= 0");
  }
};

struct LevelsResult {
  Series levels;
  Series filtered;
  std::vector<std::size_t> resampled_indices;
};

struct PeaksResult {
  Series peaks;
  Series filtered;
  std::vector<std::size_t> peak_indices;
};

struct ScaleResult {
  double scale = 1.0;
  Series lf;
  Series hf;
};

inline LevelsResult extract_levels(std::span<const double> x, const ChangePoints& cps,
                                   const DecomposeParams& p, Rng& rng) {
  const std::size_t n = x.size();
  std::vector<std::size_t> bounds = {0};
  for (std::size_t cp : cps.indices) {
    require(cp > bounds.back() && cp < n, "change points must be increasing and inside (0, N)");
    bounds.push_back(cp);
  }
  bounds.push_back(n);

  LevelsResult out;
  out.levels.assign(n, 0.0);
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
    const auto seg = x.subspan(bounds[s], bounds[s + 1] - bounds[s]);
    std::fill(out.levels.begin() + static_cast<std::ptrdiff_t>(bounds[s]),
              out.levels.begin() + static_cast<std::ptrdiff_t>(bounds[s + 1]), mean(seg));
  }
  out.filtered.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.filtered[i] = x[i] - out.levels[i];
  if (p.resample_halo == 0 || cps.indices.empty()) return out;

  // Merge the halos [cp - halo, cp + halo) into disjoint blocks; each block
  // remembers the segment preceding its first change point.
  struct Block {
    std::size_t begin, end, segment;
  };
  std::vector<Block> blocks;
  const auto halo = static_cast<std::size_t>(p.resample_halo);
  for (std::size_t k = 0; k < cps.indices.size(); ++k) {
    const std::size_t cp = cps.indices[k];
    const std::size_t b = cp >= halo ? cp - halo : 0;
    const std::size_t e = std::min(n, cp + halo);
    if (!blocks.empty() && b <= blocks.back().end) {
      blocks.back().end = std::max(blocks.back().end, e);
    } else {
      blocks.push_back({b, e, k});
    }
  }

  const Series residual = out.filtered;
  for (const Block& blk : blocks) {
    const auto seg = std::span<const double>(residual).subspan(
        bounds[blk.segment], bounds[blk.segment + 1] - bounds[blk.segment]);
    std::normal_distribution<double> draw(mean(seg), stddev(seg));
    Series fresh(blk.end - blk.begin);
    for (double& v : fresh) v = draw(rng);
    const Series smooth = centered_moving_average(fresh, p.resample_smooth_window);
    for (std::size_t i = blk.begin; i < blk.end; ++i) {
      out.filtered[i] = smooth[i - blk.begin];
      out.resampled_indices.push_back(i);
    }
  }
  return out;
}

inline PeaksResult extract_peaks(std::span<const double> x, const DecomposeParams& p, Rng& rng) {
  const std::size_t n = x.size();
  PeaksResult out;
  out.peaks.assign(n, 0.0);
  out.filtered.assign(x.begin(), x.end());
  if (n < 4) return out;

  const double q1 = quantile(x, 0.25);
  const double q3 = quantile(x, 0.75);
  double lo = q1, hi = q3;
  if (p.peak_rule.kind == PeakRuleKind::kTukey) {
    const double iqr = q3 - q1;
    lo = q1 - p.peak_rule.tukey_k * iqr;
    hi = q3 + p.peak_rule.tukey_k * iqr;
  }
  std::vector<double> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] < lo || x[i] > hi) {
      out.peak_indices.push_back(i);
    } else {
      kept.push_back(x[i]);
    }
  }
  if (out.peak_indices.empty()) return out;

  const double center = median(x);
  std::normal_distribution<double> draw(0.0, stddev(kept));
  Series noise(n);
  for (double& v : noise) v = draw(rng);
  const Series smooth = centered_moving_average(noise, p.peak_noise_smooth_window);
  for (std::size_t i : out.peak_indices) {
    const double replacement = center + smooth[i];
    out.filtered[i] = replacement;
    out.peaks[i] = x[i] - replacement;
  }
  return out;
}

inline ScaleResult extract_scale_lf_hf(std::span<const double> x, const DecomposeParams& p) {
  ScaleResult out;
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  out.scale = m > 0.0 ? m : 1.0;
  Series normalized(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) normalized[i] = x[i] / out.scale;
  out.lf = centered_moving_average(normalized, p.lf_window);
  out.hf.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out.hf[i] = normalized[i] - out.lf[i];
  return out;
}

inline Decomposition decompose(std::span<const double> values, const DecomposeParams& p, Rng& rng) {
  p.validate();
  require(!values.empty(), "cannot decompose an empty series");
  const ChangePoints cps = pelt(values, p.cpd);
  LevelsResult lv = extract_levels(values, cps, p, rng);
  PeaksResult pk = extract_peaks(lv.filtered, p, rng);
  ScaleResult sc = extract_scale_lf_hf(pk.filtered, p);
  Decomposition d;
  d.levels = std::move(lv.levels);
  d.peaks = std::move(pk.peaks);
  d.scale = sc.scale;
  d.lf = std::move(sc.lf);
  d.hf = std::move(sc.hf);
  d.resampled_indices = std::move(lv.resampled_indices);
  d.peak_indices = std::move(pk.peak_indices);
  return d;
}

inline Decomposition decompose(const Signal& s, const DecomposeParams& p, Rng& rng) {
  s.validate();
  return decompose(std::span<const double>(s.values), p, rng);
}

// Seeds a fresh generator from p.rng_seed.
inline Decomposition decompose(std::span<const double> values, const DecomposeParams& p) {
  Rng rng(p.rng_seed);
  return decompose(values, p, rng);
}

// Columnar dump for plotting: index,original,levels,peaks,lf,hf,scale
inline void write_decomposition_debug(std::ostream& os, std::span<const double> original,
                                      const Decomposition& d) {
  require(original.size() == d.size(), "debug dump: original/decomposition length mismatch");
  os << "index,original,levels,peaks,lf,hf,scale\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    os << i << ',' << format_double(original[i]) << ',' << format_double(d.levels[i]) << ','
       << format_double(d.peaks[i]) << ',' << format_double(d.lf[i]) << ','
       << format_double(d.hf[i]) << ',' << format_double(d.scale) << '\n';
  }
}

}  // namespace cshap
