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

// Penalized changepoint detection with PELT and a Gaussian (RBF) kernel cost.
//
// Segment cost on samples x[a..b):
//
//   c(a, b) = (b - a) - 1/(b - a) * sum_{i,j in [a,b)} exp(-(x_i - x_j)^2 / (2 h^2))
//
// which is the within-segment scatter in the kernel feature space. Candidate
// boundaries are restricted to a grid of stride `subsample`; costs are always
// evaluated on the full-resolution samples. The minimized objective is
//
//   sum of segment costs + penalty * (number of change points).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cshap/error.hpp"
#include "cshap/numeric.hpp"

namespace cshap {

struct CpdParams {
  int subsample = 40;
  double penalty = 50.0;
  std::optional<double> kernel_bandwidth;  // nullopt: median heuristic
  int min_segment_length = 2;              // in grid (subsample) units

  void validate() const {
    require(subsample >= 1, "cpd subsample must be >= 1");
    require(penalty >= 0.0 && std::isfinite(penalty), "cpd penalty must be >= 0");
    require(min_segment_length >= 1, "cpd min_segment_length must be >= 1");
    if (kernel_bandwidth) {
      require(*kernel_bandwidth > 0.0, "cpd kernel bandwidth must be positive");
    }
  }

  std::size_t min_segment_samples() const {
    return static_cast<std::size_t>(subsample) * static_cast<std::size_t>(min_segment_length);
  }
};

struct ChangePoints {
  std::vector<std::size_t> indices;  // strictly increasing, each in (0, N)

  std::size_t count() const { return indices.size(); }
  bool operator==(const ChangePoints&) const = default;
};

inline double rbf_kernel(double a, double b, double bandwidth) {
  const double d = a - b;
  return std::exp(-(d * d) / (2.0 * bandwidth * bandwidth));
}

// Direct O(n^2) evaluation.
inline double rbf_segment_cost(std::span<const double> x, std::size_t a, std::size_t b,
                               double bandwidth) {
  if (!(a < b) || b > x.size()) throw DataError("rbf_segment_cost: empty or out-of-range segment");
  const std::size_t len = b - a;
  if (len == 1) return 0.0;
  double s = 0.0;
  for (std::size_t i = a; i < b; ++i) {
    for (std::size_t j = a; j < b; ++j) s += rbf_kernel(x[i], x[j], bandwidth);
  }
  return static_cast<double>(len) - s / static_cast<double>(len);
}

// Median pairwise distance between the stride-`subsample` points of x.
// Falls back to 1 when the points are all equal.
inline double median_heuristic_bandwidth(std::span<const double> x, int subsample) {
  std::vector<double> pts;
  for (std::size_t i = 0; i < x.size(); i += static_cast<std::size_t>(subsample)) pts.push_back(x[i]);
  std::vector<double> dists;
  dists.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) dists.push_back(std::abs(pts[i] - pts[j]));
  }
  if (dists.empty()) return 1.0;
  const double h = median(dists);
  return h > 0.0 ? h : 1.0;
}

// Block-summed kernel matrix over the candidate grid, with 2-D prefix sums so
// that the cost of any grid-aligned segment is O(1).
class RbfGridCost {
 public:
  RbfGridCost(std::span<const double> x, std::size_t stride, double bandwidth)
      : n_(x.size()) {
    for (std::size_t p = 0; p < n_; p += stride) bounds_.push_back(p);
    bounds_.push_back(n_);
    const std::size_t m = bounds_.size() - 1;
    std::vector<double> block(m * m, 0.0);
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = p; q < m; ++q) {
        double s = 0.0;
        for (std::size_t i = bounds_[p]; i < bounds_[p + 1]; ++i) {
          for (std::size_t j = bounds_[q]; j < bounds_[q + 1]; ++j) s += rbf_kernel(x[i], x[j], bandwidth);
        }
        block[p * m + q] = s;
        block[q * m + p] = s;
      }
    }
    prefix_.assign((m + 1) * (m + 1), 0.0);
    const std::size_t w = m + 1;
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = 0; q < m; ++q) {
        prefix_[(p + 1) * w + (q + 1)] =
            block[p * m + q] + prefix_[p * w + (q + 1)] + prefix_[(p + 1) * w + q] - prefix_[p * w + q];
      }
    }
  }

  // Number of grid blocks; grid index k maps to sample position(k).
  std::size_t blocks() const { return bounds_.size() - 1; }
  std::size_t position(std::size_t k) const { return bounds_[k]; }

  // Cost of samples [position(a), position(b)).
  double cost(std::size_t a, std::size_t b) const {
    const std::size_t w = blocks() + 1;
    const double s = prefix_[b * w + b] - prefix_[a * w + b] - prefix_[b * w + a] + prefix_[a * w + a];
    const double len = static_cast<double>(bounds_[b] - bounds_[a]);
    if (bounds_[b] - bounds_[a] == 1) return 0.0;
    return len - s / len;
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> bounds_;
  std::vector<double> prefix_;
};

struct Segmentation {
  ChangePoints change_points;
  double objective = 0.0;
  double bandwidth = 1.0;
};

inline double resolve_bandwidth(std::span<const double> x, const CpdParams& p) {
  return p.kernel_bandwidth ? *p.kernel_bandwidth : median_heuristic_bandwidth(x, p.subsample);
}

// Exact PELT on the grid. A candidate t is discarded once some later grid
// point s satisfies F(t) + c(t, s) > F(s); since splitting never raises the
// kernel cost, t can then never beat s as the last change point for any end
// far enough from s to leave a legal final segment, so t stays usable only
// until that horizon.
inline Segmentation pelt_segmentation(std::span<const double> x, const CpdParams& p) {
  p.validate();
  Segmentation out;
  const std::size_t n = x.size();
  const std::size_t min_len = p.min_segment_samples();
  if (n < 2 * static_cast<std::size_t>(p.subsample) || n == 0) {
    out.bandwidth = n == 0 ? 1.0 : resolve_bandwidth(x, p);
    if (n >= 1) out.objective = rbf_segment_cost(x, 0, n, out.bandwidth);
    return out;
  }
  out.bandwidth = resolve_bandwidth(x, p);
  const RbfGridCost table(x, static_cast<std::size_t>(p.subsample), out.bandwidth);
  const std::size_t m = table.blocks();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::size_t kAlive = std::numeric_limits<std::size_t>::max();

  std::vector<double> best(m + 1, kInf);
  std::vector<std::size_t> prev(m + 1, 0);
  std::vector<std::size_t> expiry(m + 1, kAlive);
  std::vector<std::size_t> candidates = {0};
  best[0] = -p.penalty;

  // First grid index whose position is at least min_len past position(s).
  auto horizon = [&](std::size_t s) {
    std::size_t k = s;
    while (k <= m && table.position(k) - table.position(s) < min_len) ++k;
    return k;
  };

  for (std::size_t b = 1; b <= m; ++b) {
    std::erase_if(candidates, [&](std::size_t t) { return expiry[t] <= b; });
    double best_b = kInf;
    std::size_t arg = 0;
    for (std::size_t t : candidates) {
      if (table.position(b) - table.position(t) < min_len) continue;
      const double v = best[t] + table.cost(t, b) + p.penalty;
      if (v < best_b) {
        best_b = v;
        arg = t;
      }
    }
    if (b == m && best_b == kInf) {
      // Series too short for any legal split: one segment.
      best_b = best[0] + table.cost(0, m) + p.penalty;
      arg = 0;
    }
    best[b] = best_b;
    prev[b] = arg;
    if (best_b == kInf) continue;
    const std::size_t h = horizon(b);
    for (std::size_t t : candidates) {
      if (table.position(b) - table.position(t) < min_len) continue;
      if (best[t] + table.cost(t, b) > best_b) expiry[t] = std::min(expiry[t], h);
    }
    candidates.push_back(b);
  }

  out.objective = best[m];
  std::vector<std::size_t> cps;
  for (std::size_t k = prev[m]; k != 0; k = prev[k]) cps.push_back(table.position(k));
  std::reverse(cps.begin(), cps.end());
  out.change_points.indices = std::move(cps);
  return out;
}

inline ChangePoints pelt(std::span<const double> x, const CpdParams& p) {
  return pelt_segmentation(x, p).change_points;
}

// Penalized objective of an arbitrary segmentation, using direct costs.
inline double penalized_objective(std::span<const double> x, const ChangePoints& cps,
                                  double bandwidth, double penalty) {
  double total = 0.0;
  std::size_t start = 0;
  for (std::size_t cp : cps.indices) {
    total += rbf_segment_cost(x, start, cp, bandwidth);
    start = cp;
  }
  total += rbf_segment_cost(x, start, x.size(), bandwidth);
  return total + penalty * static_cast<double>(cps.count());
}

}  // namespace cshap
