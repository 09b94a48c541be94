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

// Independent reference computations used by the test suites and the
// `verify` command. None of these share code paths with the implementations
// they check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "cshap/changepoint.hpp"
#include "cshap/convnet.hpp"
#include "cshap/explain.hpp"

namespace cshap::oracle {

struct PartitionResult {
  double objective = 0.0;
  ChangePoints change_points;
};

// Unpruned optimal-partition DP over the same candidate grid as PELT. Segment
// kernel sums are accumulated sample by sample from a dense kernel matrix.
inline PartitionResult optimal_partition(std::span<const double> x, const CpdParams& p, double bandwidth) {
  const std::size_t n = x.size();
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(p.subsample)) pos.push_back(i);
  pos.push_back(n);
  const std::size_t m = pos.size() - 1;
  const std::size_t min_len = p.min_segment_samples();

  // colsum[e][i] = sum_{r < i} K(x_r, x_e)
  std::vector<std::vector<double>> colsum(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t r = 0; r < n; ++r) colsum[e][r + 1] = colsum[e][r] + rbf_kernel(x[r], x[e], bandwidth);
  }
  // cost[a][b] for grid indices a < b.
  std::vector<std::vector<double>> cost(m + 1, std::vector<double>(m + 1, 0.0));
  for (std::size_t a = 0; a < m; ++a) {
    double s = 0.0;
    std::size_t next = a + 1;
    for (std::size_t e = pos[a]; e < n; ++e) {
      s += 2.0 * (colsum[e][e] - colsum[e][pos[a]]) + 1.0;
      if (e + 1 == pos[next]) {
        const double len = static_cast<double>(e + 1 - pos[a]);
        cost[a][next] = len == 1.0 ? 0.0 : len - s / len;
        ++next;
      }
    }
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> best(m + 1, kInf);
  std::vector<std::size_t> prev(m + 1, 0);
  best[0] = -p.penalty;
  for (std::size_t b = 1; b <= m; ++b) {
    for (std::size_t t = 0; t < b; ++t) {
      if (best[t] == kInf || pos[b] - pos[t] < min_len) continue;
      const double v = best[t] + cost[t][b] + p.penalty;
      if (v < best[b]) {
        best[b] = v;
        prev[b] = t;
      }
    }
  }
  PartitionResult r;
  if (best[m] == kInf) {
    r.objective = cost[0][m];
    return r;
  }
  r.objective = best[m];
  for (std::size_t k = prev[m]; k != 0; k = prev[k]) r.change_points.indices.push_back(pos[k]);
  std::reverse(r.change_points.indices.begin(), r.change_points.indices.end());
  return r;
}

struct GradientCheck {
  double relative_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // perturbation flipped a ReLU; difference quotient meaningless
};

// Central finite differences on a subset of parameters: every `stride`-th one
// (stride 1 checks all of them). Parameters whose +/- step changes the ReLU
// activation pattern are left out of the comparison.
inline GradientCheck finite_difference_check(ConvNet& net, const ConvNet::Matrix& input,
                                             std::span<const int> labels, double step = 1e-3,
                                             std::size_t stride = 1) {
  auto params = net.parameters();
  std::vector<double> analytic(params.size());
  net.loss_and_gradient(input, labels, analytic);
  const std::size_t batch = labels.size();
  const std::uint64_t base = net.activation_signature(input, batch);
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  GradientCheck out;
  for (std::size_t i = 0; i < params.size(); i += stride) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = net.loss(input, labels);
    const bool up_same = net.activation_signature(input, batch) == base;
    params[i] = saved - step;
    const double down = net.loss(input, labels);
    const bool down_same = net.activation_signature(input, batch) == base;
    params[i] = saved;
    if (!up_same || !down_same) {
      ++out.skipped_kinks;
      continue;
    }
    const double numeric = (up - down) / (2.0 * step);
    const double d = analytic[i] - numeric;
    diff2 += d * d;
    a2 += analytic[i] * analytic[i];
    n2 += numeric * numeric;
    out.max_abs_error = std::max(out.max_abs_error, std::abs(d));
    ++out.checked;
  }
  const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
  out.relative_error = denom > 0.0 ? std::sqrt(diff2) / denom : 0.0;
  return out;
}

// Value function of an additive game: v(S) = sum_{i in S} w_i.
inline CoalitionValues additive_game(const ConceptValues& w) {
  CoalitionValues v{};
  for (std::uint32_t s = 0; s < kNumCoalitions; ++s) {
    for (int i = 0; i < kNumConcepts; ++i) {
      if (s & (1u << i)) v[s] += w[i];
    }
  }
  return v;
}

}  // namespace cshap::oracle
