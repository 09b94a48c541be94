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

// Core value types: a sampled signal, the five interpretable concepts and the
// additive/multiplicative decomposition they form:
//
//   y(t) = levels(t) + peaks(t) + scale * (lf(t) + hf(t))

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cshap/error.hpp"
#include "cshap/numeric.hpp"

namespace cshap {

struct Signal {
  Series timestamps;  // seconds, strictly increasing
  Series values;      // metric units

  std::size_t size() const { return values.size(); }

  void validate() const {
    require(!values.empty(), "signal must have at least one sample");
    require(timestamps.size() == values.size(), "signal timestamps/values length mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      require(std::isfinite(values[i]) && std::isfinite(timestamps[i]),
              "signal contains a non-finite value at index " + std::to_string(i));
      if (i > 0) {
        require(timestamps[i] > timestamps[i - 1],
                "signal timestamps not strictly increasing at index " + std::to_string(i));
      }
    }
  }

  bool operator==(const Signal&) const = default;
};

// Order is fixed: it defines the bit position of each concept in a coalition.
enum class ConceptId : std::uint8_t { kLevels = 0, kPeaks = 1, kScale = 2, kLF = 3, kHF = 4 };

inline constexpr int kNumConcepts = 5;
inline constexpr std::array<ConceptId, kNumConcepts> kAllConcepts = {
    ConceptId::kLevels, ConceptId::kPeaks, ConceptId::kScale, ConceptId::kLF, ConceptId::kHF};

inline constexpr std::string_view concept_name(ConceptId c) {
  switch (c) {
    case ConceptId::kLevels: return "Levels";
    case ConceptId::kPeaks: return "Peaks";
    case ConceptId::kScale: return "Scale";
    case ConceptId::kLF: return "LF";
    case ConceptId::kHF: return "HF";
  }
  return "?";
}

inline std::optional<ConceptId> parse_concept(std::string_view name) {
  for (ConceptId c : kAllConcepts) {
    if (concept_name(c) == name) return c;
  }
  return std::nullopt;
}

inline constexpr int concept_index(ConceptId c) { return static_cast<int>(c); }

struct Decomposition {
  Series levels;
  Series peaks;
  double scale = 1.0;
  Series lf;
  Series hf;
  std::vector<std::size_t> resampled_indices;  // sorted
  std::vector<std::size_t> peak_indices;       // sorted

  std::size_t size() const { return levels.size(); }

  void validate() const {
    const std::size_t n = levels.size();
    require(peaks.size() == n && lf.size() == n && hf.size() == n,
            "decomposition components differ in length");
    require(scale > 0.0 && std::isfinite(scale), "decomposition scale must be positive");
  }

  bool operator==(const Decomposition&) const = default;
};

// Set of concepts kept from the explained instance; the complement comes from
// a background decomposition.
class ConceptMask {
 public:
  constexpr ConceptMask() = default;
  constexpr explicit ConceptMask(std::uint32_t bits) : bits_(bits & kFull) {}

  static constexpr ConceptMask all() { return ConceptMask(kFull); }
  static constexpr ConceptMask none() { return ConceptMask(0); }
  static constexpr ConceptMask only(ConceptId c) { return ConceptMask(1u << concept_index(c)); }

  constexpr bool keeps(ConceptId c) const { return (bits_ >> concept_index(c)) & 1u; }
  constexpr ConceptMask with(ConceptId c) const {
    return ConceptMask(bits_ | (1u << concept_index(c)));
  }
  constexpr std::uint32_t bits() const { return bits_; }
  constexpr int count() const { return std::popcount(bits_); }

  constexpr bool operator==(const ConceptMask&) const = default;

 private:
  static constexpr std::uint32_t kFull = (1u << kNumConcepts) - 1;
  std::uint32_t bits_ = 0;
};

inline Series recompose(const Decomposition& d) {
  const std::size_t n = d.size();
  Series y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = d.levels[i] + d.peaks[i] + d.scale * (d.lf[i] + d.hf[i]);
  }
  return y;
}

// Recomposes a hybrid: kept concepts from `instance`, the rest from `background`.
inline Series substitute(const Decomposition& instance, const Decomposition& background,
                         ConceptMask mask) {
  if (instance.size() != background.size()) {
    throw DataError("substitute: instance length " + std::to_string(instance.size()) +
                    " != background length " + std::to_string(background.size()) +
                    " (fit the background to the window length first)");
  }
  auto pick = [&](ConceptId c) -> const Decomposition& {
    return mask.keeps(c) ? instance : background;
  };
  const Series& levels = pick(ConceptId::kLevels).levels;
  const Series& peaks = pick(ConceptId::kPeaks).peaks;
  const double scale = pick(ConceptId::kScale).scale;
  const Series& lf = pick(ConceptId::kLF).lf;
  const Series& hf = pick(ConceptId::kHF).hf;
  const std::size_t n = instance.size();
  Series y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = levels[i] + peaks[i] + scale * (lf[i] + hf[i]);
  }
  return y;
}

}  // namespace cshap
