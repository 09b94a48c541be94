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

#include <stdexcept>
#include <string>

namespace cshap {

// Bad input data: malformed files, inconsistent shapes, invalid parameters.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller misuse of an API or CLI (unknown option, wrong model kind).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure during training (non-finite loss, exploding weights).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw DataError(what);
}

}  // namespace cshap
