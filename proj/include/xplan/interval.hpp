/* Copyright 2026 The xplan Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace xplan {

/// Cardinality interval [lo, hi] with a confidence in [0, 1].
/// Exact estimates have lo == hi and confidence 1.0.
struct CardinalityEstimate {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  double confidence = 1.0;

  static CardinalityEstimate exact(std::int64_t n) { return {n, n, 1.0}; }

  bool is_exact() const { return lo == hi && confidence == 1.0; }
  bool contains(std::int64_t n) const { return lo <= n && n <= hi; }
  double midpoint() const { return 0.5 * (static_cast<double>(lo) + static_cast<double>(hi)); }

  friend bool operator==(const CardinalityEstimate&, const CardinalityEstimate&) = default;
};

/// Cost interval in milliseconds with a confidence in [0, 1].
struct CostEstimate {
  double lo = 0.0;
  double hi = 0.0;
  double confidence = 1.0;

  static CostEstimate zero() { return {0.0, 0.0, 1.0}; }

  CostEstimate& operator+=(const CostEstimate& o) {
    lo += o.lo;
    hi += o.hi;
    confidence = std::min(confidence, o.confidence);
    return *this;
  }
  friend CostEstimate operator+(CostEstimate a, const CostEstimate& b) { return a += b; }
  friend CostEstimate operator*(CostEstimate a, double k) {
    a.lo *= k;
    a.hi *= k;
    return a;
  }
  friend bool operator==(const CostEstimate&, const CostEstimate&) = default;
};

/// Collapses a cost interval to one comparable number: the geometric mean of
/// the bounds, smoothed by epsilon = 1 ms so lo == 0 stays defined.
///   scalar_cost([lo,hi]) = sqrt((lo+1)(hi+1)) - 1
inline double scalar_cost(const CostEstimate& ce) {
  constexpr double kEps = 1.0;
  return std::sqrt((ce.lo + kEps) * (ce.hi + kEps)) - kEps;
}

}  // namespace xplan
