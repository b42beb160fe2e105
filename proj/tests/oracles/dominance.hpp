// Copyright 2026 The dta_nma Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef DTA_NMA_TESTS_ORACLES_DOMINANCE_HPP
#define DTA_NMA_TESTS_ORACLES_DOMINANCE_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

namespace oracles {

struct Point {
  double sens;
  double spec;
};

/// Reduced fraction; den == 0 marks infinity (num > 0) or undefined (num == 0).
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 0;
};

/// Pairwise enumeration of (2a + c) / (2b + c) over unordered pairs.
inline std::vector<Fraction> superiority_bruteforce(const std::vector<Point>& pts, double tol) {
  const std::size_t n = pts.size();
  std::vector<std::int64_t> a(n, 0), b(n, 0), c(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k + 1; l < n; ++l) {
      const double ds = pts[k].sens - pts[l].sens;
      const double dp = pts[k].spec - pts[l].spec;
      const int s = ds > tol ? 1 : (ds < -tol ? -1 : 0);
      const int p = dp > tol ? 1 : (dp < -tol ? -1 : 0);
      if (s == 1 && p == 1) {
        ++a[k];
        ++b[l];
      } else if (s == -1 && p == -1) {
        ++a[l];
        ++b[k];
      } else if (s == 0 && p == 0) {
        ++c[k];
        ++c[l];
      }
    }
  }
  std::vector<Fraction> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::int64_t num = 2 * a[k] + c[k];
    std::int64_t den = 2 * b[k] + c[k];
    const std::int64_t g = std::gcd(num, den);
    if (g > 0) {
      num /= g;
      den /= g;
    }
    out[k] = {num, den};
  }
  return out;
}

/// Odds product, written independently of the library formula.
inline double dor_oracle(double sens, double spec) {
  const double odds_sens = sens / (1.0 - sens);
  const double odds_spec = spec / (1.0 - spec);
  return odds_sens * odds_spec;
}

}  // namespace oracles

#endif  // DTA_NMA_TESTS_ORACLES_DOMINANCE_HPP
