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

#ifndef DTA_NMA_MATH_HPP
#define DTA_NMA_MATH_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace dta_nma::math {

inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178;  // log(sqrt(2 pi))
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double inv_logit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// log(1 + exp(x)) without overflow.
inline double log1p_exp(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// log(inv_logit(x)).
inline double log_inv_logit(double x) { return -log1p_exp(-x); }

/// log(1 - tanh(u)^2), stable for large |u|.
inline double log1m_tanh_sq(double u) {
  const double a = std::abs(u);
  return 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
}

inline double square(double x) { return x * x; }

/// log C(n, k).
inline double lchoose(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

/// Binomial log-pmf of y successes in n trials at success probability
/// inv_logit(x), without the log C(n, y) term.
inline double binomial_logit_kernel(std::int64_t y, std::int64_t n, double x) {
  return static_cast<double>(y) * log_inv_logit(x) + static_cast<double>(n - y) * log_inv_logit(-x);
}

inline double normal_lpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrtTwoPi;
}

}  // namespace dta_nma::math

#endif  // DTA_NMA_MATH_HPP
