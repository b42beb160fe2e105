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

#ifndef DTA_NMA_SRC_TRANSFORMS_HPP
#define DTA_NMA_SRC_TRANSFORMS_HPP

#include <cmath>
#include <numbers>

#include "dta_nma/ab_model.hpp"
#include "dta_nma/autodiff.hpp"
#include "dta_nma/errors.hpp"
#include "dta_nma/math.hpp"

// Shared constraining transforms for the AB and CB posteriors. Written once
// as templates so the same code runs on double and on ad::Var.

namespace dta_nma::detail {

template <class T>
struct Constrained {
  T value;
  T log_jacobian;
};

/// Positive scale from an unconstrained coordinate: scaled logit onto
/// (0, upper) for the uniform prior, exp for half-Cauchy.
template <class T>
Constrained<T> constrain_scale(const T& u, const PriorSpec& p) {
  using std::exp;
  using math::log_inv_logit;
  using math::inv_logit;
  if (p.scale == ScalePrior::uniform) {
    const double b = p.uniform_upper;
    return {b * inv_logit(u), std::log(b) + log_inv_logit(u) + log_inv_logit(-u)};
  }
  return {exp(u), u};
}

inline double unconstrain_scale(double s, const PriorSpec& p) {
  if (p.scale == ScalePrior::uniform) {
    if (!(s > 0.0 && s < p.uniform_upper)) {
      throw DomainError("scale " + std::to_string(s) + " outside (0, " +
                        std::to_string(p.uniform_upper) + ")");
    }
    return math::logit(s / p.uniform_upper);
  }
  if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("scale must be positive and finite");
  return std::log(s);
}

/// Log prior density of one scale parameter. Under the uniform prior this is
/// the constant -log(upper); support is enforced by the transform.
template <class T>
T scale_log_prior(const T& s, const PriorSpec& p) {
  using std::log1p;
  using math::square;
  if (p.scale == ScalePrior::uniform) return T(-std::log(p.uniform_upper));
  const double c = p.cauchy_scale;
  return std::log(2.0 / (std::numbers::pi * c)) - log1p(square(s / c));
}

/// Constrained-space scale log prior; -inf outside support.
inline double scale_log_prior_checked(double s, const PriorSpec& p) {
  if (p.scale == ScalePrior::uniform) {
    return (s > 0.0 && s < p.uniform_upper) ? -std::log(p.uniform_upper) : math::kNegInf;
  }
  if (!(s > 0.0)) return math::kNegInf;
  return scale_log_prior(s, p);
}

/// log normalizing constant of the 2x2 LKJ density on rho:
/// (1 - rho^2)^(nu - 1) / (2^(2 nu - 1) B(nu, nu)).
inline double lkj2_log_norm(double nu) {
  return (2.0 * nu - 1.0) * std::numbers::ln2 + 2.0 * std::lgamma(nu) - std::lgamma(2.0 * nu);
}

/// Log prior of rho plus the log Jacobian of rho = tanh(u), as a function of u.
template <class T>
T correlation_log_prior_u(const T& u, const PriorSpec& p) {
  using math::log1m_tanh_sq;
  switch (p.correlation) {
    case CorrelationPrior::atanh_normal: {
      const double sd = p.mean_sd;
      return -0.5 * (u / sd) * (u / sd) - std::log(sd) - math::kLogSqrtTwoPi;
    }
    case CorrelationPrior::uniform:
      return -std::numbers::ln2 + log1m_tanh_sq(u);
    case CorrelationPrior::lkj:
      return p.lkj_shape * log1m_tanh_sq(u) - lkj2_log_norm(p.lkj_shape);
  }
  return T(0.0);
}

/// Constrained-space log prior of rho; -inf outside (-1, 1).
inline double correlation_log_prior(double rho, const PriorSpec& p) {
  if (!(std::abs(rho) < 1.0)) return math::kNegInf;
  const double l1m = std::log1p(-rho * rho);
  switch (p.correlation) {
    case CorrelationPrior::atanh_normal:
      return math::normal_lpdf(std::atanh(rho), 0.0, p.mean_sd) - l1m;
    case CorrelationPrior::uniform:
      return -std::numbers::ln2;
    case CorrelationPrior::lkj:
      return (p.lkj_shape - 1.0) * l1m - lkj2_log_norm(p.lkj_shape);
  }
  return 0.0;
}

inline void require_finite(std::span<const double> u) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i])) {
      throw DomainError("non-finite unconstrained coordinate at index " + std::to_string(i));
    }
  }
}

}  // namespace dta_nma::detail

#endif  // DTA_NMA_SRC_TRANSFORMS_HPP
