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

#ifndef DTA_NMA_AB_MODEL_HPP
#define DTA_NMA_AB_MODEL_HPP

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dta_nma/dataset.hpp"

namespace dta_nma {

// Outcome index convention: 0 = diseased / sensitivity, 1 = healthy / specificity.
inline constexpr std::array<const char*, 2> kOutcomeNames = {"sens", "spec"};

enum class CovarianceStructure { compound_symmetry, unstructured };

struct CovarianceSpec {
  CovarianceStructure structure = CovarianceStructure::compound_symmetry;
  /// When set, every tau is held at this value instead of being sampled.
  /// A value of exactly 0 removes the arm errors from the model.
  std::optional<double> fixed_tau;

  /// Number of tau columns per outcome for a K-test network.
  std::size_t tau_columns(std::size_t n_tests) const {
    return structure == CovarianceStructure::unstructured ? n_tests : 1;
  }
};

enum class ScalePrior { uniform, half_cauchy };
enum class CorrelationPrior { atanh_normal, uniform, lkj };

/// Hyperpriors. Means (mu, theta, and atanh(rho) under atanh_normal) get
/// Normal(0, mean_sd); scales get Uniform(0, uniform_upper) or
/// HalfCauchy(0, cauchy_scale).
struct PriorSpec {
  double mean_sd = 5.0;
  ScalePrior scale = ScalePrior::uniform;
  double uniform_upper = 5.0;
  double cauchy_scale = 2.5;
  CorrelationPrior correlation = CorrelationPrior::atanh_normal;
  double lkj_shape = 1.0;

  /// "eq14" (default), "eq15", "lkj1", "lkj2".
  static PriorSpec from_preset(std::string_view name);
  void validate() const;
};

/// Constrained arm-based parameters.
struct ABParams {
  Eigen::Matrix2Xd mu;                 // 2 x K logit means
  std::vector<Eigen::Matrix2Xd> theta; // P entries of 2 x K covariate coefficients
  Eigen::MatrixX2d eta;                // I x 2 study effects
  std::array<Eigen::MatrixXd, 2> delta;  // per outcome, I x K; only observed arms are used
  Eigen::Vector2d sigma = Eigen::Vector2d::Ones();
  double rho = 0.0;
  Eigen::Matrix2Xd tau;                // 2 x 1 (compound symmetry) or 2 x K

  /// Zero-initialized parameters sized for a dataset.
  static ABParams zeros(std::size_t studies, std::size_t tests, std::size_t covariates,
                        std::size_t tau_columns);

  double tau_at(std::size_t j, std::size_t k) const { return tau(j, tau.cols() == 1 ? 0 : k); }
};

/// Sigma = diag(sigma) * [[1, rho], [rho, 1]] * diag(sigma).
Eigen::Matrix2d assemble_covariance(const Eigen::Vector2d& sigma, double rho);

/// sigma_j^2 / sqrt((sigma_j^2 + tau_k^2)(sigma_j^2 + tau_l^2)).
double intra_study_correlation(double sigma_j, double tau_k, double tau_l);

/// Binomial log-likelihood over the observed arms, normalizing constants included.
double log_likelihood_ab(const ABParams& params, const NetworkDataset& ds);

/// pi_ijk of every observed arm (rows follow ds.observed()), sensitivity first.
Eigen::MatrixX2d fitted_probabilities(const ABParams& params, const NetworkDataset& ds);

/// Random-effect densities of eta and of the observed-arm delta plus all
/// hyperpriors, evaluated in the constrained space. -inf outside support.
double log_prior_ab(const ABParams& params, const NetworkDataset& ds, const PriorSpec& priors,
                    const CovarianceSpec& cov);

/// Arm-based posterior on an unconstrained, non-centered coordinate system.
///
/// Layout of the unconstrained vector:
///   mu (2K) | theta (P*2K) | eta_z (2I) | delta_z (2 per observed arm) |
///   sigma (2) | atanh(rho) (1) | tau (2 or 2K, absent when fixed)
/// Scales use scaled-logit under a uniform prior and log under half-Cauchy.
/// eta = L z with L the Cholesky factor of Sigma; delta = tau * z.
class ABModel {
 public:
  ABModel(NetworkDataset ds, PriorSpec priors, CovarianceSpec cov);

  std::size_t dim() const noexcept { return dim_; }
  const NetworkDataset& data() const noexcept { return ds_; }
  const PriorSpec& priors() const noexcept { return priors_; }
  const CovarianceSpec& covariance() const noexcept { return cov_; }
  bool has_delta() const noexcept { return has_delta_; }

  double log_density(std::span<const double> u) const;
  /// Log density plus its exact gradient. Throws DomainError on non-finite u.
  double log_density_gradient(std::span<const double> u, std::span<double> grad) const;

  ABParams to_constrained(std::span<const double> u) const;
  Eigen::VectorXd to_unconstrained(const ABParams& params) const;
  double log_jacobian(std::span<const double> u) const;

  /// Canonical constrained parameter names, hyperparameters first.
  std::vector<std::string> parameter_names() const;
  std::vector<double> flatten(const ABParams& params) const;
  ABParams unflatten(std::span<const double> values) const;

 private:
  template <class T>
  T log_density_impl(std::span<const T> u) const;

  double scale_to_unconstrained(double s) const;
  double scale_from_unconstrained(double u) const;

  NetworkDataset ds_;
  PriorSpec priors_;
  CovarianceSpec cov_;
  bool has_delta_ = true;
  std::size_t n_studies_ = 0;
  std::size_t n_tests_ = 0;
  std::size_t n_cov_ = 0;
  std::size_t tau_cols_ = 1;
  std::size_t off_theta_ = 0, off_eta_ = 0, off_delta_ = 0, off_sigma_ = 0, off_rho_ = 0,
              off_tau_ = 0, dim_ = 0;
  double log_const_ = 0.0;
};

}  // namespace dta_nma

#endif  // DTA_NMA_AB_MODEL_HPP
