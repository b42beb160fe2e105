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

#ifndef DTA_NMA_CB_MODEL_HPP
#define DTA_NMA_CB_MODEL_HPP

#include <Eigen/Dense>
#include <array>
#include <span>
#include <string>
#include <vector>

#include "dta_nma/ab_model.hpp"
#include "dta_nma/dataset.hpp"

namespace dta_nma {

/// Constrained contrast-based parameters. Contrast columns follow the
/// model's contrast order: non-baseline tests by ascending label.
struct CBParams {
  Eigen::MatrixX2d mu_study;             // I x 2 study baselines
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  Eigen::Vector2d s = Eigen::Vector2d::Ones();
  std::array<Eigen::MatrixXd, 2> delta;  // per outcome, I x (K-1)
  Eigen::Matrix2Xd nu;                   // 2 x (K-1) mean log odds ratios vs baseline
  Eigen::Matrix2Xd contrast_sd;          // 2 x (K-1)

  static CBParams zeros(std::size_t studies, std::size_t tests);
};

/// Study logits for all K tests in contrast order (baseline last) under the
/// sum-to-zero combination: theta_k = mu + delta_k - S/K for a non-baseline
/// test and mu - S/K for the baseline, where S is the sum of the contrasts.
Eigen::VectorXd cb_study_logits(double mu, std::span<const double> contrasts);

/// Accuracies at random effects equal to zero, combined on the logit scale
/// with the same weights. Returns 2 x K probabilities in contrast order.
/// These are conditional accuracies, not population-averaged ones.
Eigen::Matrix2Xd recover_accuracy_cb(const Eigen::Vector2d& m, const Eigen::Matrix2Xd& nu);

/// Throws ValidationError listing every study that does not report the
/// baseline plus at least one other test, or if the baseline is absent.
void validate_cb_design(const NetworkDataset& ds, int baseline_label);

/// Constrained-space log posterior (no Jacobian).
double log_posterior_cb(const CBParams& params, const NetworkDataset& ds, int baseline_label,
                        const PriorSpec& priors);

/// Contrast-based posterior on unconstrained, non-centered coordinates:
///   m (2) | nu (2(K-1)) | mu_z (2I) | delta_z (2I(K-1)) | s (2) | contrast_sd (2(K-1))
class CBModel {
 public:
  CBModel(NetworkDataset ds, int baseline_label, PriorSpec priors);

  std::size_t dim() const noexcept { return dim_; }
  const NetworkDataset& data() const noexcept { return ds_; }
  int baseline_label() const noexcept { return baseline_label_; }
  /// Test labels in contrast order, baseline last.
  const std::vector<int>& contrast_labels() const noexcept { return order_labels_; }

  double log_density(std::span<const double> u) const;
  double log_density_gradient(std::span<const double> u, std::span<double> grad) const;

  CBParams to_constrained(std::span<const double> u) const;
  Eigen::VectorXd to_unconstrained(const CBParams& params) const;
  double log_jacobian(std::span<const double> u) const;

  std::vector<std::string> parameter_names() const;
  std::vector<double> flatten(const CBParams& params) const;

 private:
  template <class T>
  T log_density_impl(std::span<const T> u) const;

  NetworkDataset ds_;
  int baseline_label_;
  PriorSpec priors_;
  std::size_t n_studies_ = 0;
  std::size_t n_contrasts_ = 0;
  std::vector<std::size_t> position_;  // dense test index -> contrast position
  std::vector<int> order_labels_;
  std::size_t off_nu_ = 2, off_mu_ = 0, off_delta_ = 0, off_s_ = 0, off_csd_ = 0, dim_ = 0;
  double log_const_ = 0.0;
};

}  // namespace dta_nma

#endif  // DTA_NMA_CB_MODEL_HPP
