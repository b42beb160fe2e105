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


#ifndef DTA_NMA_POSTERIOR_HPP
#define DTA_NMA_POSTERIOR_HPP

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dta_nma/ab_model.hpp"
#include "dta_nma/cb_model.hpp"
#include "dta_nma/sampler.hpp"

namespace dta_nma {

/// Posterior mean with an equal-tailed 95% interval.
struct Summary {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Type-7 quantile (linear interpolation between order statistics) of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

/// Throws DomainError for fewer than two values.
Summary summarize(std::span<const double> values);

/// "0.66 [0.41, 1.04]"
std::string format_summary(const Summary& s, int precision = 2);

/// Per-draw accuracies: one 2 x K matrix per posterior draw, row 0 sensitivity.
using AccuracyDraws = std::vector<Eigen::Matrix2Xd>;

struct MarginalOptions {
  int mc_samples = 1000;
  std::uint64_t seed = 20260101;
  /// Covariate value at which accuracies are evaluated. Empty means all zeros.
  std::vector<double> covariates;
};

/// Monte Carlo estimate of E[inv_logit(mu + eta + delta)] with
/// eta ~ N(0, sd_eta^2) and delta ~ N(0, sd_delta^2), using antithetic pairs.
double marginal_mean(double mu, double sd_eta, double sd_delta, int mc_samples, std::uint64_t seed);

/// Constrained AB parameters of every stored draw, chains concatenated.
std::vector<ABParams> ab_parameter_draws(const ABModel& model, const Draws& draws);

AccuracyDraws marginal_accuracy(const std::vector<ABParams>& draws, const MarginalOptions& options);

/// Accuracies recovered from CB draws, in the dataset's test order.
AccuracyDraws cb_accuracy_draws(const CBModel& model, const Draws& draws);

/// Per-draw ratio and difference of test k against test ref for outcome j.
struct RelativeSeries {
  std::vector<double> ratio;
  std::vector<double> difference;
};
RelativeSeries relative_series(const AccuracyDraws& acc, std::size_t j, std::size_t k, std::size_t ref);

struct RelativeMeasure {
  int test = 0;
  int reference = 0;
  std::size_t outcome = 0;
  Summary ratio;
  Summary difference;
};

/// One entry per test and outcome, the reference included (ratio 1, difference 0).
std::vector<RelativeMeasure> relative_measures(const AccuracyDraws& acc, const std::vector<int>& labels,
                                               int reference_label);

/// Diagnostic odds ratio. Throws DomainError unless both inputs lie in (0, 1).
double dor(double sens, double spec);

struct DominanceCounts {
  int dominated = 0;   // a
  int dominating = 0;  // b
  int tied = 0;        // c
};

/// Exact value (2a + c) / (2b + c). A zero denominator with a positive
/// numerator is infinite; 0 / 0 is undefined.
struct SuperiorityRatio {
  long long num = 0;
  long long den = 0;

  bool undefined() const noexcept { return num == 0 && den == 0; }
  bool infinite() const noexcept { return den == 0 && num > 0; }
  double value() const;
};

std::vector<DominanceCounts> dominance_counts(const Eigen::Matrix2Xd& acc, double tie_tol = 0.0);
std::vector<SuperiorityRatio> superiority_ratios(const Eigen::Matrix2Xd& acc, double tie_tol = 0.0);

struct SuperioritySummary {
  double median = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t n_infinite = 0;
  std::size_t n_undefined = 0;
};

/// Median and 2.5/97.5 percentiles of S_k over draws; undefined draws are
/// excluded and counted. Throws DomainError when K < 2.
std::vector<SuperioritySummary> superiority_index(const AccuracyDraws& acc, double tie_tol = 0.0);

struct OutcomeVariance {
  Summary total;       // sigma^2 + tau^2, tau averaged over tests when unstructured
  Summary percent;     // 100 sigma^2 / total
  std::vector<Summary> total_by_test;    // unstructured only
  std::vector<Summary> percent_by_test;  // unstructured only
  /// Intra-study correlation between tests. One entry under compound
  /// symmetry; otherwise one per pair in VarianceReport::test_pairs order.
  std::vector<Summary> intra_correlation;
};

struct VarianceReport {
  bool unstructured = false;
  std::vector<int> test_labels;
  std::array<OutcomeVariance, 2> outcomes;
  std::vector<std::pair<int, int>> test_pairs;  // (k, l) labels with k < l, unstructured only
  Summary rho;
};

VarianceReport variance_partition(const std::vector<ABParams>& draws, const std::vector<int>& test_labels);

struct TestAccuracy {
  int test = 0;
  std::array<Summary, 2> accuracy;
  Summary dor;
  SuperioritySummary superiority;
};

struct AccuracySummary {
  std::vector<TestAccuracy> tests;
  int reference = 0;
  std::vector<RelativeMeasure> relative;
};

AccuracySummary summarize_accuracy(const AccuracyDraws& acc, const std::vector<int>& labels,
                                   int reference_label, double tie_tol = 0.0);

}  // namespace dta_nma

#endif  // DTA_NMA_POSTERIOR_HPP
