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


#ifndef DTA_NMA_SIMULATE_HPP
#define DTA_NMA_SIMULATE_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dta_nma/dataset.hpp"

namespace dta_nma {

/// Known parameters for a forward simulation of the arm-based model.
struct TruthSpec {
  std::size_t studies = 10;
  std::size_t tests = 2;
  Eigen::Matrix2Xd mu = Eigen::Matrix2Xd::Zero(2, 2);
  std::vector<Eigen::Matrix2Xd> theta;  // one 2 x K matrix per covariate
  Eigen::Vector2d sigma = Eigen::Vector2d::Constant(0.5);
  double rho = 0.0;
  Eigen::Matrix2Xd tau = Eigen::Matrix2Xd::Constant(2, 1, 0.3);  // 2 x 1 or 2 x K
  std::array<int, 2> n_diseased{100, 100};  // inclusive range per arm
  std::array<int, 2> n_healthy{100, 100};
  double covariate_sd = 1.0;  // study covariates ~ N(0, covariate_sd^2)
  std::uint64_t seed = 1;

  std::size_t covariates() const noexcept { return theta.size(); }
  double tau_at(std::size_t j, std::size_t k) const { return tau(j, tau.cols() == 1 ? 0 : k); }

  /// Throws DomainError on inconsistent sizes or invalid values.
  void validate() const;

  /// Keys: studies, tests, mu, theta, sigma, rho, tau, n_diseased, n_healthy,
  /// covariate_sd, seed. Counts accept a number or a [min, max] pair.
  static TruthSpec from_json(const std::string& text);
};

struct LatentRecord {
  Eigen::MatrixX2d eta;                 // I x 2
  std::array<Eigen::MatrixXd, 2> delta;  // per outcome, I x K
  std::array<Eigen::MatrixXd, 2> pi;     // per outcome, I x K
  Eigen::MatrixXd covariates;           // I x P
};

struct Simulation {
  NetworkDataset data;
  LatentRecord latent;
};

/// Complete design: every study reports every test.
Simulation simulate_network(const TruthSpec& truth);

/// Columns: study,test,eta_sens,eta_spec,delta_sens,delta_spec,pi_sens,pi_spec.
void write_latent_csv(std::ostream& out, const Simulation& sim);

struct MarResult {
  NetworkDataset data;
  std::size_t dropped_studies = 0;
};

/// Keeps arm (i, k) with probability keep_prob[k] (dense test order),
/// independently of the counts. Studies left without arms are dropped.
MarResult impose_mar(const NetworkDataset& ds, std::span<const double> keep_prob, std::uint64_t seed);

/// Keeps exactly the arms flagged in `keep`.
MarResult impose_pattern(const NetworkDataset& ds, const MissingnessMatrix& keep);

}  // namespace dta_nma

#endif  // DTA_NMA_SIMULATE_HPP
