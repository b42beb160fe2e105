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


#ifndef DTA_NMA_TESTS_SUPPORT_HPP
#define DTA_NMA_TESTS_SUPPORT_HPP

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dta_nma/dataset.hpp"

namespace support {

inline dta_nma::StudyArm arm(std::string study, int test, std::int64_t tp, std::int64_t nd, std::int64_t tn,
                             std::int64_t nh, std::vector<double> cov = {}) {
  dta_nma::StudyArm a;
  a.study_id = std::move(study);
  a.test_id = test;
  a.tp = tp;
  a.n_diseased = nd;
  a.tn = tn;
  a.n_healthy = nh;
  a.covariates = std::move(cov);
  return a;
}

inline dta_nma::NetworkDataset parse(const std::string& csv) {
  std::istringstream in(csv);
  return dta_nma::parse_dataset(in);
}

/// Random network: each study reports a random nonempty subset of 1..K.
inline dta_nma::NetworkDataset random_network(std::size_t studies, std::size_t tests, std::size_t covariates,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_dist(5, 60);
  std::normal_distribution<double> normal;
  std::vector<dta_nma::StudyArm> arms;
  for (std::size_t i = 0; i < studies; ++i) {
    std::vector<double> cov(covariates);
    for (auto& c : cov) c = normal(rng);
    std::vector<int> tests_here;
    while (tests_here.empty()) {
      for (std::size_t k = 1; k <= tests; ++k) {
        if (std::bernoulli_distribution(0.6)(rng)) tests_here.push_back(static_cast<int>(k));
      }
    }
    for (int k : tests_here) {
      const int nd = n_dist(rng);
      const int nh = n_dist(rng);
      const int tp = std::uniform_int_distribution<int>(0, nd)(rng);
      const int tn = std::uniform_int_distribution<int>(0, nh)(rng);
      arms.push_back(arm("s" + std::to_string(i + 1), k, tp, nd, tn, nh, cov));
    }
  }
  return dta_nma::NetworkDataset::from_arms(std::move(arms));
}

/// Random network in which every study reports every test.
inline dta_nma::NetworkDataset complete_network(std::size_t studies, std::size_t tests, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_dist(20, 80);
  std::vector<dta_nma::StudyArm> arms;
  for (std::size_t i = 0; i < studies; ++i) {
    for (std::size_t k = 1; k <= tests; ++k) {
      const int nd = n_dist(rng);
      const int nh = n_dist(rng);
      const int tp = std::uniform_int_distribution<int>(nd / 2, nd)(rng);
      const int tn = std::uniform_int_distribution<int>(nh / 2, nh)(rng);
      arms.push_back(arm("s" + std::to_string(i + 1), static_cast<int>(k), tp, nd, tn, nh));
    }
  }
  return dta_nma::NetworkDataset::from_arms(std::move(arms));
}

}  // namespace support

#endif  // DTA_NMA_TESTS_SUPPORT_HPP
