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


#include "dta_nma/simulate.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <random>

#include <json.hpp>

#include "dta_nma/errors.hpp"
#include "dta_nma/math.hpp"

namespace dta_nma {

namespace {

using nlohmann::json;

std::seed_seq make_seed(std::uint64_t seed) {
  return std::seed_seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32)};
}

Eigen::Matrix2Xd matrix_from_json(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_array() || j[0].size() != j[1].size()) {
    throw DomainError("'" + key + "' must be a 2 x K array");
  }
  Eigen::Matrix2Xd m(2, static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < j[r].size(); ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

std::array<int, 2> range_from_json(const json& j, const std::string& key) {
  if (j.is_number_integer()) return {j.get<int>(), j.get<int>()};
  if (j.is_array() && j.size() == 2) return {j[0].get<int>(), j[1].get<int>()};
  throw DomainError("'" + key + "' must be an integer or a [min, max] pair");
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

MarResult rebuild(const NetworkDataset& ds, const std::vector<bool>& keep) {
  std::vector<StudyArm> arms;
  std::vector<bool> study_kept(ds.n_studies(), false);
  for (std::size_t a = 0; a < ds.arms().size(); ++a) {
    if (!keep[a]) continue;
    arms.push_back(ds.arms()[a]);
    study_kept[ds.observed()[a].study] = true;
  }
  MarResult out;
  for (bool kept : study_kept) out.dropped_studies += kept ? 0 : 1;
  out.data = NetworkDataset::from_arms(std::move(arms));
  return out;
}

}  // namespace

void TruthSpec::validate() const {
  if (studies < 1 || tests < 1) throw DomainError("truth needs at least one study and one test");
  const auto k = static_cast<Eigen::Index>(tests);
  if (mu.cols() != k) throw DomainError("mu must be 2 x K");
  for (const auto& t : theta) {
    if (t.cols() != k) throw DomainError("theta entries must be 2 x K");
  }
  if (!mu.allFinite()) throw DomainError("mu must be finite");
  if (!(sigma.array() >= 0.0).all() || !sigma.allFinite()) throw DomainError("sigma must be >= 0");
  if (!(std::abs(rho) < 1.0)) throw DomainError("rho must lie in (-1, 1)");
  if (tau.cols() != 1 && tau.cols() != k) throw DomainError("tau must be 2 x 1 or 2 x K");
  if (!(tau.array() >= 0.0).all() || !tau.allFinite()) throw DomainError("tau must be >= 0");
  for (const auto& r : {n_diseased, n_healthy}) {
    if (r[0] < 1 || r[1] < r[0]) throw DomainError("subject counts need 1 <= min <= max");
  }
  if (!(covariate_sd >= 0.0)) throw DomainError("covariate_sd must be >= 0");
}

TruthSpec TruthSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DomainError(std::string("truth spec is not valid JSON: ") + e.what());
  }
  TruthSpec t;
  try {
    t.mu = matrix_from_json(j.at("mu"), "mu");
    t.tests = static_cast<std::size_t>(t.mu.cols());
    t.studies = j.at("studies").get<std::size_t>();
    if (j.contains("tests") && j["tests"].get<std::size_t>() != t.tests) {
      throw DomainError("'tests' disagrees with the width of mu");
    }
    if (j.contains("theta")) {
      for (const auto& th : j["theta"]) t.theta.push_back(matrix_from_json(th, "theta"));
    }
    if (j.contains("sigma")) {
      t.sigma = Eigen::Vector2d(j["sigma"].at(0).get<double>(), j["sigma"].at(1).get<double>());
    }
    if (j.contains("rho")) t.rho = j["rho"].get<double>();
    if (j.contains("tau")) {
      const auto& tj = j["tau"];
      if (tj.is_array() && tj.size() == 2 && tj[0].is_number()) {
        t.tau = Eigen::Matrix2Xd(2, 1);
        t.tau << tj[0].get<double>(), tj[1].get<double>();
      } else {
        t.tau = matrix_from_json(tj, "tau");
      }
    }
    if (j.contains("n_diseased")) t.n_diseased = range_from_json(j["n_diseased"], "n_diseased");
    if (j.contains("n_healthy")) t.n_healthy = range_from_json(j["n_healthy"], "n_healthy");
    if (j.contains("covariate_sd")) t.covariate_sd = j["covariate_sd"].get<double>();
    if (j.contains("seed")) t.seed = j["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw DomainError(std::string("bad truth spec: ") + e.what());
  }
  t.validate();
  return t;
}

Simulation simulate_network(const TruthSpec& t) {
  t.validate();
  auto seq = make_seed(t.seed);
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> n_dis(t.n_diseased[0], t.n_diseased[1]);
  std::uniform_int_distribution<int> n_hea(t.n_healthy[0], t.n_healthy[1]);

  const auto n_i = static_cast<Eigen::Index>(t.studies);
  const auto n_k = static_cast<Eigen::Index>(t.tests);
  const std::size_t n_p = t.covariates();
  Simulation sim;
  LatentRecord& lat = sim.latent;
  lat.eta = Eigen::MatrixX2d::Zero(n_i, 2);
  lat.covariates = Eigen::MatrixXd::Zero(n_i, static_cast<Eigen::Index>(n_p));
  for (std::size_t j = 0; j < 2; ++j) {
    lat.delta[j] = Eigen::MatrixXd::Zero(n_i, n_k);
    lat.pi[j] = Eigen::MatrixXd::Zero(n_i, n_k);
  }
  const double l21 = t.sigma(1) * t.rho;
  const double l22 = t.sigma(1) * std::sqrt(1.0 - t.rho * t.rho);

  std::vector<StudyArm> arms;
  arms.reserve(t.studies * t.tests);
  for (Eigen::Index i = 0; i < n_i; ++i) {
    std::vector<double> x(n_p);
    for (std::size_t q = 0; q < n_p; ++q) x[q] = t.covariate_sd * normal(rng);
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    lat.eta(i, 0) = t.sigma(0) * z1;
    lat.eta(i, 1) = l21 * z1 + l22 * z2;
    for (std::size_t q = 0; q < n_p; ++q) lat.covariates(i, static_cast<Eigen::Index>(q)) = x[q];

    for (Eigen::Index k = 0; k < n_k; ++k) {
      StudyArm arm;
      arm.study_id = "s" + std::to_string(i + 1);
      arm.test_id = static_cast<int>(k + 1);
      arm.covariates = x;
      for (std::size_t j = 0; j < 2; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double d = t.tau_at(j, static_cast<std::size_t>(k)) * normal(rng);
        double lin = t.mu(jj, k) + lat.eta(i, jj) + d;
        for (std::size_t q = 0; q < n_p; ++q) lin += t.theta[q](jj, k) * x[q];
        lat.delta[j](i, k) = d;
        lat.pi[j](i, k) = math::inv_logit(lin);
      }
      arm.n_diseased = n_dis(rng);
      arm.n_healthy = n_hea(rng);
      arm.tp = std::binomial_distribution<std::int64_t>(arm.n_diseased, lat.pi[0](i, k))(rng);
      arm.tn = std::binomial_distribution<std::int64_t>(arm.n_healthy, lat.pi[1](i, k))(rng);
      arms.push_back(std::move(arm));
    }
  }
  sim.data = NetworkDataset::from_arms(std::move(arms));
  return sim;
}

void write_latent_csv(std::ostream& out, const Simulation& sim) {
  const auto& lat = sim.latent;
  out << "study,test,eta_sens,eta_spec,delta_sens,delta_spec,pi_sens,pi_spec\n";
  for (const auto& a : sim.data.observed()) {
    const auto i = static_cast<Eigen::Index>(a.study);
    const auto k = static_cast<Eigen::Index>(a.test);
    out << sim.data.study_labels()[a.study] << ',' << sim.data.test_labels()[a.test] << ','
        << fmt(lat.eta(i, 0)) << ',' << fmt(lat.eta(i, 1)) << ',' << fmt(lat.delta[0](i, k)) << ','
        << fmt(lat.delta[1](i, k)) << ',' << fmt(lat.pi[0](i, k)) << ',' << fmt(lat.pi[1](i, k)) << '\n';
  }
}

MarResult impose_mar(const NetworkDataset& ds, std::span<const double> keep_prob, std::uint64_t seed) {
  if (keep_prob.size() != ds.n_tests()) throw DomainError("need one keep probability per test");
  for (double p : keep_prob) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("keep probabilities must lie in [0, 1]");
  }
  auto seq = make_seed(seed);
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<bool> keep(ds.arms().size());
  for (std::size_t a = 0; a < keep.size(); ++a) {
    keep[a] = unif(rng) < keep_prob[ds.observed()[a].test];
  }
  return rebuild(ds, keep);
}

MarResult impose_pattern(const NetworkDataset& ds, const MissingnessMatrix& pattern) {
  if (pattern.studies() != ds.n_studies() || pattern.tests() != ds.n_tests()) {
    throw DomainError("pattern must be I x K");
  }
  std::vector<bool> keep(ds.arms().size());
  for (std::size_t a = 0; a < keep.size(); ++a) {
    keep[a] = pattern(ds.observed()[a].study, ds.observed()[a].test);
  }
  return rebuild(ds, keep);
}

}  // namespace dta_nma
