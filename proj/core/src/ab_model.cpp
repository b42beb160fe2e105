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

#include "dta_nma/ab_model.hpp"

#include <cmath>
#include <numbers>

#include "dta_nma/autodiff.hpp"
#include "dta_nma/errors.hpp"
#include "dta_nma/math.hpp"
#include "transforms.hpp"

namespace dta_nma {

PriorSpec PriorSpec::from_preset(std::string_view name) {
  PriorSpec p;
  if (name == "eq14") return p;
  if (name == "eq15") {
    p.correlation = CorrelationPrior::uniform;
    p.scale = ScalePrior::half_cauchy;
    return p;
  }
  if (name == "lkj1" || name == "lkj2") {
    p.correlation = CorrelationPrior::lkj;
    p.lkj_shape = name == "lkj1" ? 1.0 : 2.0;
    return p;
  }
  throw DomainError("unknown prior preset '" + std::string(name) + "'");
}

void PriorSpec::validate() const {
  if (!(mean_sd > 0.0)) throw DomainError("mean prior sd must be positive");
  if (!(uniform_upper > 0.0)) throw DomainError("uniform scale prior upper bound must be positive");
  if (!(cauchy_scale > 0.0)) throw DomainError("half-Cauchy scale must be positive");
  if (correlation == CorrelationPrior::lkj && !(lkj_shape >= 1.0)) {
    throw DomainError("LKJ shape must be >= 1");
  }
}

ABParams ABParams::zeros(std::size_t studies, std::size_t tests, std::size_t covariates,
                         std::size_t tau_columns) {
  ABParams p;
  p.mu = Eigen::Matrix2Xd::Zero(2, static_cast<Eigen::Index>(tests));
  p.theta.assign(covariates, Eigen::Matrix2Xd::Zero(2, static_cast<Eigen::Index>(tests)));
  p.eta = Eigen::MatrixX2d::Zero(static_cast<Eigen::Index>(studies), 2);
  for (auto& d : p.delta) {
    d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(studies), static_cast<Eigen::Index>(tests));
  }
  p.sigma = Eigen::Vector2d::Ones();
  p.rho = 0.0;
  p.tau = Eigen::Matrix2Xd::Ones(2, static_cast<Eigen::Index>(tau_columns));
  return p;
}

Eigen::Matrix2d assemble_covariance(const Eigen::Vector2d& sigma, double rho) {
  if (!(sigma(0) > 0.0) || !(sigma(1) > 0.0)) throw DomainError("sigma must be positive");
  if (!(std::abs(rho) < 1.0)) throw DomainError("|rho| must be < 1");
  Eigen::Matrix2d omega;
  omega << 1.0, rho, rho, 1.0;
  return sigma.asDiagonal() * omega * sigma.asDiagonal();
}

double intra_study_correlation(double sigma_j, double tau_k, double tau_l) {
  if (!(sigma_j >= 0.0) || !(tau_k > 0.0) || !(tau_l > 0.0)) {
    throw DomainError("intra-study correlation needs sigma >= 0 and tau > 0");
  }
  const double s2 = sigma_j * sigma_j;
  return s2 / std::sqrt((s2 + tau_k * tau_k) * (s2 + tau_l * tau_l));
}

namespace {

void check_dims(const ABParams& p, const NetworkDataset& ds) {
  const auto k = static_cast<Eigen::Index>(ds.n_tests());
  const auto i = static_cast<Eigen::Index>(ds.n_studies());
  if (p.mu.cols() != k || p.theta.size() != ds.n_covariates() || p.eta.rows() != i) {
    throw DomainError("ABParams dimensions do not match the dataset");
  }
  for (const auto& t : p.theta) {
    if (t.cols() != k) throw DomainError("theta dimensions do not match the dataset");
  }
  for (const auto& d : p.delta) {
    if (d.rows() != i || d.cols() != k) throw DomainError("delta dimensions do not match the dataset");
  }
  if (p.tau.cols() != 1 && p.tau.cols() != k) throw DomainError("tau must be 2x1 or 2xK");
}

double linear_predictor(const ABParams& p, const NetworkDataset& ds, const ObservedArm& a,
                        std::size_t j) {
  const auto k = static_cast<Eigen::Index>(a.test);
  const auto i = static_cast<Eigen::Index>(a.study);
  const auto jj = static_cast<Eigen::Index>(j);
  double x = p.mu(jj, k) + p.eta(i, jj) + p.delta[j](i, k);
  const auto& cov = ds.study_covariates(a.study);
  for (std::size_t q = 0; q < cov.size(); ++q) x += p.theta[q](jj, k) * cov[q];
  return x;
}

}  // namespace

double log_likelihood_ab(const ABParams& params, const NetworkDataset& ds) {
  if (ds.empty()) return 0.0;
  check_dims(params, ds);
  double ll = 0.0;
  for (const auto& a : ds.observed()) {
    ll += math::lchoose(a.n_diseased, a.tp) +
          math::binomial_logit_kernel(a.tp, a.n_diseased, linear_predictor(params, ds, a, 0));
    ll += math::lchoose(a.n_healthy, a.tn) +
          math::binomial_logit_kernel(a.tn, a.n_healthy, linear_predictor(params, ds, a, 1));
  }
  return ll;
}

Eigen::MatrixX2d fitted_probabilities(const ABParams& params, const NetworkDataset& ds) {
  Eigen::MatrixX2d pi(static_cast<Eigen::Index>(ds.observed().size()), 2);
  if (ds.empty()) return pi;
  check_dims(params, ds);
  for (std::size_t r = 0; r < ds.observed().size(); ++r) {
    for (std::size_t j = 0; j < 2; ++j) {
      pi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          math::inv_logit(linear_predictor(params, ds, ds.observed()[r], j));
    }
  }
  return pi;
}

double log_prior_ab(const ABParams& params, const NetworkDataset& ds, const PriorSpec& priors,
                    const CovarianceSpec& cov) {
  check_dims(params, ds);
  double lp = 0.0;
  for (Eigen::Index k = 0; k < params.mu.cols(); ++k) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      lp += math::normal_lpdf(params.mu(j, k), 0.0, priors.mean_sd);
      for (const auto& t : params.theta) lp += math::normal_lpdf(t(j, k), 0.0, priors.mean_sd);
    }
  }

  for (Eigen::Index j = 0; j < 2; ++j) lp += detail::scale_log_prior_checked(params.sigma(j), priors);
  lp += detail::correlation_log_prior(params.rho, priors);
  if (!std::isfinite(lp)) return math::kNegInf;

  const bool sample_tau = !cov.fixed_tau.has_value();
  if (sample_tau) {
    for (Eigen::Index c = 0; c < params.tau.cols(); ++c) {
      for (Eigen::Index j = 0; j < 2; ++j) lp += detail::scale_log_prior_checked(params.tau(j, c), priors);
    }
    if (!std::isfinite(lp)) return math::kNegInf;
  }

  // Bivariate normal study effects.
  const Eigen::Matrix2d sigma = assemble_covariance(params.sigma, params.rho);
  const Eigen::Matrix2d prec = sigma.inverse();
  const double log_det = std::log(sigma.determinant());
  for (Eigen::Index i = 0; i < params.eta.rows(); ++i) {
    const Eigen::Vector2d e = params.eta.row(i).transpose();
    lp += -std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * e.dot(prec * e);
  }

  // Arm errors of observed arms only; unobserved arms integrate to one.
  const bool has_delta = !(cov.fixed_tau && *cov.fixed_tau == 0.0);
  if (has_delta) {
    for (const auto& a : ds.observed()) {
      for (std::size_t j = 0; j < 2; ++j) {
        const double tau = cov.fixed_tau ? *cov.fixed_tau : params.tau_at(j, a.test);
        lp += math::normal_lpdf(params.delta[j](static_cast<Eigen::Index>(a.study),
                                                static_cast<Eigen::Index>(a.test)),
                                0.0, tau);
      }
    }
  }
  return lp;
}

ABModel::ABModel(NetworkDataset ds, PriorSpec priors, CovarianceSpec cov)
    : ds_(std::move(ds)), priors_(priors), cov_(cov) {
  priors_.validate();
  if (cov_.fixed_tau && !(*cov_.fixed_tau >= 0.0)) throw DomainError("fixed tau must be >= 0");
  if (ds_.empty()) throw ValidationError("cannot fit an empty dataset");
  has_delta_ = !(cov_.fixed_tau && *cov_.fixed_tau == 0.0);
  n_studies_ = ds_.n_studies();
  n_tests_ = ds_.n_tests();
  n_cov_ = ds_.n_covariates();
  tau_cols_ = cov_.tau_columns(n_tests_);

  off_theta_ = 2 * n_tests_;
  off_eta_ = off_theta_ + 2 * n_tests_ * n_cov_;
  off_delta_ = off_eta_ + 2 * n_studies_;
  off_sigma_ = off_delta_ + (has_delta_ ? 2 * ds_.observed().size() : 0);
  off_rho_ = off_sigma_ + 2;
  off_tau_ = off_rho_ + 1;
  dim_ = off_tau_ + (cov_.fixed_tau ? 0 : 2 * tau_cols_);

  // Everything that does not depend on the parameters.
  double c = 0.0;
  for (const auto& a : ds_.observed()) {
    c += math::lchoose(a.n_diseased, a.tp) + math::lchoose(a.n_healthy, a.tn);
  }
  const double n_means = static_cast<double>(2 * n_tests_ * (1 + n_cov_));
  c += n_means * (-std::log(priors_.mean_sd) - math::kLogSqrtTwoPi);
  const double n_std = static_cast<double>(off_sigma_ - off_eta_);
  c += n_std * -math::kLogSqrtTwoPi;
  log_const_ = c;
}

template <class T>
T ABModel::log_density_impl(std::span<const T> u) const {
  using math::square;
  using std::sqrt;

  T lp(log_const_);
  const double inv_var = 1.0 / (priors_.mean_sd * priors_.mean_sd);

  // Fixed effects and their normal priors (kernel only; constants in log_const_).
  for (std::size_t i = 0; i < off_eta_; ++i) lp -= 0.5 * inv_var * square(u[i]);

  // Scales and correlation.
  T sigma[2];
  for (std::size_t j = 0; j < 2; ++j) {
    auto s = detail::constrain_scale(u[off_sigma_ + j], priors_);
    sigma[j] = s.value;
    lp += s.log_jacobian + detail::scale_log_prior(s.value, priors_);
  }
  using std::tanh;
  const T& rho_u = u[off_rho_];
  const T rho = tanh(rho_u);
  lp += detail::correlation_log_prior_u(rho_u, priors_);

  std::vector<T> tau(2 * tau_cols_);
  if (cov_.fixed_tau) {
    for (auto& t : tau) t = T(*cov_.fixed_tau);
  } else {
    for (std::size_t c = 0; c < 2 * tau_cols_; ++c) {
      auto s = detail::constrain_scale(u[off_tau_ + c], priors_);
      tau[c] = s.value;
      lp += s.log_jacobian + detail::scale_log_prior(s.value, priors_);
    }
  }

  // Standard normal priors on the non-centered effects.
  for (std::size_t i = off_eta_; i < off_sigma_; ++i) lp -= 0.5 * square(u[i]);

  // eta_i = L z_i with L = chol(Sigma).
  const T l21 = sigma[1] * rho;
  const T l22 = sigma[1] * sqrt(1.0 - square(rho));
  std::vector<T> eta(2 * n_studies_);
  for (std::size_t i = 0; i < n_studies_; ++i) {
    const T& z1 = u[off_eta_ + 2 * i];
    const T& z2 = u[off_eta_ + 2 * i + 1];
    eta[2 * i] = sigma[0] * z1;
    eta[2 * i + 1] = l21 * z1 + l22 * z2;
  }

  const auto& arms = ds_.observed();
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const auto& arm = arms[a];
    const auto& x = ds_.study_covariates(arm.study);
    const std::int64_t y[2] = {arm.tp, arm.tn};
    const std::int64_t n[2] = {arm.n_diseased, arm.n_healthy};
    for (std::size_t j = 0; j < 2; ++j) {
      if (n[j] == 0) continue;
      T lin = u[j * n_tests_ + arm.test];
      for (std::size_t q = 0; q < n_cov_; ++q) {
        lin += u[off_theta_ + q * 2 * n_tests_ + j * n_tests_ + arm.test] * x[q];
      }
      lin += eta[2 * arm.study + j];
      if (has_delta_) {
        const std::size_t tc = tau_cols_ == 1 ? 0 : arm.test;
        lin += tau[j * tau_cols_ + tc] * u[off_delta_ + 2 * a + j];
      }
      using math::binomial_logit_kernel;
      lp += binomial_logit_kernel(y[j], n[j], lin);
    }
  }
  return lp;
}

double ABModel::log_density(std::span<const double> u) const {
  if (u.size() != dim_) throw DomainError("unconstrained vector has wrong dimension");
  detail::require_finite(u);
  return log_density_impl<double>(u);
}

double ABModel::log_density_gradient(std::span<const double> u, std::span<double> grad) const {
  if (u.size() != dim_ || grad.size() != dim_) throw DomainError("unconstrained vector has wrong dimension");
  detail::require_finite(u);
  return ad::gradient([this](std::span<const ad::Var> x) { return log_density_impl<ad::Var>(x); }, u,
                      grad);
}

ABParams ABModel::to_constrained(std::span<const double> u) const {
  if (u.size() != dim_) throw DomainError("unconstrained vector has wrong dimension");
  ABParams p = ABParams::zeros(n_studies_, n_tests_, n_cov_, tau_cols_);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t k = 0; k < n_tests_; ++k) {
      p.mu(j, k) = u[j * n_tests_ + k];
      for (std::size_t q = 0; q < n_cov_; ++q) {
        p.theta[q](j, k) = u[off_theta_ + q * 2 * n_tests_ + j * n_tests_ + k];
      }
    }
  }
  for (std::size_t j = 0; j < 2; ++j) p.sigma(j) = detail::constrain_scale(u[off_sigma_ + j], priors_).value;
  p.rho = std::tanh(u[off_rho_]);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t c = 0; c < tau_cols_; ++c) {
      p.tau(j, c) = cov_.fixed_tau ? *cov_.fixed_tau
                                   : detail::constrain_scale(u[off_tau_ + j * tau_cols_ + c], priors_).value;
    }
  }
  const double l21 = p.sigma(1) * p.rho;
  const double l22 = p.sigma(1) * std::sqrt(1.0 - p.rho * p.rho);
  for (std::size_t i = 0; i < n_studies_; ++i) {
    const double z1 = u[off_eta_ + 2 * i];
    const double z2 = u[off_eta_ + 2 * i + 1];
    p.eta(i, 0) = p.sigma(0) * z1;
    p.eta(i, 1) = l21 * z1 + l22 * z2;
  }
  if (has_delta_) {
    const auto& arms = ds_.observed();
    for (std::size_t a = 0; a < arms.size(); ++a) {
      for (std::size_t j = 0; j < 2; ++j) {
        p.delta[j](arms[a].study, arms[a].test) = p.tau_at(j, arms[a].test) * u[off_delta_ + 2 * a + j];
      }
    }
  }
  return p;
}

Eigen::VectorXd ABModel::to_unconstrained(const ABParams& p) const {
  check_dims(p, ds_);
  if (static_cast<std::size_t>(p.tau.cols()) != tau_cols_) {
    throw DomainError("tau has the wrong number of columns for the covariance structure");
  }
  if (!(std::abs(p.rho) < 1.0)) throw DomainError("|rho| must be < 1");
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t k = 0; k < n_tests_; ++k) {
      u[j * n_tests_ + k] = p.mu(j, k);
      for (std::size_t q = 0; q < n_cov_; ++q) {
        u[off_theta_ + q * 2 * n_tests_ + j * n_tests_ + k] = p.theta[q](j, k);
      }
    }
  }
  for (std::size_t j = 0; j < 2; ++j) u[off_sigma_ + j] = detail::unconstrain_scale(p.sigma(j), priors_);
  u[off_rho_] = std::atanh(p.rho);
  if (!cov_.fixed_tau) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t c = 0; c < tau_cols_; ++c) {
        u[off_tau_ + j * tau_cols_ + c] = detail::unconstrain_scale(p.tau(j, c), priors_);
      }
    }
  }
  const double l21 = p.sigma(1) * p.rho;
  const double l22 = p.sigma(1) * std::sqrt(1.0 - p.rho * p.rho);
  for (std::size_t i = 0; i < n_studies_; ++i) {
    const double z1 = p.eta(i, 0) / p.sigma(0);
    u[off_eta_ + 2 * i] = z1;
    u[off_eta_ + 2 * i + 1] = (p.eta(i, 1) - l21 * z1) / l22;
  }
  if (has_delta_) {
    const auto& arms = ds_.observed();
    for (std::size_t a = 0; a < arms.size(); ++a) {
      for (std::size_t j = 0; j < 2; ++j) {
        const double t = cov_.fixed_tau ? *cov_.fixed_tau : p.tau_at(j, arms[a].test);
        if (!(t > 0.0)) throw DomainError("tau must be positive");
        u[off_delta_ + 2 * a + j] = p.delta[j](arms[a].study, arms[a].test) / t;
      }
    }
  }
  return u;
}

double ABModel::log_jacobian(std::span<const double> u) const {
  if (u.size() != dim_) throw DomainError("unconstrained vector has wrong dimension");
  double lj = 0.0;
  for (std::size_t j = 0; j < 2; ++j) lj += detail::constrain_scale(u[off_sigma_ + j], priors_).log_jacobian;
  if (!cov_.fixed_tau) {
    for (std::size_t c = 0; c < 2 * tau_cols_; ++c) {
      lj += detail::constrain_scale(u[off_tau_ + c], priors_).log_jacobian;
    }
  }
  lj += math::log1m_tanh_sq(u[off_rho_]);
  const ABParams p = to_constrained(u);
  lj += static_cast<double>(n_studies_) *
        (std::log(p.sigma(0)) + std::log(p.sigma(1)) + 0.5 * std::log1p(-p.rho * p.rho));
  if (has_delta_) {
    for (const auto& a : ds_.observed()) {
      for (std::size_t j = 0; j < 2; ++j) lj += std::log(p.tau_at(j, a.test));
    }
  }
  return lj;
}

std::vector<std::string> ABModel::parameter_names() const {
  std::vector<std::string> names;
  const auto& tl = ds_.test_labels();
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t k = 0; k < n_tests_; ++k) {
      names.push_back("mu[" + std::string(kOutcomeNames[j]) + "," + std::to_string(tl[k]) + "]");
    }
  }
  for (std::size_t q = 0; q < n_cov_; ++q) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t k = 0; k < n_tests_; ++k) {
        names.push_back("theta[" + std::to_string(q + 1) + "," + kOutcomeNames[j] + "," +
                        std::to_string(tl[k]) + "]");
      }
    }
  }
  for (std::size_t j = 0; j < 2; ++j) names.push_back("sigma[" + std::string(kOutcomeNames[j]) + "]");
  names.emplace_back("rho");
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t c = 0; c < tau_cols_; ++c) {
      if (tau_cols_ == 1) {
        names.push_back("tau[" + std::string(kOutcomeNames[j]) + "]");
      } else {
        names.push_back("tau[" + std::string(kOutcomeNames[j]) + "," + std::to_string(tl[c]) + "]");
      }
    }
  }
  for (std::size_t i = 0; i < n_studies_; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      names.push_back("eta[" + ds_.study_labels()[i] + "," + kOutcomeNames[j] + "]");
    }
  }
  if (has_delta_) {
    for (const auto& a : ds_.observed()) {
      for (std::size_t j = 0; j < 2; ++j) {
        names.push_back("delta[" + ds_.study_labels()[a.study] + "," + std::to_string(tl[a.test]) + "," +
                        kOutcomeNames[j] + "]");
      }
    }
  }
  return names;
}

std::vector<double> ABModel::flatten(const ABParams& p) const {
  std::vector<double> v;
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t k = 0; k < n_tests_; ++k) v.push_back(p.mu(j, k));
  }
  for (std::size_t q = 0; q < n_cov_; ++q) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t k = 0; k < n_tests_; ++k) v.push_back(p.theta[q](j, k));
    }
  }
  v.push_back(p.sigma(0));
  v.push_back(p.sigma(1));
  v.push_back(p.rho);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t c = 0; c < tau_cols_; ++c) v.push_back(p.tau(j, c));
  }
  for (std::size_t i = 0; i < n_studies_; ++i) {
    v.push_back(p.eta(i, 0));
    v.push_back(p.eta(i, 1));
  }
  if (has_delta_) {
    for (const auto& a : ds_.observed()) {
      for (std::size_t j = 0; j < 2; ++j) v.push_back(p.delta[j](a.study, a.test));
    }
  }
  return v;
}

ABParams ABModel::unflatten(std::span<const double> v) const {
  ABParams p = ABParams::zeros(n_studies_, n_tests_, n_cov_, tau_cols_);
  std::size_t idx = 0;
  auto next = [&]() {
    if (idx >= v.size()) throw DomainError("flattened AB parameter vector too short");
    return v[idx++];
  };
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t k = 0; k < n_tests_; ++k) p.mu(j, k) = next();
  }
  for (std::size_t q = 0; q < n_cov_; ++q) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t k = 0; k < n_tests_; ++k) p.theta[q](j, k) = next();
    }
  }
  p.sigma(0) = next();
  p.sigma(1) = next();
  p.rho = next();
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t c = 0; c < tau_cols_; ++c) p.tau(j, c) = next();
  }
  for (std::size_t i = 0; i < n_studies_; ++i) {
    p.eta(i, 0) = next();
    p.eta(i, 1) = next();
  }
  if (has_delta_) {
    for (const auto& a : ds_.observed()) {
      for (std::size_t j = 0; j < 2; ++j) p.delta[j](a.study, a.test) = next();
    }
  }
  return p;
}

}  // namespace dta_nma
