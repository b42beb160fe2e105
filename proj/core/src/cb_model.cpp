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

#include "dta_nma/cb_model.hpp"

#include <cmath>
#include <sstream>

#include "dta_nma/autodiff.hpp"
#include "dta_nma/errors.hpp"
#include "dta_nma/math.hpp"
#include "transforms.hpp"

namespace dta_nma {

CBParams CBParams::zeros(std::size_t studies, std::size_t tests) {
  const auto i = static_cast<Eigen::Index>(studies);
  const auto c = static_cast<Eigen::Index>(tests > 0 ? tests - 1 : 0);
  CBParams p;
  p.mu_study = Eigen::MatrixX2d::Zero(i, 2);
  for (auto& d : p.delta) d = Eigen::MatrixXd::Zero(i, c);
  p.nu = Eigen::Matrix2Xd::Zero(2, c);
  p.contrast_sd = Eigen::Matrix2Xd::Ones(2, c);
  return p;
}

Eigen::VectorXd cb_study_logits(double mu, std::span<const double> contrasts) {
  const std::size_t c = contrasts.size();
  const double k = static_cast<double>(c + 1);
  double sum = 0.0;
  for (double d : contrasts) sum += d;
  Eigen::VectorXd theta(static_cast<Eigen::Index>(c + 1));
  for (std::size_t pos = 0; pos < c; ++pos) theta[pos] = mu + contrasts[pos] - sum / k;
  theta[c] = mu - sum / k;
  return theta;
}

Eigen::Matrix2Xd recover_accuracy_cb(const Eigen::Vector2d& m, const Eigen::Matrix2Xd& nu) {
  Eigen::Matrix2Xd acc(2, nu.cols() + 1);
  for (Eigen::Index j = 0; j < 2; ++j) {
    std::vector<double> row(nu.cols());
    for (Eigen::Index c = 0; c < nu.cols(); ++c) row[c] = nu(j, c);
    const Eigen::VectorXd logits = cb_study_logits(m(j), row);
    for (Eigen::Index k = 0; k < logits.size(); ++k) acc(j, k) = math::inv_logit(logits[k]);
  }
  return acc;
}

void validate_cb_design(const NetworkDataset& ds, int baseline_label) {
  const auto base = ds.test_index(baseline_label);
  if (!base) {
    throw ValidationError("baseline test " + std::to_string(baseline_label) + " is not observed in any study");
  }
  std::ostringstream bad;
  std::size_t n_bad = 0;
  for (std::size_t i = 0; i < ds.n_studies(); ++i) {
    if (!ds.missingness()(i, *base) || ds.missingness().row_sum(i) < 2) {
      bad << (n_bad++ ? ", " : "") << ds.study_labels()[i];
    }
  }
  if (n_bad > 0) {
    throw ValidationError("contrast-based model needs every study to report the baseline test " +
                          std::to_string(baseline_label) + " and at least one other test; violating studies: " +
                          bad.str());
  }
}

namespace {

std::vector<std::size_t> contrast_positions(const NetworkDataset& ds, std::size_t base) {
  std::vector<std::size_t> pos(ds.n_tests());
  std::size_t next = 0;
  for (std::size_t k = 0; k < ds.n_tests(); ++k) pos[k] = k == base ? ds.n_tests() - 1 : next++;
  return pos;
}

}  // namespace

double log_posterior_cb(const CBParams& params, const NetworkDataset& ds, int baseline_label,
                        const PriorSpec& priors) {
  validate_cb_design(ds, baseline_label);
  const std::size_t kc = ds.n_tests() - 1;
  const auto pos = contrast_positions(ds, *ds.test_index(baseline_label));
  if (params.mu_study.rows() != static_cast<Eigen::Index>(ds.n_studies()) ||
      params.nu.cols() != static_cast<Eigen::Index>(kc) ||
      params.contrast_sd.cols() != static_cast<Eigen::Index>(kc) ||
      params.delta[0].cols() != static_cast<Eigen::Index>(kc) ||
      params.delta[1].cols() != static_cast<Eigen::Index>(kc)) {
    throw DomainError("CBParams dimensions do not match the dataset");
  }

  double lp = 0.0;
  for (Eigen::Index j = 0; j < 2; ++j) {
    lp += math::normal_lpdf(params.m(j), 0.0, priors.mean_sd);
    lp += detail::scale_log_prior_checked(params.s(j), priors);
    for (std::size_t c = 0; c < kc; ++c) {
      lp += math::normal_lpdf(params.nu(j, c), 0.0, priors.mean_sd);
      lp += detail::scale_log_prior_checked(params.contrast_sd(j, c), priors);
    }
  }
  if (!std::isfinite(lp)) return math::kNegInf;

  for (std::size_t i = 0; i < ds.n_studies(); ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      lp += math::normal_lpdf(params.mu_study(i, j), params.m(j), params.s(j));
      for (std::size_t c = 0; c < kc; ++c) {
        lp += math::normal_lpdf(params.delta[j](i, c), params.nu(j, c), params.contrast_sd(j, c));
      }
    }
  }

  for (const auto& a : ds.observed()) {
    const std::int64_t y[2] = {a.tp, a.tn};
    const std::int64_t n[2] = {a.n_diseased, a.n_healthy};
    for (std::size_t j = 0; j < 2; ++j) {
      std::vector<double> row(kc);
      for (std::size_t c = 0; c < kc; ++c) row[c] = params.delta[j](a.study, c);
      const Eigen::VectorXd theta = cb_study_logits(params.mu_study(a.study, j), row);
      lp += math::lchoose(n[j], y[j]) + math::binomial_logit_kernel(y[j], n[j], theta[pos[a.test]]);
    }
  }
  return lp;
}

CBModel::CBModel(NetworkDataset ds, int baseline_label, PriorSpec priors)
    : ds_(std::move(ds)), baseline_label_(baseline_label), priors_(priors) {
  priors_.validate();
  validate_cb_design(ds_, baseline_label_);
  const std::size_t base = *ds_.test_index(baseline_label_);
  n_studies_ = ds_.n_studies();
  n_contrasts_ = ds_.n_tests() - 1;
  position_ = contrast_positions(ds_, base);
  order_labels_.resize(ds_.n_tests());
  for (std::size_t k = 0; k < ds_.n_tests(); ++k) order_labels_[position_[k]] = ds_.test_labels()[k];

  off_nu_ = 2;
  off_mu_ = off_nu_ + 2 * n_contrasts_;
  off_delta_ = off_mu_ + 2 * n_studies_;
  off_s_ = off_delta_ + 2 * n_studies_ * n_contrasts_;
  off_csd_ = off_s_ + 2;
  dim_ = off_csd_ + 2 * n_contrasts_;

  double c = 0.0;
  for (const auto& a : ds_.observed()) {
    c += math::lchoose(a.n_diseased, a.tp) + math::lchoose(a.n_healthy, a.tn);
  }
  c += static_cast<double>(off_mu_) * (-std::log(priors_.mean_sd) - math::kLogSqrtTwoPi);
  c += static_cast<double>(off_s_ - off_mu_) * -math::kLogSqrtTwoPi;
  log_const_ = c;
}

template <class T>
T CBModel::log_density_impl(std::span<const T> u) const {
  using math::square;
  T lp(log_const_);
  const double inv_var = 1.0 / (priors_.mean_sd * priors_.mean_sd);
  for (std::size_t i = 0; i < off_mu_; ++i) lp -= 0.5 * inv_var * square(u[i]);
  for (std::size_t i = off_mu_; i < off_s_; ++i) lp -= 0.5 * square(u[i]);

  T s[2];
  for (std::size_t j = 0; j < 2; ++j) {
    auto c = detail::constrain_scale(u[off_s_ + j], priors_);
    s[j] = c.value;
    lp += c.log_jacobian + detail::scale_log_prior(c.value, priors_);
  }
  std::vector<T> csd(2 * n_contrasts_);
  for (std::size_t c = 0; c < 2 * n_contrasts_; ++c) {
    auto t = detail::constrain_scale(u[off_csd_ + c], priors_);
    csd[c] = t.value;
    lp += t.log_jacobian + detail::scale_log_prior(t.value, priors_);
  }

  // Study-level logits per outcome, in contrast order.
  const std::size_t kt = n_contrasts_ + 1;
  const double inv_k = 1.0 / static_cast<double>(kt);
  std::vector<T> theta(2 * n_studies_ * kt);
  for (std::size_t i = 0; i < n_studies_; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const T mu = u[j] + s[j] * u[off_mu_ + 2 * i + j];
      T sum(0.0);
      std::vector<T> d(n_contrasts_);
      for (std::size_t c = 0; c < n_contrasts_; ++c) {
        d[c] = u[off_nu_ + j * n_contrasts_ + c] +
               csd[j * n_contrasts_ + c] * u[off_delta_ + (i * 2 + j) * n_contrasts_ + c];
        sum += d[c];
      }
      const T base = mu - inv_k * sum;
      T* row = &theta[(i * 2 + j) * kt];
      for (std::size_t c = 0; c < n_contrasts_; ++c) row[c] = base + d[c];
      row[n_contrasts_] = base;
    }
  }

  using math::binomial_logit_kernel;
  for (const auto& a : ds_.observed()) {
    const std::int64_t y[2] = {a.tp, a.tn};
    const std::int64_t n[2] = {a.n_diseased, a.n_healthy};
    for (std::size_t j = 0; j < 2; ++j) {
      if (n[j] == 0) continue;
      lp += binomial_logit_kernel(y[j], n[j], theta[(a.study * 2 + j) * kt + position_[a.test]]);
    }
  }
  return lp;
}

double CBModel::log_density(std::span<const double> u) const {
  if (u.size() != dim_) throw DomainError("unconstrained vector has wrong dimension");
  detail::require_finite(u);
  return log_density_impl<double>(u);
}

double CBModel::log_density_gradient(std::span<const double> u, std::span<double> grad) const {
  if (u.size() != dim_ || grad.size() != dim_) throw DomainError("unconstrained vector has wrong dimension");
  detail::require_finite(u);
  return ad::gradient([this](std::span<const ad::Var> x) { return log_density_impl<ad::Var>(x); }, u,
                      grad);
}

CBParams CBModel::to_constrained(std::span<const double> u) const {
  if (u.size() != dim_) throw DomainError("unconstrained vector has wrong dimension");
  CBParams p = CBParams::zeros(n_studies_, n_contrasts_ + 1);
  for (std::size_t j = 0; j < 2; ++j) {
    p.m(j) = u[j];
    p.s(j) = detail::constrain_scale(u[off_s_ + j], priors_).value;
    for (std::size_t c = 0; c < n_contrasts_; ++c) {
      p.nu(j, c) = u[off_nu_ + j * n_contrasts_ + c];
      p.contrast_sd(j, c) = detail::constrain_scale(u[off_csd_ + j * n_contrasts_ + c], priors_).value;
    }
  }
  for (std::size_t i = 0; i < n_studies_; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      p.mu_study(i, j) = p.m(j) + p.s(j) * u[off_mu_ + 2 * i + j];
      for (std::size_t c = 0; c < n_contrasts_; ++c) {
        p.delta[j](i, c) = p.nu(j, c) + p.contrast_sd(j, c) * u[off_delta_ + (i * 2 + j) * n_contrasts_ + c];
      }
    }
  }
  return p;
}

Eigen::VectorXd CBModel::to_unconstrained(const CBParams& p) const {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t j = 0; j < 2; ++j) {
    u[j] = p.m(j);
    u[off_s_ + j] = detail::unconstrain_scale(p.s(j), priors_);
    for (std::size_t c = 0; c < n_contrasts_; ++c) {
      u[off_nu_ + j * n_contrasts_ + c] = p.nu(j, c);
      u[off_csd_ + j * n_contrasts_ + c] = detail::unconstrain_scale(p.contrast_sd(j, c), priors_);
    }
  }
  for (std::size_t i = 0; i < n_studies_; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      u[off_mu_ + 2 * i + j] = (p.mu_study(i, j) - p.m(j)) / p.s(j);
      for (std::size_t c = 0; c < n_contrasts_; ++c) {
        u[off_delta_ + (i * 2 + j) * n_contrasts_ + c] = (p.delta[j](i, c) - p.nu(j, c)) / p.contrast_sd(j, c);
      }
    }
  }
  return u;
}

double CBModel::log_jacobian(std::span<const double> u) const {
  const CBParams p = to_constrained(u);
  double lj = 0.0;
  for (std::size_t j = 0; j < 2; ++j) {
    lj += detail::constrain_scale(u[off_s_ + j], priors_).log_jacobian;
    lj += static_cast<double>(n_studies_) * std::log(p.s(j));
    for (std::size_t c = 0; c < n_contrasts_; ++c) {
      lj += detail::constrain_scale(u[off_csd_ + j * n_contrasts_ + c], priors_).log_jacobian;
      lj += static_cast<double>(n_studies_) * std::log(p.contrast_sd(j, c));
    }
  }
  return lj;
}

std::vector<std::string> CBModel::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < 2; ++j) names.push_back("m[" + std::string(kOutcomeNames[j]) + "]");
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t c = 0; c < n_contrasts_; ++c) {
      names.push_back("nu[" + std::string(kOutcomeNames[j]) + "," + std::to_string(order_labels_[c]) + "]");
    }
  }
  for (std::size_t j = 0; j < 2; ++j) names.push_back("s[" + std::string(kOutcomeNames[j]) + "]");
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t c = 0; c < n_contrasts_; ++c) {
      names.push_back("contrast_sd[" + std::string(kOutcomeNames[j]) + "," +
                      std::to_string(order_labels_[c]) + "]");
    }
  }
  for (std::size_t i = 0; i < n_studies_; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      names.push_back("mu_study[" + ds_.study_labels()[i] + "," + kOutcomeNames[j] + "]");
    }
  }
  for (std::size_t i = 0; i < n_studies_; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t c = 0; c < n_contrasts_; ++c) {
        names.push_back("delta[" + ds_.study_labels()[i] + "," + std::to_string(order_labels_[c]) + "," +
                        kOutcomeNames[j] + "]");
      }
    }
  }
  return names;
}

std::vector<double> CBModel::flatten(const CBParams& p) const {
  std::vector<double> v;
  for (std::size_t j = 0; j < 2; ++j) v.push_back(p.m(j));
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t c = 0; c < n_contrasts_; ++c) v.push_back(p.nu(j, c));
  }
  for (std::size_t j = 0; j < 2; ++j) v.push_back(p.s(j));
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t c = 0; c < n_contrasts_; ++c) v.push_back(p.contrast_sd(j, c));
  }
  for (std::size_t i = 0; i < n_studies_; ++i) {
    for (std::size_t j = 0; j < 2; ++j) v.push_back(p.mu_study(i, j));
  }
  for (std::size_t i = 0; i < n_studies_; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t c = 0; c < n_contrasts_; ++c) v.push_back(p.delta[j](i, c));
    }
  }
  return v;
}

}  // namespace dta_nma
