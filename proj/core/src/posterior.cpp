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


#include "dta_nma/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "dta_nma/errors.hpp"
#include "dta_nma/math.hpp"

namespace dta_nma {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard normal pairs in antithetic order: z, -z, z', -z', ...
std::vector<std::array<double, 2>> antithetic_normals(int n, std::seed_seq& seq) {
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  std::vector<std::array<double, 2>> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < out.size(); i += 2) {
    out[i] = {normal(rng), normal(rng)};
    if (i + 1 < out.size()) out[i + 1] = {-out[i][0], -out[i][1]};
  }
  return out;
}

double mc_mean(double lin, double sd_eta, double sd_delta, const std::vector<std::array<double, 2>>& z) {
  if (sd_eta == 0.0 && sd_delta == 0.0) return math::inv_logit(lin);
  double s = 0.0;
  for (const auto& p : z) s += math::inv_logit(lin + sd_eta * p[0] + sd_delta * p[1]);
  return s / static_cast<double>(z.size());
}

std::uint32_t lo32(std::uint64_t x) { return static_cast<std::uint32_t>(x & 0xffffffffu); }
std::uint32_t hi32(std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); }

std::size_t dense_index(const std::vector<int>& labels, int label) {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw DomainError("unknown test label " + std::to_string(label));
  return static_cast<std::size_t>(it - labels.begin());
}

Summary summarize_by(const std::vector<ABParams>& draws, const auto& f) {
  std::vector<double> v;
  v.reserve(draws.size());
  for (const auto& p : draws) v.push_back(f(p));
  return summarize(v);
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty series");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Summary summarize(std::span<const double> values) {
  if (values.size() < 2) throw DomainError("summary needs at least two values");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  return {mean, quantile_sorted(s, 0.025), quantile_sorted(s, 0.975)};
}

std::string format_summary(const Summary& s, int precision) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.*f [%.*f, %.*f]", precision, s.mean, precision, s.lower, precision,
                s.upper);
  return buf;
}

double marginal_mean(double mu, double sd_eta, double sd_delta, int mc_samples, std::uint64_t seed) {
  if (mc_samples < 1) throw DomainError("mc_samples must be >= 1");
  if (!(sd_eta >= 0.0) || !(sd_delta >= 0.0)) throw DomainError("standard deviations must be >= 0");
  std::seed_seq seq{lo32(seed), hi32(seed)};
  return mc_mean(mu, sd_eta, sd_delta, antithetic_normals(mc_samples, seq));
}

std::vector<ABParams> ab_parameter_draws(const ABModel& model, const Draws& draws) {
  std::vector<ABParams> out;
  out.reserve(draws.n_chains() * draws.draws_per_chain());
  std::vector<double> row;
  for (const auto& m : draws.constrained) {
    row.resize(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
      out.push_back(model.unflatten(row));
    }
  }
  return out;
}

AccuracyDraws marginal_accuracy(const std::vector<ABParams>& draws, const MarginalOptions& options) {
  if (options.mc_samples < 1) throw DomainError("mc_samples must be >= 1");
  AccuracyDraws out;
  out.reserve(draws.size());
  for (std::size_t d = 0; d < draws.size(); ++d) {
    const ABParams& p = draws[d];
    const Eigen::Index k_tests = p.mu.cols();
    if (!options.covariates.empty() && options.covariates.size() != p.theta.size()) {
      throw DomainError("covariate value has the wrong length");
    }
    std::seed_seq seq{lo32(options.seed), hi32(options.seed), lo32(d), hi32(d)};
    const auto z = antithetic_normals(options.mc_samples, seq);
    Eigen::Matrix2Xd acc(2, k_tests);
    for (Eigen::Index j = 0; j < 2; ++j) {
      for (Eigen::Index k = 0; k < k_tests; ++k) {
        double lin = p.mu(j, k);
        for (std::size_t q = 0; q < options.covariates.size(); ++q) lin += p.theta[q](j, k) * options.covariates[q];
        acc(j, k) = mc_mean(lin, p.sigma(j), p.tau_at(static_cast<std::size_t>(j), static_cast<std::size_t>(k)), z);
      }
    }
    out.push_back(std::move(acc));
  }
  return out;
}

AccuracyDraws cb_accuracy_draws(const CBModel& model, const Draws& draws) {
  const auto& order = model.contrast_labels();
  const auto& labels = model.data().test_labels();
  const std::size_t n_contrasts = order.size() - 1;
  std::array<std::size_t, 2> m_col{};
  std::array<std::vector<std::size_t>, 2> nu_col;
  for (std::size_t j = 0; j < 2; ++j) {
    const std::string out = kOutcomeNames[j];
    m_col[j] = draws.column_index("m[" + out + "]");
    for (std::size_t c = 0; c < n_contrasts; ++c) {
      nu_col[j].push_back(draws.column_index("nu[" + out + "," + std::to_string(order[c]) + "]"));
    }
  }
  std::vector<std::size_t> dest(order.size());
  for (std::size_t c = 0; c < order.size(); ++c) dest[c] = dense_index(labels, order[c]);

  AccuracyDraws out;
  for (const auto& m : draws.constrained) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      Eigen::Vector2d mm;
      Eigen::Matrix2Xd nu(2, static_cast<Eigen::Index>(n_contrasts));
      for (std::size_t j = 0; j < 2; ++j) {
        mm(j) = m(r, static_cast<Eigen::Index>(m_col[j]));
        for (std::size_t c = 0; c < n_contrasts; ++c) {
          nu(j, c) = m(r, static_cast<Eigen::Index>(nu_col[j][c]));
        }
      }
      const Eigen::Matrix2Xd rec = recover_accuracy_cb(mm, nu);
      Eigen::Matrix2Xd acc(2, rec.cols());
      for (std::size_t c = 0; c < order.size(); ++c) acc.col(dest[c]) = rec.col(c);
      out.push_back(std::move(acc));
    }
  }
  return out;
}

RelativeSeries relative_series(const AccuracyDraws& acc, std::size_t j, std::size_t k, std::size_t ref) {
  RelativeSeries s;
  s.ratio.reserve(acc.size());
  s.difference.reserve(acc.size());
  for (const auto& a : acc) {
    const double pk = a(j, k);
    const double pr = a(j, ref);
    s.ratio.push_back(k == ref ? 1.0 : pk / pr);
    s.difference.push_back(k == ref ? 0.0 : pk - pr);
  }
  return s;
}

std::vector<RelativeMeasure> relative_measures(const AccuracyDraws& acc, const std::vector<int>& labels,
                                               int reference_label) {
  const std::size_t ref = dense_index(labels, reference_label);
  std::vector<RelativeMeasure> out;
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t k = 0; k < labels.size(); ++k) {
      const auto s = relative_series(acc, j, k, ref);
      out.push_back({labels[k], reference_label, j, summarize(s.ratio), summarize(s.difference)});
    }
  }
  return out;
}

double dor(double sens, double spec) {
  if (!(sens > 0.0 && sens < 1.0) || !(spec > 0.0 && spec < 1.0)) {
    throw DomainError("DOR needs sensitivity and specificity strictly inside (0, 1)");
  }
  return (sens * spec) / ((1.0 - sens) * (1.0 - spec));
}

double SuperiorityRatio::value() const {
  if (undefined()) return kNaN;
  if (infinite()) return kInf;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::vector<DominanceCounts> dominance_counts(const Eigen::Matrix2Xd& acc, double tie_tol) {
  if (!(tie_tol >= 0.0)) throw DomainError("tie tolerance must be >= 0");
  const auto k_tests = static_cast<std::size_t>(acc.cols());
  std::vector<DominanceCounts> out(k_tests);
  for (std::size_t k = 0; k < k_tests; ++k) {
    for (std::size_t l = 0; l < k_tests; ++l) {
      if (l == k) continue;
      const double d_sens = acc(0, k) - acc(0, l);
      const double d_spec = acc(1, k) - acc(1, l);
      if (d_sens > tie_tol && d_spec > tie_tol) {
        ++out[k].dominated;
      } else if (-d_sens > tie_tol && -d_spec > tie_tol) {
        ++out[k].dominating;
      } else if (std::abs(d_sens) <= tie_tol && std::abs(d_spec) <= tie_tol) {
        ++out[k].tied;
      }
    }
  }
  return out;
}

std::vector<SuperiorityRatio> superiority_ratios(const Eigen::Matrix2Xd& acc, double tie_tol) {
  std::vector<SuperiorityRatio> out;
  for (const auto& c : dominance_counts(acc, tie_tol)) {
    out.push_back({2LL * c.dominated + c.tied, 2LL * c.dominating + c.tied});
  }
  return out;
}

std::vector<SuperioritySummary> superiority_index(const AccuracyDraws& acc, double tie_tol) {
  if (acc.empty()) throw DomainError("superiority index needs at least one draw");
  const auto k_tests = static_cast<std::size_t>(acc.front().cols());
  if (k_tests < 2) throw DomainError("superiority index needs at least two tests");
  std::vector<std::vector<double>> values(k_tests);
  std::vector<SuperioritySummary> out(k_tests);
  for (const auto& a : acc) {
    const auto r = superiority_ratios(a, tie_tol);
    for (std::size_t k = 0; k < k_tests; ++k) {
      if (r[k].undefined()) {
        ++out[k].n_undefined;
        continue;
      }
      if (r[k].infinite()) ++out[k].n_infinite;
      values[k].push_back(r[k].value());
    }
  }
  for (std::size_t k = 0; k < k_tests; ++k) {
    auto& v = values[k];
    if (v.empty()) {
      out[k].median = out[k].lower = out[k].upper = kNaN;
      continue;
    }
    std::sort(v.begin(), v.end());
    out[k].median = quantile_sorted(v, 0.5);
    out[k].lower = quantile_sorted(v, 0.025);
    out[k].upper = quantile_sorted(v, 0.975);
  }
  return out;
}

VarianceReport variance_partition(const std::vector<ABParams>& draws, const std::vector<int>& test_labels) {
  if (draws.size() < 2) throw DomainError("variance partition needs at least two draws");
  VarianceReport rep;
  rep.test_labels = test_labels;
  const auto tau_cols = static_cast<std::size_t>(draws.front().tau.cols());
  rep.unstructured = tau_cols > 1;
  auto pct = [](double s2, double total) { return total > 0.0 ? 100.0 * s2 / total : 0.0; };
  // Arm errors fixed at zero leave sigma alone; a zero total reads as no correlation.
  auto intra = [](double sigma, double tau_k, double tau_l) {
    const double s2 = sigma * sigma;
    const double den = std::sqrt((s2 + tau_k * tau_k) * (s2 + tau_l * tau_l));
    return den > 0.0 ? s2 / den : 0.0;
  };
  for (std::size_t j = 0; j < 2; ++j) {
    auto mean_tau2 = [j, tau_cols](const ABParams& p) {
      double s = 0.0;
      for (std::size_t c = 0; c < tau_cols; ++c) s += math::square(p.tau(j, c));
      return s / static_cast<double>(tau_cols);
    };
    auto& o = rep.outcomes[j];
    o.total = summarize_by(draws, [&](const ABParams& p) { return math::square(p.sigma(j)) + mean_tau2(p); });
    o.percent = summarize_by(draws, [&](const ABParams& p) {
      const double s2 = math::square(p.sigma(j));
      return pct(s2, s2 + mean_tau2(p));
    });
    if (rep.unstructured) {
      for (std::size_t c = 0; c < tau_cols; ++c) {
        o.total_by_test.push_back(summarize_by(
            draws, [&](const ABParams& p) { return math::square(p.sigma(j)) + math::square(p.tau(j, c)); }));
        o.percent_by_test.push_back(summarize_by(draws, [&](const ABParams& p) {
          const double s2 = math::square(p.sigma(j));
          return pct(s2, s2 + math::square(p.tau(j, c)));
        }));
      }
      for (std::size_t k = 0; k < tau_cols; ++k) {
        for (std::size_t l = k + 1; l < tau_cols; ++l) {
          o.intra_correlation.push_back(
              summarize_by(draws, [&](const ABParams& p) { return intra(p.sigma(j), p.tau(j, k), p.tau(j, l)); }));
        }
      }
    } else {
      o.intra_correlation.push_back(
          summarize_by(draws, [&](const ABParams& p) { return intra(p.sigma(j), p.tau(j, 0), p.tau(j, 0)); }));
    }
  }
  if (rep.unstructured) {
    for (std::size_t k = 0; k < tau_cols; ++k) {
      for (std::size_t l = k + 1; l < tau_cols; ++l) {
        const auto label = [&](std::size_t c) {
          return c < test_labels.size() ? test_labels[c] : static_cast<int>(c + 1);
        };
        rep.test_pairs.emplace_back(label(k), label(l));
      }
    }
  }
  rep.rho = summarize_by(draws, [](const ABParams& p) { return p.rho; });
  return rep;
}

AccuracySummary summarize_accuracy(const AccuracyDraws& acc, const std::vector<int>& labels,
                                   int reference_label, double tie_tol) {
  if (acc.empty() || labels.empty()) throw DomainError("accuracy summary needs draws and tests");
  AccuracySummary out;
  out.reference = reference_label;
  std::vector<SuperioritySummary> sup;
  if (labels.size() >= 2) sup = superiority_index(acc, tie_tol);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    TestAccuracy t;
    t.test = labels[k];
    std::vector<double> v0, v1, d;
    for (const auto& a : acc) {
      v0.push_back(a(0, k));
      v1.push_back(a(1, k));
      d.push_back(dor(a(0, k), a(1, k)));
    }
    t.accuracy = {summarize(v0), summarize(v1)};
    t.dor = summarize(d);
    if (!sup.empty()) t.superiority = sup[k];
    out.tests.push_back(t);
  }
  out.relative = relative_measures(acc, labels, reference_label);
  return out;
}

}  // namespace dta_nma
