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


// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "dta_nma/ab_model.hpp"
#include "dta_nma/cb_model.hpp"
#include "dta_nma/dataset.hpp"
#include "dta_nma/posterior.hpp"
#include "dta_nma/sampler.hpp"
#include "dta_nma/simulate.hpp"
#include "oracles/brma.hpp"
#include "oracles/dominance.hpp"
#include "oracles/gauss_hermite.hpp"
#include "support.hpp"

#ifndef DTA_NMA_CLINICAL_DATA
#define DTA_NMA_CLINICAL_DATA "data/mydata.csv"
#endif

namespace {

using namespace dta_nma;
namespace fs = std::filesystem;

enum class Status { pass, fail, skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

SamplerConfig sampler(int chains, int warmup, int samples, std::uint64_t seed) {
  SamplerConfig c;
  c.n_chains = chains;
  c.n_warmup = warmup;
  c.n_samples = samples;
  c.seed = seed;
  return c;
}

struct AbFit {
  Draws draws;
  Diagnostics diag;
  std::vector<ABParams> params;
};

AbFit fit_ab(const NetworkDataset& ds, const CovarianceSpec& cov, const SamplerConfig& cfg) {
  const ABModel model(ds, PriorSpec{}, cov);
  AbFit f;
  f.draws = run_chains(
      [&](std::span<const double> u, std::span<double> g) { return model.log_density_gradient(u, g); }, model.dim(),
      cfg);
  f.draws.attach_constrained(model.parameter_names(),
                             [&](std::span<const double> u) { return model.flatten(model.to_constrained(u)); });
  f.diag = diagnostics(f.draws);
  f.params = ab_parameter_draws(model, f.draws);
  return f;
}

// Mean and Monte Carlo standard error of a per-draw scalar, chains kept apart.
struct Estimate {
  double mean = 0.0;
  double mcse = 0.0;
};

Estimate estimate(const std::vector<std::vector<double>>& chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  const double n = static_cast<double>(all.size());
  double m = 0.0;
  for (double v : all) m += v;
  m /= n;
  double s = 0.0;
  for (double v : all) s += (v - m) * (v - m);
  const double sd = std::sqrt(s / (n - 1.0));
  return {m, sd / std::sqrt(effective_sample_size(chains))};
}

std::vector<std::vector<double>> per_chain(const Draws& d, const std::function<double(const Eigen::RowVectorXd&)>& f) {
  std::vector<std::vector<double>> out;
  for (const auto& m : d.constrained) {
    std::vector<double> c;
    for (Eigen::Index r = 0; r < m.rows(); ++r) c.push_back(f(m.row(r)));
    out.push_back(std::move(c));
  }
  return out;
}

TruthSpec recovery_truth() {
  TruthSpec t;
  t.studies = 40;
  t.tests = 4;
  t.mu = Eigen::Matrix2Xd(2, 4);
  t.mu << 1.5, 1.0, 0.5, 2.0, 0.5, 1.0, 1.5, 0.0;
  t.sigma << 0.7, 0.6;
  t.rho = -0.6;
  t.tau = Eigen::Matrix2Xd::Constant(2, 1, 0.3);
  t.n_diseased = {200, 200};
  t.n_healthy = {200, 200};
  t.seed = 20260301;
  return t;
}

// Shared by criteria 3 and 8.
const AbFit& recovery_fit(const NetworkDataset& ds) {
  static const AbFit fit = fit_ab(ds, CovarianceSpec{}, sampler(3, 1000, 1000, 301));
  return fit;
}

Outcome c1_gradient() {
  struct Shape {
    std::size_t studies, tests, covariates;
  };
  const Shape shapes[] = {{5, 2, 0}, {10, 4, 0}, {8, 3, 1}};
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unif(-1.5, 1.5);
  double worst = 0.0;
  std::uint64_t seed = 11;
  for (const auto& s : shapes) {
    const auto ds = support::random_network(s.studies, s.tests, s.covariates, seed++);
    const ABModel model(ds, PriorSpec{}, CovarianceSpec{});
    std::vector<double> u(model.dim()), g(model.dim()), x;
    for (int point = 0; point < 50; ++point) {
      for (auto& v : u) v = unif(rng);
      model.log_density_gradient(u, g);
      x = u;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double h = 1e-5 * std::max(1.0, std::abs(u[i]));
        x[i] = u[i] + h;
        const double fp = model.log_density(x);
        x[i] = u[i] - h;
        const double fm = model.log_density(x);
        x[i] = u[i];
        const double fd = (fp - fm) / (2.0 * h);
        worst = std::max(worst, std::abs(g[i] - fd) / std::max(1.0, std::abs(fd)));
      }
    }
  }
  return verdict(worst < 1e-6, "max relative error " + fmt("%.2e", worst));
}

Outcome c2_marginal() {
  const auto rule = oracles::gauss_hermite(64);
  double worst = 0.0;
  std::uint64_t seed = 201;
  for (double mu : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    for (double var : {0.25, 1.0, 4.0}) {
      const double sd = std::sqrt(var / 2.0);
      const double mc = marginal_mean(mu, sd, sd, 10000, seed++);
      worst = std::max(worst, std::abs(mc - oracles::logistic_normal_mean(mu, var, rule)));
    }
  }
  return verdict(worst < 0.005, "max absolute error " + fmt("%.2e", worst));
}

Outcome c3_recovery(const TruthSpec& truth, const NetworkDataset& ds) {
  const auto& fit = recovery_fit(ds);
  const std::size_t total = fit.diag.total_draws;
  const double div_frac = static_cast<double>(fit.diag.divergences) / static_cast<double>(total);
  int covered = 0, checked = 0;
  auto cover = [&](const std::string& name, double value) {
    auto col = fit.draws.column(name);
    const auto s = summarize(col);
    ++checked;
    if (s.lower <= value && value <= s.upper) ++covered;
  };
  const char* outcomes[] = {"sens", "spec"};
  for (int j = 0; j < 2; ++j) {
    for (int k = 0; k < 4; ++k) cover("mu[" + std::string(outcomes[j]) + "," + std::to_string(k + 1) + "]", truth.mu(j, k));
    cover("sigma[" + std::string(outcomes[j]) + "]", truth.sigma(j));
  }
  cover("rho", truth.rho);
  const bool ok = fit.diag.max_rhat <= 1.05 && div_frac < 0.01 && covered >= checked - 1;
  return verdict(ok, "max R-hat " + fmt("%.3f", fit.diag.max_rhat) + ", divergences " +
                         std::to_string(fit.diag.divergences) + "/" + std::to_string(total) + ", covered " +
                         std::to_string(covered) + "/" + std::to_string(checked));
}

Outcome c4_brma() {
  TruthSpec t;
  t.studies = 25;
  t.tests = 1;
  t.mu = Eigen::Matrix2Xd(2, 1);
  t.mu << 1.2, 1.8;
  t.sigma << 0.6, 0.5;
  t.rho = -0.4;
  t.tau = Eigen::Matrix2Xd::Zero(2, 1);
  t.n_diseased = {40, 150};
  t.n_healthy = {80, 300};
  t.seed = 401;
  const auto ds = simulate_network(t).data;

  CovarianceSpec cov;
  cov.fixed_tau = 1e-3;
  const auto ab = fit_ab(ds, cov, sampler(4, 1000, 2000, 402));

  std::vector<oracles::BrmaStudy> studies;
  for (const auto& a : ds.observed()) {
    studies.push_back({static_cast<double>(a.tp), static_cast<double>(a.n_diseased), static_cast<double>(a.tn),
                       static_cast<double>(a.n_healthy)});
  }
  const oracles::Brma brma(studies);
  auto ref = run_chains([&](std::span<const double> u, std::span<double> g) { return brma.log_density_gradient(u, g); },
                        brma.dim(), sampler(4, 1000, 2000, 403));
  ref.attach_constrained({"m1", "m2", "s1", "s2", "rho"}, [&](std::span<const double> u) {
    const auto h = brma.hyper(u);
    return std::vector<double>(h.begin(), h.end());
  });
  const auto ref_diag = diagnostics(ref);

  const std::pair<const char*, const char*> pairs[] = {
      {"mu[sens,1]", "m1"}, {"mu[spec,1]", "m2"}, {"sigma[sens]", "s1"}, {"sigma[spec]", "s2"}, {"rho", "rho"}};
  bool ok = true;
  std::string detail;
  for (const auto& [a, b] : pairs) {
    const auto& pa = ab.diag.at(a);
    const auto& pb = ref_diag.at(b);
    const double z = std::abs(pa.mean - pb.mean) / std::hypot(pa.mcse, pb.mcse);
    ok = ok && z < 2.0;
    detail += std::string(detail.empty() ? "" : ", ") + b + " " + fmt("%.2f", z);
  }
  return verdict(ok, "|diff|/combined MCSE: " + detail);
}

Outcome c5_contrasts() {
  TruthSpec t;
  t.studies = 30;
  t.tests = 2;
  t.mu = Eigen::Matrix2Xd(2, 2);
  t.mu << 1.5, 1.0, 0.5, 1.0;
  t.sigma << 0.7, 0.6;
  t.rho = -0.6;
  t.tau = Eigen::Matrix2Xd::Constant(2, 1, 0.3);
  t.n_diseased = {200, 200};
  t.n_healthy = {200, 200};
  t.seed = 501;
  const auto ds = simulate_network(t).data;
  const auto ab = fit_ab(ds, CovarianceSpec{}, sampler(4, 1000, 2000, 502));

  const CBModel cb(ds, 2, PriorSpec{});
  auto cbd = run_chains([&](std::span<const double> u, std::span<double> g) { return cb.log_density_gradient(u, g); },
                        cb.dim(), sampler(4, 1000, 2000, 503));
  cbd.attach_constrained(cb.parameter_names(),
                         [&](std::span<const double> u) { return cb.flatten(cb.to_constrained(u)); });

  bool ok = true;
  std::string detail;
  const char* outcomes[] = {"sens", "spec"};
  for (const char* o : outcomes) {
    const auto i1 = ab.draws.column_index("mu[" + std::string(o) + ",1]");
    const auto i2 = ab.draws.column_index("mu[" + std::string(o) + ",2]");
    const auto e_ab = estimate(per_chain(ab.draws, [&](const Eigen::RowVectorXd& r) { return r(i1) - r(i2); }));
    const auto nu = cbd.column_index("nu[" + std::string(o) + ",1]");
    const auto e_cb = estimate(per_chain(cbd, [&](const Eigen::RowVectorXd& r) { return r(nu); }));
    const double z = std::abs(e_ab.mean - e_cb.mean) / std::hypot(e_ab.mcse, e_cb.mcse);
    ok = ok && z < 2.0;
    detail += std::string(detail.empty() ? "" : "; ") + o + " AB " + fmt("%.3f", e_ab.mean) + " CB " +
              fmt("%.3f", e_cb.mean) + " z " + fmt("%.2f", z);
  }
  return verdict(ok, detail);
}

Outcome c6_ranking() {
  std::mt19937_64 rng(601);
  std::uniform_int_distribution<int> k_dist(2, 5), grid(1, 19);
  std::uniform_real_distribution<double> cont(0.001, 0.999);
  std::size_t mismatches = 0;
  double worst_dor = 0.0;
  std::size_t n_inf = 0, n_undef = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    const int k_tests = k_dist(rng);
    const bool on_grid = rep % 2 == 0;
    const double tol = rep % 3 == 0 ? 0.02 : 0.0;
    Eigen::Matrix2Xd a(2, k_tests);
    std::vector<oracles::Point> pts;
    for (int k = 0; k < k_tests; ++k) {
      a(0, k) = on_grid ? grid(rng) / 20.0 : cont(rng);
      a(1, k) = on_grid ? grid(rng) / 20.0 : cont(rng);
      pts.push_back({a(0, k), a(1, k)});
      const double d = dor(a(0, k), a(1, k));
      worst_dor = std::max(worst_dor, std::abs(d - oracles::dor_oracle(a(0, k), a(1, k))) / d);
    }
    const auto got = superiority_ratios(a, tol);
    const auto want = oracles::superiority_bruteforce(pts, tol);
    for (int k = 0; k < k_tests; ++k) {
      const bool w_undef = want[k].num == 0 && want[k].den == 0;
      if (w_undef) ++n_undef;
      if (!w_undef && want[k].den == 0) ++n_inf;
      const bool same = w_undef ? got[k].undefined()
                                : (got[k].num * want[k].den == want[k].num * got[k].den &&
                                   (got[k].den == 0) == (want[k].den == 0) && !got[k].undefined());
      if (!same) ++mismatches;
    }
  }
  const double spot = dor(0.84, 0.74);
  const bool spot_ok = fmt("%.3g", spot) == "14.9";
  return verdict(mismatches == 0 && worst_dor <= 1e-12 && spot_ok,
                 std::to_string(mismatches) + " superiority mismatches (" + std::to_string(n_inf) + " infinite, " +
                     std::to_string(n_undef) + " undefined cases), max DOR relative error " +
                     fmt("%.1e", worst_dor) + ", DOR(0.84, 0.74) = " + fmt("%.4f", spot));
}

Outcome c7_diagnostics() {
  std::mt19937_64 rng(701);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> chains(4, std::vector<double>(1000));
  for (auto& c : chains) {
    for (auto& v : c) v = z(rng);
  }
  const double rhat = split_rhat(chains);
  const double ess = effective_sample_size(chains);
  Draws d;
  for (int k = 0; k < 3; ++k) {
    Eigen::MatrixXd m(500, 1);
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, 0) = z(rng) + (k == 2 ? 4.0 : 0.0);
    d.unconstrained.push_back(m);
    d.log_density.emplace_back(500, 0.0);
    d.divergent.emplace_back(500, 0);
    d.tree_depth.emplace_back(500, 1);
  }
  const auto diag = diagnostics(d);
  const bool ok = rhat <= 1.02 && std::abs(ess - 4000.0) <= 0.15 * 4000.0 && diag.max_rhat > 1.1 && !diag.all_rhat_ok;
  return verdict(ok, "iid R-hat " + fmt("%.4f", rhat) + ", n_eff " + fmt("%.0f", ess) + "/4000, offset R-hat " +
                         fmt("%.2f", diag.max_rhat) + (diag.all_rhat_ok ? " (not flagged)" : " (flagged)"));
}

Outcome c8_mar(const NetworkDataset& ds) {
  const auto& full = recovery_fit(ds);
  const std::vector<double> keep(4, 0.7);
  const auto mar = impose_mar(ds, keep, 801);
  const auto reduced = fit_ab(mar.data, CovarianceSpec{}, sampler(3, 1000, 1000, 802));
  MarginalOptions opts;
  const auto acc_full = marginal_accuracy(full.params, opts);
  const auto acc_mar = marginal_accuracy(reduced.params, opts);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < 2; ++j) {
    for (Eigen::Index k = 0; k < 4; ++k) {
      double m_full = 0.0, m_mar = 0.0, s = 0.0;
      for (const auto& a : acc_full) m_full += a(j, k);
      m_full /= static_cast<double>(acc_full.size());
      for (const auto& a : acc_full) s += (a(j, k) - m_full) * (a(j, k) - m_full);
      const double sd = std::sqrt(s / static_cast<double>(acc_full.size() - 1));
      for (const auto& a : acc_mar) m_mar += a(j, k);
      m_mar /= static_cast<double>(acc_mar.size());
      worst = std::max(worst, std::abs(m_mar - m_full) / sd);
    }
  }
  return verdict(worst < 1.0, std::to_string(ds.n_arms() - mar.data.n_arms()) + " of " +
                                  std::to_string(ds.n_arms()) + " arms deleted, max shift " + fmt("%.2f", worst) +
                                  " posterior SD");
}

Outcome c9_variance() {
  TruthSpec t = recovery_truth();
  t.sigma << 0.6, 0.6;
  t.tau = Eigen::Matrix2Xd::Constant(2, 1, 0.6 / std::sqrt(3.0));
  t.seed = 901;
  const auto ds = simulate_network(t).data;
  const auto fit = fit_ab(ds, CovarianceSpec{}, sampler(3, 1000, 1000, 902));
  const auto v = variance_partition(fit.params, ds.test_labels());
  const std::regex style(R"(^-?\d+\.\d{2} \[-?\d+\.\d{2}, -?\d+\.\d{2}\]$)");
  bool ok = true;
  std::string detail;
  const char* names[] = {"sensitivity", "specificity"};
  for (int j = 0; j < 2; ++j) {
    const auto& p = v.outcomes[j].percent;
    const std::string text = format_summary(p);
    ok = ok && p.mean >= 60.0 && p.mean <= 90.0 && std::regex_match(text, style);
    detail += std::string(detail.empty() ? "" : "; ") + names[j] + " " + text;
  }
  return verdict(ok, "between-study %: " + detail);
}

Outcome c10_clinical() {
  const fs::path path = DTA_NMA_CLINICAL_DATA;
  if (!fs::exists(path)) return {Status::skip, "supplementary " + path.filename().string() + " not supplied"};
  NetworkDataset all;
  try {
    all = read_dataset(path.string());
  } catch (const std::exception& e) {
    return verdict(false, std::string("ingestion failed: ") + e.what());
  }
  std::optional<std::string> stratum;
  for (const auto& a : all.arms()) {
    if (!a.stratum) continue;
    std::string s = *a.stratum;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    if (s.find("ASC") != std::string::npos && s.find("CIN2") != std::string::npos) {
      stratum = a.stratum;
      break;
    }
  }
  const auto ds = stratum ? read_dataset(path.string(), stratum) : all;
  if (!ds.test_index(1) || !ds.test_index(2) || !ds.test_index(10)) {
    return verdict(false, "stratum lacks tests 1, 2 or 10");
  }
  const auto fit = fit_ab(ds, CovarianceSpec{}, sampler(3, 1000, 1000, 1001));
  const auto acc = marginal_accuracy(fit.params, MarginalOptions{});
  const auto rel = relative_measures(acc, ds.test_labels(), 1);
  double sens_cc = NAN, spec_proofer = NAN;
  for (const auto& r : rel) {
    if (r.test == 2 && r.outcome == 0) sens_cc = r.ratio.mean;
    if (r.test == 10 && r.outcome == 1) spec_proofer = r.ratio.mean;
  }
  const bool ok = std::abs(sens_cc - 0.83) <= 0.05 && std::abs(spec_proofer - 1.48) <= 0.07;
  return verdict(ok, "stratum " + stratum.value_or("(all rows)") + ": relative sensitivity CC vs HC2 " +
                         fmt("%.3f", sens_cc) + ", relative specificity HPV Proofer vs HC2 " +
                         fmt("%.3f", spec_proofer));
}

Outcome c11_determinism(const NetworkDataset& ds) {
  const fs::path dir = fs::temp_directory_path() / "dta_nma_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  {
    std::ofstream f(dir / "data.csv");
    write_dataset(f, ds);
  }
  auto run = [&](const std::string& sub) {
    std::ostringstream out, err;
    return cli::run_cli({"fit", "--data", (dir / "data.csv").string(), "--chains", "3", "--warmup", "300",
                         "--samples", "300", "--seed", "1101", "--mc-samples", "200", "--outdir",
                         (dir / sub).string()},
                        out, err);
  };
  const int ca = run("a"), cb = run("b");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string da = slurp(dir / "a" / "draws.csv"), db = slurp(dir / "b" / "draws.csv");
  fs::remove_all(dir);
  return verdict(ca == 0 && cb == 0 && !da.empty() && da == db,
                 "exit codes " + std::to_string(ca) + "/" + std::to_string(cb) + ", draws CSV " +
                     std::to_string(da.size()) + " bytes, " + (da == db ? "identical" : "different"));
}

}  // namespace

int main() {
  const auto truth = recovery_truth();
  const auto recovery_data = simulate_network(truth).data;

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", c1_gradient},
      {2, "marginal mean vs quadrature", c2_marginal},
      {3, "parameter recovery", [&] { return c3_recovery(truth, recovery_data); }},
      {4, "bivariate meta-analysis reduction", c4_brma},
      {5, "AB/CB contrast agreement", c5_contrasts},
      {6, "ranking oracles", c6_ranking},
      {7, "diagnostics sanity", c7_diagnostics},
      {8, "MAR robustness", [&] { return c8_mar(recovery_data); }},
      {9, "variance partition", c9_variance},
      {10, "clinical reproduction", c10_clinical},
      {11, "determinism", [&] { return c11_determinism(recovery_data); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* tag = o.status == Status::pass ? "PASS" : (o.status == Status::fail ? "FAIL" : "SKIP");
    if (o.status == Status::fail) ++failures;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", tag, c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
