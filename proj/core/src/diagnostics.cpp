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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dta_nma/errors.hpp"
#include "dta_nma/sampler.hpp"

namespace dta_nma {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double mean_of(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double var_of(const std::vector<double>& x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

std::vector<std::vector<double>> split_chains(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

void check_shape(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw DiagnosticError("diagnostics need at least 2 chains");
  const std::size_t n = chains.front().size();
  if (n < 4) throw DiagnosticError("diagnostics need at least 4 draws per chain");
  for (const auto& c : chains) {
    if (c.size() != n) throw DiagnosticError("chains have unequal lengths");
  }
}

// Biased autocovariance at lag t.
double autocovariance(const std::vector<double>& x, double mean, std::size_t t) {
  double s = 0.0;
  for (std::size_t i = 0; i + t < x.size(); ++i) s += (x[i] - mean) * (x[i + t] - mean);
  return s / static_cast<double>(x.size());
}

// Effective sample size over equal-length chains, taken as given.
double ess_unsplit(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(chains[c]);
    vars[c] = autocovariance(chains[c], means[c], 0) * static_cast<double>(n) / static_cast<double>(n - 1);
  }
  const double mean_var = mean_of(vars);
  double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
  if (m > 1) var_plus += var_of(means);
  if (!(var_plus > 0.0)) return kNaN;

  auto acov_mean = [&](std::size_t t) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += autocovariance(chains[c], means[c], t);
    return s / static_cast<double>(m);
  };

  std::vector<double> rho_hat(n + 2, 0.0);
  rho_hat[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - acov_mean(1)) / var_plus;
  rho_hat[1] = rho_odd;
  std::size_t s = 1;
  while (s + 4 < n && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - acov_mean(s + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - acov_mean(s + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho_hat[s + 1] = rho_even;
      rho_hat[s + 2] = rho_odd;
    }
    s += 2;
  }
  const std::size_t max_s = s;
  if (rho_even > 0.0) rho_hat[max_s + 1] = rho_even;

  // Initial monotone sequence.
  for (std::size_t t = 1; t + 3 <= max_s; t += 2) {
    if (rho_hat[t + 1] + rho_hat[t + 2] > rho_hat[t - 1] + rho_hat[t]) {
      rho_hat[t + 1] = (rho_hat[t - 1] + rho_hat[t]) / 2.0;
      rho_hat[t + 2] = rho_hat[t + 1];
    }
  }
  const double total = static_cast<double>(m * n);
  double sum = 0.0;
  for (std::size_t t = 0; t < max_s; ++t) sum += rho_hat[t];
  const double tau_hat = -1.0 + 2.0 * sum + rho_hat[max_s + 1];
  return total / std::max(tau_hat, 1.0 / std::log10(total));
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::size_t Draws::n_chains() const noexcept {
  return constrained.empty() ? unconstrained.size() : constrained.size();
}

std::size_t Draws::draws_per_chain() const noexcept {
  if (!constrained.empty()) return static_cast<std::size_t>(constrained.front().rows());
  return unconstrained.empty() ? 0 : static_cast<std::size_t>(unconstrained.front().rows());
}

std::size_t Draws::divergences() const {
  std::size_t n = 0;
  for (const auto& c : divergent) n += static_cast<std::size_t>(std::count(c.begin(), c.end(), 1));
  return n;
}

std::size_t Draws::column_index(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("no draws column named '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

std::vector<double> Draws::column(const std::string& name) const {
  const auto idx = static_cast<Eigen::Index>(column_index(name));
  std::vector<double> out;
  for (const auto& c : constrained) {
    for (Eigen::Index r = 0; r < c.rows(); ++r) out.push_back(c(r, idx));
  }
  return out;
}

void Draws::attach_constrained(std::vector<std::string> column_names,
                               const std::function<std::vector<double>(std::span<const double>)>& to_values) {
  names = std::move(column_names);
  constrained.clear();
  for (const auto& u : unconstrained) {
    Eigen::MatrixXd m(u.rows(), static_cast<Eigen::Index>(names.size()));
    Eigen::VectorXd row;
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      row = u.row(r).transpose();
      const auto v = to_values(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
      if (v.size() != names.size()) throw DomainError("constrained view has the wrong width");
      for (std::size_t c = 0; c < v.size(); ++c) m(r, static_cast<Eigen::Index>(c)) = v[c];
    }
    constrained.push_back(std::move(m));
  }
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  check_shape(chains);
  const auto split = split_chains(chains);
  const std::size_t m = split.size();
  const double n = static_cast<double>(split.front().size());
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(split[c]);
    vars[c] = var_of(split[c]);
  }
  const double w = mean_of(vars);
  const double b = n * var_of(means);
  if (!(w > 0.0)) return b > 0.0 ? kInf : kNaN;
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  check_shape(chains);
  return ess_unsplit(split_chains(chains));
}

const ParameterDiagnostics& Diagnostics::at(const std::string& name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no diagnostics for '" + name + "'");
}

Diagnostics diagnostics(const Draws& d) {
  const bool use_constrained = !d.constrained.empty();
  const auto& mats = use_constrained ? d.constrained : d.unconstrained;
  if (mats.size() < 2) throw DiagnosticError("diagnostics need at least 2 chains");
  const auto n = mats.front().rows();
  if (n < 4) throw DiagnosticError("diagnostics need at least 4 draws per chain");
  const auto cols = mats.front().cols();

  Diagnostics out;
  out.divergences = d.divergences();
  out.total_draws = static_cast<std::size_t>(n) * mats.size();
  out.max_rhat = 1.0;
  bool any = false;
  for (Eigen::Index c = 0; c < cols; ++c) {
    std::vector<std::vector<double>> chains;
    std::vector<double> all;
    for (const auto& m : mats) {
      chains.emplace_back(m.col(c).data(), m.col(c).data() + n);
      all.insert(all.end(), chains.back().begin(), chains.back().end());
    }
    ParameterDiagnostics p;
    p.name = use_constrained ? d.names[static_cast<std::size_t>(c)] : "u[" + std::to_string(c + 1) + "]";
    p.mean = mean_of(all);
    p.sd = std::sqrt(var_of(all));
    p.rhat = split_rhat(chains);
    p.n_eff = effective_sample_size(chains);
    p.mcse = std::isfinite(p.n_eff) && p.n_eff > 0 ? p.sd / std::sqrt(p.n_eff) : 0.0;
    if (!std::isnan(p.rhat)) {
      out.max_rhat = any ? std::max(out.max_rhat, p.rhat) : p.rhat;
      any = true;
    }
    out.parameters.push_back(std::move(p));
  }
  out.all_rhat_ok = out.max_rhat <= 1.1;
  return out;
}

Draws thin_draws(const Draws& d, int every) {
  if (every < 1) throw DomainError("thinning interval must be >= 1");
  Draws out;
  out.names = d.names;
  out.step_size = d.step_size;
  out.inv_metric = d.inv_metric;
  out.thin = d.thin * every;
  auto keep_rows = [every](const Eigen::MatrixXd& m) {
    const Eigen::Index kept = (m.rows() + every - 1) / every;
    Eigen::MatrixXd r(kept, m.cols());
    for (Eigen::Index i = 0; i < kept; ++i) r.row(i) = m.row(i * every);
    return r;
  };
  auto keep = [every](const auto& v) {
    std::remove_cvref_t<decltype(v)> r;
    for (std::size_t i = 0; i < v.size(); i += static_cast<std::size_t>(every)) r.push_back(v[i]);
    return r;
  };
  for (const auto& m : d.unconstrained) out.unconstrained.push_back(keep_rows(m));
  for (const auto& m : d.constrained) out.constrained.push_back(keep_rows(m));
  for (const auto& v : d.log_density) out.log_density.push_back(keep(v));
  for (const auto& v : d.divergent) out.divergent.push_back(keep(v));
  for (const auto& v : d.tree_depth) out.tree_depth.push_back(keep(v));
  return out;
}

void write_draws_csv(std::ostream& out, const Draws& d) {
  out << "chain,iter,lp__,divergent__,treedepth__";
  for (const auto& n : d.names) out << ',' << n;
  out << '\n';
  for (std::size_t c = 0; c < d.constrained.size(); ++c) {
    const auto& m = d.constrained[c];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const auto ri = static_cast<std::size_t>(r);
      out << (c + 1) << ',' << (r + 1) << ',';
      out << (c < d.log_density.size() ? format_real(d.log_density[c][ri]) : "nan") << ',';
      out << (c < d.divergent.size() ? static_cast<int>(d.divergent[c][ri]) : 0) << ',';
      out << (c < d.tree_depth.size() ? d.tree_depth[c][ri] : 0);
      for (Eigen::Index k = 0; k < m.cols(); ++k) out << ',' << format_real(m(r, k));
      out << '\n';
    }
  }
}

Draws read_draws_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
    break;
  }
  // Names may contain commas inside brackets; re-join them.
  std::vector<std::string> cols;
  for (const auto& h : header) {
    if (!cols.empty() && std::count(cols.back().begin(), cols.back().end(), '[') >
                             std::count(cols.back().begin(), cols.back().end(), ']')) {
      cols.back() += "," + h;
    } else {
      cols.push_back(h);
    }
  }
  if (cols.size() < 5 || cols[0] != "chain" || cols[1] != "iter" || cols[2] != "lp__") {
    throw ParseError(line_no, "draws CSV header must start with chain,iter,lp__,divergent__,treedepth__");
  }
  Draws d;
  d.names.assign(cols.begin() + 5, cols.end());
  std::map<int, std::vector<std::vector<double>>> rows;
  std::map<int, std::vector<double>> lps;
  std::map<int, std::vector<std::uint8_t>> divs;
  std::map<int, std::vector<int>> depths;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> v;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double x = 0.0;
      auto [ptr, ec] = std::from_chars(p, comma, x);
      if (ec != std::errc() || ptr != comma) {
        const std::string field(p, comma);
        if (field == "nan") {
          x = kNaN;
        } else {
          throw ParseError(line_no, "bad numeric field '" + field + "'");
        }
      }
      v.push_back(x);
      p = comma + 1;
    }
    if (v.size() != cols.size()) throw ParseError(line_no, "wrong number of fields");
    const int chain = static_cast<int>(v[0]);
    lps[chain].push_back(v[2]);
    divs[chain].push_back(static_cast<std::uint8_t>(v[3] != 0.0));
    depths[chain].push_back(static_cast<int>(v[4]));
    rows[chain].emplace_back(v.begin() + 5, v.end());
  }
  for (auto& [chain, r] : rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(d.names.size()));
    for (std::size_t i = 0; i < r.size(); ++i) {
      for (std::size_t k = 0; k < r[i].size(); ++k) m(i, k) = r[i][k];
    }
    d.constrained.push_back(std::move(m));
    d.log_density.push_back(std::move(lps[chain]));
    d.divergent.push_back(std::move(divs[chain]));
    d.tree_depth.push_back(std::move(depths[chain]));
  }
  return d;
}

std::string diagnostics_json(const Diagnostics& diag, int indent) {
  auto num = [](double x) -> nlohmann::json {
    if (std::isfinite(x)) return x;
    return nullptr;
  };
  nlohmann::ordered_json j;
  j["all_rhat_ok"] = diag.all_rhat_ok;
  j["max_rhat"] = num(diag.max_rhat);
  j["divergences"] = diag.divergences;
  j["total_draws"] = diag.total_draws;
  auto& params = j["parameters"] = nlohmann::ordered_json::array();
  for (const auto& p : diag.parameters) {
    nlohmann::ordered_json e;
    e["name"] = p.name;
    e["mean"] = num(p.mean);
    e["sd"] = num(p.sd);
    e["rhat"] = num(p.rhat);
    e["n_eff"] = num(p.n_eff);
    e["mcse"] = num(p.mcse);
    params.push_back(std::move(e));
  }
  return j.dump(indent);
}

}  // namespace dta_nma
