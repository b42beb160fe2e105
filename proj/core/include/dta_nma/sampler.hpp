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

#ifndef DTA_NMA_SAMPLER_HPP
#define DTA_NMA_SAMPLER_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dta_nma {

/// Log density with gradient: writes d/du into grad and returns the value.
using LogDensityGradient = std::function<double(std::span<const double> u, std::span<double> grad)>;

struct SamplerConfig {
  int n_chains = 3;
  int n_warmup = 1000;
  int n_samples = 1000;
  int thin = 1;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 20260101;
  double init_radius = 2.0;
  /// Run chains on separate threads. Results do not depend on this.
  bool parallel = true;

  void validate() const;
};

/// Post-warmup draws for every chain. run_chains() fills the unconstrained
/// rows; attach_constrained() adds the named constrained view. Draws read
/// back from CSV carry only the constrained view.
struct Draws {
  std::vector<Eigen::MatrixXd> unconstrained;  // per chain: draws x dim
  std::vector<Eigen::MatrixXd> constrained;    // per chain: draws x names
  std::vector<std::string> names;              // constrained column names
  std::vector<std::vector<double>> log_density;
  std::vector<std::vector<std::uint8_t>> divergent;
  std::vector<std::vector<int>> tree_depth;
  std::vector<double> step_size;               // adapted, per chain
  std::vector<Eigen::VectorXd> inv_metric;     // adapted diagonal, per chain
  int thin = 1;

  std::size_t n_chains() const noexcept;
  std::size_t draws_per_chain() const noexcept;
  std::size_t divergences() const;

  /// Constrained column `name` stacked over chains.
  std::vector<double> column(const std::string& name) const;
  /// Constrained column index, or throws std::out_of_range.
  std::size_t column_index(const std::string& name) const;

  /// Maps every unconstrained row through `to_values` to fill the constrained view.
  void attach_constrained(std::vector<std::string> column_names,
                          const std::function<std::vector<double>(std::span<const double>)>& to_values);
};

/// Runs `config.n_chains` dynamic-trajectory HMC chains (multinomial
/// trajectory sampling, generalized no-U-turn criterion) with dual-averaging
/// step size and windowed diagonal metric adaptation during warmup.
/// Deterministic given the seed. Throws InitializationError if no finite
/// starting point is found in 100 attempts.
Draws run_chains(const LogDensityGradient& density, std::size_t dim, const SamplerConfig& config);

struct ParameterDiagnostics {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double rhat = 1.0;   // NaN for constant parameters; +inf if only chains differ
  double n_eff = 0.0;
  double mcse = 0.0;
};

struct Diagnostics {
  std::vector<ParameterDiagnostics> parameters;
  std::size_t divergences = 0;
  std::size_t total_draws = 0;
  double max_rhat = 1.0;
  bool all_rhat_ok = true;  // max rhat <= 1.1

  const ParameterDiagnostics& at(const std::string& name) const;
};

/// Split-R-hat and autocorrelation-based effective sample size for a single
/// scalar quantity given per-chain series.
double split_rhat(const std::vector<std::vector<double>>& chains);
double effective_sample_size(const std::vector<std::vector<double>>& chains);

/// Per-parameter diagnostics over the constrained view (unconstrained if no
/// constrained view is attached). Needs >= 4 draws per chain and either
/// >= 2 chains or a single chain long enough to split.
Diagnostics diagnostics(const Draws& d);

/// Keeps draws 0, every, 2*every, ... of each chain.
Draws thin_draws(const Draws& d, int every);

/// CSV with columns chain,iter,lp__,<constrained names>. iter counts kept draws.
void write_draws_csv(std::ostream& out, const Draws& d);
/// Reads the constrained view back from write_draws_csv output.
Draws read_draws_csv(std::istream& in);

std::string diagnostics_json(const Diagnostics& diag, int indent = 2);

}  // namespace dta_nma

#endif  // DTA_NMA_SAMPLER_HPP
