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

#include "dta_nma/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include "dta_nma/errors.hpp"

namespace dta_nma {

void SamplerConfig::validate() const {
  if (n_chains < 1) throw DomainError("n_chains must be >= 1");
  if (n_warmup < 1) throw DomainError("n_warmup must be >= 1");
  if (n_samples < 1) throw DomainError("n_samples must be >= 1");
  if (thin < 1) throw DomainError("thin must be >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw DomainError("target_accept must lie in (0, 1)");
  if (max_tree_depth < 1) throw DomainError("max_tree_depth must be >= 1");
  if (!(init_radius > 0.0)) throw DomainError("init_radius must be positive");
}

namespace {

constexpr double kMaxDeltaH = 1000.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct State {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad;
  double lp = -kInf;
};

// Dual averaging of log step size toward a target acceptance statistic.
class StepSizeAdapter {
 public:
  explicit StepSizeAdapter(double target) : target_(target) {}

  void restart(double step_size) {
    mu_ = std::log(10.0 * step_size);
    counter_ = 0.0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }

  double learn(double accept_stat) {
    counter_ += 1.0;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (target_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / kGamma;
    const double x_eta = std::pow(counter_, -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }

  double final_step_size() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kKappa = 0.75;
  static constexpr double kT0 = 10.0;
  double target_;
  double mu_ = 0.0;
  double counter_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
};

// Welford variance over expanding windows: a 15% initial buffer, doubling
// windows, and a 10% terminal buffer.
class MetricAdapter {
 public:
  MetricAdapter(int n_warmup, std::size_t dim) : n_warmup_(n_warmup), mean_(Eigen::VectorXd::Zero(dim)),
                                                m2_(Eigen::VectorXd::Zero(dim)) {
    init_buffer_ = static_cast<int>(0.15 * n_warmup);
    term_buffer_ = static_cast<int>(0.1 * n_warmup);
    const int middle = n_warmup - init_buffer_ - term_buffer_;
    base_window_ = std::min(25, middle);
    enabled_ = n_warmup >= 20 && base_window_ >= 1;
    window_size_ = base_window_;
    next_window_end_ = init_buffer_ + window_size_ - 1;
  }

  // Returns true when a window closed and `inv_metric` was updated.
  bool learn(const Eigen::VectorXd& q, Eigen::VectorXd& inv_metric) {
    if (!enabled_) {
      ++counter_;
      return false;
    }
    if (counter_ >= init_buffer_ && counter_ < n_warmup_ - term_buffer_ && counter_ != n_warmup_) {
      ++n_;
      const Eigen::VectorXd delta = q - mean_;
      mean_ += delta / static_cast<double>(n_);
      m2_ += delta.cwiseProduct(q - mean_);
    }
    if (counter_ == next_window_end_ && counter_ != n_warmup_) {
      compute_next_window();
      const double n = static_cast<double>(n_);
      const Eigen::VectorXd var = m2_ / std::max(1.0, n - 1.0);
      inv_metric = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
      n_ = 0;
      mean_.setZero();
      m2_.setZero();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  void compute_next_window() {
    const int last = n_warmup_ - term_buffer_ - 1;
    if (next_window_end_ == last) return;
    window_size_ *= 2;
    next_window_end_ = counter_ + window_size_;
    if (next_window_end_ != last && next_window_end_ + 2 * window_size_ >= n_warmup_ - term_buffer_) {
      next_window_end_ = last;
    }
  }

  int n_warmup_;
  int init_buffer_ = 0;
  int term_buffer_ = 0;
  int base_window_ = 0;
  int window_size_ = 0;
  int next_window_end_ = 0;
  int counter_ = 0;
  bool enabled_ = false;
  long n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
};

class Nuts {
 public:
  struct Transition {
    double accept_stat = 0.0;
    int depth = 0;
    bool divergent = false;
  };

  Nuts(const LogDensityGradient& density, std::size_t dim, std::mt19937_64& rng, int max_depth)
      : density_(density), rng_(rng), max_depth_(max_depth), inv_metric_(Eigen::VectorXd::Ones(dim)) {}

  double step_size = 1.0;
  Eigen::VectorXd& inv_metric() { return inv_metric_; }

  void evaluate(State& z) const {
    try {
      z.lp = density_(std::span<const double>(z.q.data(), static_cast<std::size_t>(z.q.size())),
                      std::span<double>(z.grad.data(), static_cast<std::size_t>(z.grad.size())));
    } catch (const DomainError&) {
      z.lp = -kInf;
    }
    if (!std::isfinite(z.lp) || !z.grad.allFinite()) z.lp = -kInf;
  }

  // Doubles or halves the step size until one leapfrog step crosses an
  // acceptance probability of 0.8.
  void init_step_size(const State& z0) {
    State z = z0;
    sample_momentum(z);
    double h0 = hamiltonian(z);
    leapfrog(z, step_size);
    double delta_h = h0 - hamiltonian(z);
    const int direction = delta_h > std::log(0.8) ? 1 : -1;
    for (int iter = 0; iter < 200; ++iter) {
      z = z0;
      sample_momentum(z);
      h0 = hamiltonian(z);
      leapfrog(z, step_size);
      double h = hamiltonian(z);
      if (std::isnan(h)) h = kInf;
      delta_h = h0 - h;
      if (direction == 1 && !(delta_h > std::log(0.8))) break;
      if (direction == -1 && !(delta_h < std::log(0.8))) break;
      step_size = direction == 1 ? 2.0 * step_size : 0.5 * step_size;
      if (step_size > 1e7 || step_size < 1e-12) break;
    }
    step_size = std::clamp(step_size, 1e-12, 1e7);
  }

  Transition transition(State& z) {
    sample_momentum(z);
    State z_fwd = z;
    State z_bck = z;
    State z_sample = z;
    State z_propose = z;

    Eigen::VectorXd p_sharp = dtau_dp(z);
    Eigen::VectorXd p_fwd_fwd = z.p, p_sharp_fwd_fwd = p_sharp;
    Eigen::VectorXd p_fwd_bck = z.p, p_sharp_fwd_bck = p_sharp;
    Eigen::VectorXd p_bck_fwd = z.p, p_sharp_bck_fwd = p_sharp;
    Eigen::VectorXd p_bck_bck = z.p, p_sharp_bck_bck = p_sharp;
    Eigen::VectorXd rho = z.p;

    double log_sum_weight = 0.0;
    const double h0 = hamiltonian(z);
    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    divergent_ = false;

    Transition t;
    int depth = 0;
    while (depth < max_depth_) {
      const auto n = rho.size();
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(n);
      Eigen::VectorXd rho_bck = Eigen::VectorXd::Zero(n);
      bool valid = false;
      double log_sum_weight_subtree = -kInf;

      if (uniform_(rng_) > 0.5) {
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        State frontier = z_fwd;
        valid = build_tree(depth, frontier, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                           p_fwd_fwd, h0, 1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
        z_fwd = frontier;
      } else {
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        State frontier = z_bck;
        valid = build_tree(depth, frontier, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                           p_bck_bck, h0, -1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
        z_bck = frontier;
      }
      if (!valid) break;
      ++depth;

      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform_(rng_) < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      Eigen::VectorXd rho_extended = rho_bck + p_fwd_bck;
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_extended);
      rho_extended = rho_fwd + p_bck_fwd;
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_extended);
      if (!persist) break;
    }

    t.depth = depth;
    t.divergent = divergent_;
    t.accept_stat = n_leapfrog > 0 ? sum_metro_prob / static_cast<double>(n_leapfrog) : 0.0;
    z = z_sample;
    return t;
  }

  std::normal_distribution<double>& normal() { return normal_; }

 private:
  double hamiltonian(const State& z) const {
    if (!std::isfinite(z.lp)) return kInf;
    return -z.lp + 0.5 * z.p.dot(inv_metric_.cwiseProduct(z.p));
  }
  Eigen::VectorXd dtau_dp(const State& z) const { return inv_metric_.cwiseProduct(z.p); }

  void sample_momentum(State& z) {
    for (Eigen::Index i = 0; i < z.p.size(); ++i) z.p[i] = normal_(rng_) / std::sqrt(inv_metric_[i]);
  }

  void leapfrog(State& z, double eps) const {
    z.p += 0.5 * eps * z.grad;
    z.q += eps * inv_metric_.cwiseProduct(z.p);
    evaluate(z);
    if (std::isfinite(z.lp)) z.p += 0.5 * eps * z.grad;
  }

  static bool criterion(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus,
                        const Eigen::VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
  }

  bool build_tree(int depth, State& z, State& z_propose, Eigen::VectorXd& p_sharp_beg,
                  Eigen::VectorXd& p_sharp_end, Eigen::VectorXd& rho, Eigen::VectorXd& p_beg,
                  Eigen::VectorXd& p_end, double h0, double sign, int& n_leapfrog, double& log_sum_weight,
                  double& sum_metro_prob) {
    if (depth == 0) {
      leapfrog(z, sign * step_size);
      ++n_leapfrog;
      double h = hamiltonian(z);
      if (std::isnan(h)) h = kInf;
      if (h - h0 > kMaxDeltaH) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_prob += h0 - h > 0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      p_sharp_beg = dtau_dp(z);
      p_sharp_end = p_sharp_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = p_beg;
      return !divergent_;
    }

    const auto n = z.p.size();
    Eigen::VectorXd p_sharp_init_end(n), p_init_end(n);
    Eigen::VectorXd rho_init = Eigen::VectorXd::Zero(n);
    double log_sum_weight_init = -kInf;
    if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0,
                    sign, n_leapfrog, log_sum_weight_init, sum_metro_prob)) {
      return false;
    }

    State z_propose_final = z;
    Eigen::VectorXd p_sharp_final_beg(n), p_final_beg(n);
    Eigen::VectorXd rho_final = Eigen::VectorXd::Zero(n);
    double log_sum_weight_final = -kInf;
    if (!build_tree(depth - 1, z, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end,
                    h0, sign, n_leapfrog, log_sum_weight_final, sum_metro_prob)) {
      return false;
    }

    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = z_propose_final;
    } else if (uniform_(rng_) < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      z_propose = z_propose_final;
    }

    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    Eigen::VectorXd rho_extended = rho_init + p_final_beg;
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_extended);
    rho_extended = rho_final + p_init_end;
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_extended);
    return persist;
  }

  const LogDensityGradient& density_;
  std::mt19937_64& rng_;
  int max_depth_;
  Eigen::VectorXd inv_metric_;
  bool divergent_ = false;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct ChainResult {
  Eigen::MatrixXd draws;
  std::vector<double> lp;
  std::vector<std::uint8_t> divergent;
  std::vector<int> depth;
  double step_size = 0.0;
  Eigen::VectorXd inv_metric;
};

ChainResult run_one_chain(const LogDensityGradient& density, std::size_t dim, const SamplerConfig& cfg,
                          int chain) {
  const auto seed = cfg.seed;
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xFFFFFFFFu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x5eedu};
  std::mt19937_64 rng(seq);
  Nuts nuts(density, dim, rng, cfg.max_tree_depth);

  State z;
  z.q.resize(static_cast<Eigen::Index>(dim));
  z.p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  z.grad.resize(static_cast<Eigen::Index>(dim));
  std::uniform_real_distribution<double> init(-cfg.init_radius, cfg.init_radius);
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    for (auto& v : z.q) v = init(rng);
    nuts.evaluate(z);
    ok = std::isfinite(z.lp);
  }
  if (!ok) {
    throw InitializationError("chain " + std::to_string(chain + 1) +
                              ": log density not finite at 100 random initial points");
  }

  nuts.step_size = 1.0;
  nuts.init_step_size(z);
  StepSizeAdapter step_adapter(cfg.target_accept);
  step_adapter.restart(nuts.step_size);
  MetricAdapter metric_adapter(cfg.n_warmup, dim);

  for (int it = 0; it < cfg.n_warmup; ++it) {
    const auto t = nuts.transition(z);
    nuts.step_size = step_adapter.learn(t.accept_stat);
    if (metric_adapter.learn(z.q, nuts.inv_metric())) {
      nuts.init_step_size(z);
      step_adapter.restart(nuts.step_size);
    }
  }
  nuts.step_size = step_adapter.final_step_size();

  ChainResult r;
  const int kept = cfg.n_samples / cfg.thin;
  r.draws.resize(kept, static_cast<Eigen::Index>(dim));
  r.lp.reserve(static_cast<std::size_t>(kept));
  int row = 0;
  for (int it = 0; it < cfg.n_samples; ++it) {
    const auto t = nuts.transition(z);
    if ((it + 1) % cfg.thin != 0) continue;
    r.draws.row(row++) = z.q.transpose();
    r.lp.push_back(z.lp);
    r.divergent.push_back(t.divergent ? 1 : 0);
    r.depth.push_back(t.depth);
  }
  r.step_size = nuts.step_size;
  r.inv_metric = nuts.inv_metric();
  return r;
}

}  // namespace

Draws run_chains(const LogDensityGradient& density, std::size_t dim, const SamplerConfig& config) {
  config.validate();
  if (dim == 0) throw DomainError("dimension must be >= 1");
  const auto n = static_cast<std::size_t>(config.n_chains);
  std::vector<ChainResult> results(n);
  std::vector<std::exception_ptr> errors(n);

  auto work = [&](std::size_t c) {
    try {
      results[c] = run_one_chain(density, dim, config, static_cast<int>(c));
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (config.parallel && n > 1) {
    std::vector<std::thread> threads;
    threads.reserve(n);
    for (std::size_t c = 0; c < n; ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  } else {
    for (std::size_t c = 0; c < n; ++c) work(c);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Draws d;
  d.thin = config.thin;
  for (auto& r : results) {
    d.unconstrained.push_back(std::move(r.draws));
    d.log_density.push_back(std::move(r.lp));
    d.divergent.push_back(std::move(r.divergent));
    d.tree_depth.push_back(std::move(r.depth));
    d.step_size.push_back(r.step_size);
    d.inv_metric.push_back(std::move(r.inv_metric));
  }
  return d;
}

}  // namespace dta_nma
