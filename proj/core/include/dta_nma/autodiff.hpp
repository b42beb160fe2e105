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

#ifndef DTA_NMA_AUTODIFF_HPP
#define DTA_NMA_AUTODIFF_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dta_nma/math.hpp"

// Minimal reverse-mode automatic differentiation over a thread-local tape.
//
// Every operation on Var records at most two parent edges with their local
// partial derivatives. Constants never touch the tape. Each thread owns its
// own tape, so independent evaluations may run concurrently.

namespace dta_nma::ad {

inline constexpr std::uint32_t kNoNode = 0xFFFFFFFFu;

class Tape {
 public:
  struct Node {
    std::uint32_t a;
    std::uint32_t b;
    double da;
    double db;
  };

  std::uint32_t push(std::uint32_t a, double da, std::uint32_t b, double db) {
    nodes_.push_back({a, b, da, db});
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() noexcept { nodes_.clear(); }

  /// Propagates adjoints from `out`; returns adjoints for every node.
  const std::vector<double>& backward(std::uint32_t out) {
    adjoints_.assign(nodes_.size(), 0.0);
    if (out == kNoNode) return adjoints_;
    adjoints_[out] = 1.0;
    for (std::size_t i = out + 1; i-- > 0;) {
      const double g = adjoints_[i];
      if (g == 0.0) continue;
      const Node& n = nodes_[i];
      if (n.a != kNoNode) adjoints_[n.a] += g * n.da;
      if (n.b != kNoNode) adjoints_[n.b] += g * n.db;
    }
    return adjoints_;
  }

  static Tape& current() {
    thread_local Tape tape;
    return tape;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<double> adjoints_;
};

class Var {
 public:
  Var() = default;
  Var(double constant) : value_(constant) {}  // NOLINT(google-explicit-constructor)

  static Var independent(double v) {
    return Var(v, Tape::current().push(kNoNode, 0.0, kNoNode, 0.0));
  }

  double value() const noexcept { return value_; }
  std::uint32_t node() const noexcept { return node_; }
  bool is_constant() const noexcept { return node_ == kNoNode; }

  /// Result of a unary operation with local derivative d.
  static Var unary(double v, const Var& x, double d) {
    if (x.is_constant()) return Var(v);
    return Var(v, Tape::current().push(x.node_, d, kNoNode, 0.0));
  }

  static Var binary(double v, const Var& x, double dx, const Var& y, double dy) {
    if (x.is_constant()) return unary(v, y, dy);
    if (y.is_constant()) return unary(v, x, dx);
    return Var(v, Tape::current().push(x.node_, dx, y.node_, dy));
  }

  Var& operator+=(const Var& o) { return *this = *this + o; }
  Var& operator-=(const Var& o) { return *this = *this - o; }
  Var& operator*=(const Var& o) { return *this = *this * o; }

  friend Var operator+(const Var& x, const Var& y) { return binary(x.value_ + y.value_, x, 1.0, y, 1.0); }
  friend Var operator-(const Var& x, const Var& y) { return binary(x.value_ - y.value_, x, 1.0, y, -1.0); }
  friend Var operator*(const Var& x, const Var& y) {
    return binary(x.value_ * y.value_, x, y.value_, y, x.value_);
  }
  friend Var operator/(const Var& x, const Var& y) {
    const double q = x.value_ / y.value_;
    return binary(q, x, 1.0 / y.value_, y, -q / y.value_);
  }
  friend Var operator-(const Var& x) { return unary(-x.value_, x, -1.0); }

 private:
  Var(double v, std::uint32_t node) : value_(v), node_(node) {}

  double value_ = 0.0;
  std::uint32_t node_ = kNoNode;
};

inline double value_of(const Var& x) { return x.value(); }

inline Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return Var::unary(e, x, e);
}
inline Var log(const Var& x) { return Var::unary(std::log(x.value()), x, 1.0 / x.value()); }
inline Var log1p(const Var& x) { return Var::unary(std::log1p(x.value()), x, 1.0 / (1.0 + x.value())); }
inline Var sqrt(const Var& x) {
  const double s = std::sqrt(x.value());
  return Var::unary(s, x, 0.5 / s);
}
inline Var square(const Var& x) { return Var::unary(x.value() * x.value(), x, 2.0 * x.value()); }
inline Var tanh(const Var& x) {
  const double t = std::tanh(x.value());
  return Var::unary(t, x, 1.0 - t * t);
}
inline Var inv_logit(const Var& x) {
  const double p = math::inv_logit(x.value());
  return Var::unary(p, x, p * (1.0 - p));
}
inline Var log_inv_logit(const Var& x) {
  return Var::unary(math::log_inv_logit(x.value()), x, math::inv_logit(-x.value()));
}
inline Var log1p_exp(const Var& x) {
  return Var::unary(math::log1p_exp(x.value()), x, math::inv_logit(x.value()));
}
inline Var log1m_tanh_sq(const Var& x) {
  return Var::unary(math::log1m_tanh_sq(x.value()), x, -2.0 * std::tanh(x.value()));
}
inline Var binomial_logit_kernel(std::int64_t y, std::int64_t n, const Var& x) {
  const double p = math::inv_logit(x.value());
  return Var::unary(math::binomial_logit_kernel(y, n, x.value()), x,
                    static_cast<double>(y) - static_cast<double>(n) * p);
}

/// Evaluates f at x and writes df/dx into grad. f receives a span of
/// independent variables and returns a Var. Returns f(x).
template <class F>
double gradient(F&& f, std::span<const double> x, std::span<double> grad) {
  Tape& tape = Tape::current();
  tape.clear();
  std::vector<Var> vars;
  vars.reserve(x.size());
  for (double xi : x) vars.push_back(Var::independent(xi));
  const Var out = f(std::span<const Var>(vars));
  const auto& adj = tape.backward(out.node());
  for (std::size_t i = 0; i < x.size(); ++i) grad[i] = out.is_constant() ? 0.0 : adj[vars[i].node()];
  tape.clear();
  return out.value();
}

}  // namespace dta_nma::ad

namespace dta_nma::math {
inline double value_of(double x) { return x; }
}  // namespace dta_nma::math

#endif  // DTA_NMA_AUTODIFF_HPP
