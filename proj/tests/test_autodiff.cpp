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


#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <thread>
#include <vector>

#include "dta_nma/autodiff.hpp"
#include "dta_nma/math.hpp"

namespace {

namespace ad = dta_nma::ad;
namespace math = dta_nma::math;

double central_difference(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

struct UnaryCase {
  const char* name;
  std::function<ad::Var(const ad::Var&)> var_fn;
  std::function<double(double)> double_fn;
  std::vector<double> points;
};

TEST(Autodiff, UnaryDerivativesMatchFiniteDifferences) {
  const std::vector<UnaryCase> cases = {
      {"exp", [](const ad::Var& x) { return ad::exp(x); }, [](double x) { return std::exp(x); }, {-3, 0, 1.5}},
      {"log", [](const ad::Var& x) { return ad::log(x); }, [](double x) { return std::log(x); }, {0.1, 1, 7}},
      {"log1p", [](const ad::Var& x) { return ad::log1p(x); }, [](double x) { return std::log1p(x); }, {-0.5, 0, 3}},
      {"sqrt", [](const ad::Var& x) { return ad::sqrt(x); }, [](double x) { return std::sqrt(x); }, {0.2, 4}},
      {"square", [](const ad::Var& x) { return ad::square(x); }, [](double x) { return x * x; }, {-2, 0.5}},
      {"tanh", [](const ad::Var& x) { return ad::tanh(x); }, [](double x) { return std::tanh(x); }, {-1, 0, 2}},
      {"inv_logit", [](const ad::Var& x) { return ad::inv_logit(x); }, [](double x) { return math::inv_logit(x); },
       {-4, 0, 3}},
      {"log_inv_logit", [](const ad::Var& x) { return ad::log_inv_logit(x); },
       [](double x) { return std::log(1.0 / (1.0 + std::exp(-x))); }, {-4, 0, 3}},
      {"log1p_exp", [](const ad::Var& x) { return ad::log1p_exp(x); },
       [](double x) { return std::log1p(std::exp(x)); }, {-4, 0, 3}},
      {"log1m_tanh_sq", [](const ad::Var& x) { return ad::log1m_tanh_sq(x); },
       [](double x) { return std::log(1.0 - std::tanh(x) * std::tanh(x)); }, {-2, 0, 1.3}},
      {"binomial_logit_kernel", [](const ad::Var& x) { return ad::binomial_logit_kernel(7, 20, x); },
       [](double x) { return 7 * x - 20 * std::log1p(std::exp(x)); }, {-1, 0, 2}},
  };
  for (const auto& c : cases) {
    for (double x0 : c.points) {
      double g = 0.0;
      const double v = ad::gradient([&](std::span<const ad::Var> x) { return c.var_fn(x[0]); },
                                    std::span<const double>(&x0, 1), std::span<double>(&g, 1));
      EXPECT_NEAR(v, c.double_fn(x0), 1e-12 * std::max(1.0, std::abs(v))) << c.name << " at " << x0;
      EXPECT_NEAR(g, central_difference(c.double_fn, x0), 1e-6 * std::max(1.0, std::abs(g))) << c.name << " at " << x0;
    }
  }
}

TEST(Autodiff, ArithmeticAndReuse) {
  const std::vector<double> x0 = {1.3, -0.7, 2.1};
  std::vector<double> g(3);
  auto f = [](std::span<const ad::Var> x) {
    ad::Var y = x[0] * x[1] + x[2] / x[0] - x[1];
    y += ad::exp(x[2]) * 0.5;
    y -= -x[0];
    y *= x[1];
    return y;
  };
  const double v = ad::gradient(f, x0, g);
  auto plain = [](double a, double b, double c) { return (a * b + c / a - b + 0.5 * std::exp(c) + a) * b; };
  EXPECT_NEAR(v, plain(x0[0], x0[1], x0[2]), 1e-12);
  EXPECT_NEAR(g[0], central_difference([&](double a) { return plain(a, x0[1], x0[2]); }, x0[0]), 1e-7);
  EXPECT_NEAR(g[1], central_difference([&](double b) { return plain(x0[0], b, x0[2]); }, x0[1]), 1e-7);
  EXPECT_NEAR(g[2], central_difference([&](double c) { return plain(x0[0], x0[1], c); }, x0[2]), 1e-7);
}

TEST(Autodiff, ConstantsStayOffTheTape) {
  const ad::Var c(2.0);
  const ad::Var d = ad::exp(c) * 3.0;
  EXPECT_TRUE(d.is_constant());
  EXPECT_DOUBLE_EQ(d.value(), 3.0 * std::exp(2.0));
}

TEST(Autodiff, ConstantOutputGivesZeroGradient) {
  const std::vector<double> x0 = {1.0, 2.0};
  std::vector<double> g(2, 5.0);
  const double v = ad::gradient([](std::span<const ad::Var>) { return ad::Var(4.0); }, x0, g);
  EXPECT_EQ(v, 4.0);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
}

TEST(Autodiff, ThreadsUseIndependentTapes) {
  std::vector<double> results(4);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([t, &results] {
      double acc = 0.0;
      for (int rep = 0; rep < 200; ++rep) {
        const std::vector<double> x0 = {0.1 * t + 0.01 * rep};
        std::vector<double> g(1);
        ad::gradient([](std::span<const ad::Var> x) { return ad::square(x[0]) * x[0]; }, x0, g);
        acc += g[0] - 3.0 * x0[0] * x0[0];
      }
      results[static_cast<std::size_t>(t)] = acc;
    });
  }
  for (auto& th : threads) th.join();
  for (double r : results) EXPECT_NEAR(r, 0.0, 1e-10);
}

}  // namespace
