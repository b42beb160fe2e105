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


#include <benchmark/benchmark.h>

#include <vector>

#include "dta_nma/ab_model.hpp"
#include "dta_nma/posterior.hpp"
#include "dta_nma/sampler.hpp"
#include "dta_nma/simulate.hpp"

namespace {

using namespace dta_nma;

NetworkDataset network(std::size_t studies, std::size_t tests) {
  TruthSpec t;
  t.studies = studies;
  t.tests = tests;
  t.mu = Eigen::Matrix2Xd::Constant(2, static_cast<Eigen::Index>(tests), 1.0);
  t.n_diseased = {50, 200};
  t.n_healthy = {50, 200};
  t.seed = 7;
  return simulate_network(t).data;
}

void BM_ABGradient(benchmark::State& state) {
  const auto studies = static_cast<std::size_t>(state.range(0));
  const auto tests = static_cast<std::size_t>(state.range(1));
  const ABModel model(network(studies, tests), PriorSpec{}, CovarianceSpec{});
  std::vector<double> u(model.dim(), 0.1), g(model.dim());
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.log_density_gradient(u, g));
  }
  state.counters["dim"] = static_cast<double>(model.dim());
}
BENCHMARK(BM_ABGradient)->Args({10, 2})->Args({40, 4})->Args({125, 6});

void BM_SamplerSmallNetwork(benchmark::State& state) {
  const ABModel model(network(10, 2), PriorSpec{}, CovarianceSpec{});
  SamplerConfig cfg;
  cfg.n_chains = 1;
  cfg.n_warmup = 100;
  cfg.n_samples = 100;
  for (auto _ : state) {
    auto d = run_chains([&](std::span<const double> u, std::span<double> g) { return model.log_density_gradient(u, g); },
                        model.dim(), cfg);
    benchmark::DoNotOptimize(d.unconstrained.data());
  }
}
BENCHMARK(BM_SamplerSmallNetwork)->Unit(benchmark::kMillisecond);

void BM_MarginalAccuracy(benchmark::State& state) {
  std::vector<ABParams> draws(100, ABParams::zeros(0, 4, 0, 1));
  for (auto& p : draws) {
    p.mu.setConstant(1.0);
    p.tau.setConstant(0.3);
  }
  MarginalOptions opt;
  opt.mc_samples = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(marginal_accuracy(draws, opt));
  }
}
BENCHMARK(BM_MarginalAccuracy)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
