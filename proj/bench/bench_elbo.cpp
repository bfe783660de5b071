/*
 * Copyright 2026 The gpssm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Serial against OpenMP evaluation of the bound and its gradient on the kink
// data. Arguments: variant index, number of trajectory samples.

#include <benchmark/benchmark.h>

#include "gpssm/optim.hpp"

namespace {

using namespace gpssm;

struct Setup {
  Problem problem;
  ParamVector pv;
};

Setup make_setup(Variant variant) {
  const Dataset data = make_kink_dataset(1);
  const EmissionModel em = kink_emission();
  Setup s;
  s.problem = make_problem(data, em, variant);
  FitConfig cfg;
  cfg.num_inducing = 20;
  s.pv = pack(initial_params(s.problem, em.r, cfg), model_shape(s.problem, cfg));
  return s;
}

ElboConfig elbo_config(const benchmark::State& state, Execution execution) {
  ElboConfig cfg;
  cfg.samples = static_cast<int>(state.range(1));
  cfg.seed = 7;
  cfg.execution = execution;
  return cfg;
}

void run_elbo(benchmark::State& state, Execution execution) {
  const Setup s = make_setup(kAllVariants[static_cast<std::size_t>(state.range(0))]);
  const ModelParams<double> p = unpack(s.pv);
  const ElboConfig cfg = elbo_config(state, execution);
  for (auto _ : state) benchmark::DoNotOptimize(elbo(s.problem, p, cfg).value);
}

void run_grad(benchmark::State& state, Execution execution) {
  const Setup s = make_setup(kAllVariants[static_cast<std::size_t>(state.range(0))]);
  const ElboConfig cfg = elbo_config(state, execution);
  for (auto _ : state) benchmark::DoNotOptimize(grad_elbo(s.pv, s.problem, cfg).gradient.data());
}

void BM_ElboSerial(benchmark::State& state) { run_elbo(state, Execution::Serial); }
void BM_ElboParallel(benchmark::State& state) { run_elbo(state, Execution::Parallel); }
void BM_GradSerial(benchmark::State& state) { run_grad(state, Execution::Serial); }
void BM_GradParallel(benchmark::State& state) { run_grad(state, Execution::Parallel); }

void variants(benchmark::internal::Benchmark* b) {
  for (int v = 0; v < 4; ++v) b->Args({v, 10})->Args({v, 100});
  b->Unit(benchmark::kMillisecond)->UseRealTime();
}

}  // namespace

BENCHMARK(BM_ElboSerial)->Apply(variants);
BENCHMARK(BM_ElboParallel)->Apply(variants);
BENCHMARK(BM_GradSerial)->Apply(variants);
BENCHMARK(BM_GradParallel)->Apply(variants);

BENCHMARK_MAIN();
