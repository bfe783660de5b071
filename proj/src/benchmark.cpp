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

#include "gpssm/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "gpssm/optim.hpp"

namespace gpssm {

SamplingTiming time_sampling(Variant variant, Eigen::Index length, std::optional<Eigen::Index> tau,
                             Eigen::Index num_inducing, int repetitions, std::uint64_t seed, double min_seconds) {
  if (repetitions < 1) throw std::invalid_argument("time_sampling: repetitions must be >= 1");
  using Clock = std::chrono::steady_clock;
  const EmissionModel em = kink_emission();
  const TransitionFn f = [](const VectorD& x) { return VectorD::Constant(1, kink(x(0))); };
  const Dataset data = simulate(f, length, {PsdMatrix::scaled_identity(1, kKinkProcessVariance)}, em, seed);
  const Problem problem = make_problem(data, em, variant);
  FitConfig cfg;
  cfg.num_inducing = num_inducing;
  cfg.chunk_length = tau;
  const ModelParams<double> p = initial_params(problem, em.r, cfg);
  const SparseGp<double> gp(p.inducing);
  const TrajectorySampler<double> sampler(variant, p.chain, gp, p.q_factor);
  const ChunkScheme scheme = tau ? ChunkScheme::uniform(length, *tau) : ChunkScheme::single(length);

  std::vector<double> reps;
  std::uint64_t sample = 0;
  for (int r = 0; r < repetitions; ++r) {
    int calls = 0;
    const auto t0 = Clock::now();
    double elapsed = 0.0;
    do {
      (void)sampler.sample_chunked(scheme, NoiseStream(seed, sample++));
      ++calls;
      elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
    } while (elapsed < min_seconds);
    reps.push_back(elapsed / calls);
  }
  std::sort(reps.begin(), reps.end());
  const std::size_t n = reps.size();
  const double median = n % 2 ? reps[n / 2] : 0.5 * (reps[n / 2 - 1] + reps[n / 2]);
  return {variant, length, tau, median};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need matching series of >= 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace gpssm
