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

// Wall-clock scaling of trajectory sampling.

#ifndef GPSSM_BENCHMARK_HPP
#define GPSSM_BENCHMARK_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "gpssm/posterior.hpp"

namespace gpssm {

struct SamplingTiming {
  Variant variant = Variant::FactorisedLinear;
  Eigen::Index length = 0;
  std::optional<Eigen::Index> tau;
  double median_seconds = 0.0;
};

/// Median seconds per trajectory draw over the timed repetitions.
/// Parameters come from the optimizer's initialization on a simulated kink
/// sequence of the requested length. Each repetition repeats the draw until
/// at least min_seconds have elapsed.
SamplingTiming time_sampling(Variant variant, Eigen::Index length, std::optional<Eigen::Index> tau,
                             Eigen::Index num_inducing, int repetitions, std::uint64_t seed,
                             double min_seconds = 2e-3);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace gpssm

#endif  // GPSSM_BENCHMARK_HPP
