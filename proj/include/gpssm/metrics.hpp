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

// Summaries of a learned transition function on a 1-D evaluation grid.

#ifndef GPSSM_METRICS_HPP
#define GPSSM_METRICS_HPP

#include <functional>
#include <vector>

#include "gpssm/sparse_gp.hpp"

namespace gpssm {

struct GridPosterior {
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> sd;
};

/// Predictive moments of q(f(x)) at n equally spaced points of [lo, hi].
GridPosterior transition_grid(const SparseGp<double>& gp, double lo, double hi, int n);

struct TransitionMetrics {
  /// Fraction of covered points whose true value lies within mean +- 2 sd.
  double coverage2sd = 0.0;
  /// Mean full width (4 sd) of the 2-sigma band.
  double mean_band_width = 0.0;
  double rmse = 0.0;
  int covered_points = 0;
};

/// Metrics over the grid points inside [cover_lo, cover_hi].
TransitionMetrics transition_metrics(const GridPosterior& grid, const std::function<double(double)>& truth,
                                     double cover_lo, double cover_hi);

}  // namespace gpssm

#endif  // GPSSM_METRICS_HPP
