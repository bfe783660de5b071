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

#include "gpssm/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace gpssm {

GridPosterior transition_grid(const SparseGp<double>& gp, double lo, double hi, int n) {
  if (n < 2) throw std::invalid_argument("transition_grid: need at least two points");
  if (!(hi > lo)) throw std::invalid_argument("transition_grid: empty range");
  if (gp.posterior().input_dim() != 1) throw DimensionMismatch("transition_grid: 1-D states only");
  GridPosterior g;
  for (int i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * i / (n - 1);
    const DiagMoments<double> m = gp.predict_marginal(std::span<const double>(&x, 1));
    g.x.push_back(x);
    g.mean.push_back(m.mean(0));
    g.sd.push_back(std::sqrt(std::max(m.var(0), 0.0)));
  }
  return g;
}

TransitionMetrics transition_metrics(const GridPosterior& grid, const std::function<double(double)>& truth,
                                     double cover_lo, double cover_hi) {
  TransitionMetrics m;
  double covered = 0.0, width = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < grid.x.size(); ++i) {
    const double x = grid.x[i];
    if (x < cover_lo || x > cover_hi) continue;
    const double err = grid.mean[i] - truth(x);
    covered += std::abs(err) <= 2.0 * grid.sd[i];
    width += 4.0 * grid.sd[i];
    sq += err * err;
    ++m.covered_points;
  }
  if (m.covered_points == 0) throw std::invalid_argument("transition_metrics: no grid point inside the covered range");
  const double n = m.covered_points;
  m.coverage2sd = covered / n;
  m.mean_band_width = width / n;
  m.rmse = std::sqrt(sq / n);
  return m;
}

}  // namespace gpssm
