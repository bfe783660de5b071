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

#include "gpssm/kernel.hpp"

#include <cmath>
#include <vector>

namespace gpssm {

double kern(std::span<const double> x, std::span<const double> x2, const RbfParams<double>& p) {
  if (x.size() != x2.size() || static_cast<Eigen::Index>(x.size()) != p.dim()) {
    throw DimensionMismatch("kern: input dimension mismatch");
  }
  double r2 = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double r = (x[d] - x2[d]) / p.lengthscales(static_cast<Eigen::Index>(d));
    r2 += r * r;
  }
  return p.variance * std::exp(-0.5 * r2);
}

ad::Var kern(std::span<const ad::Var> x, std::span<const ad::Var> x2,
             const RbfParams<ad::Var>& p) {
  if (x.size() != x2.size() || static_cast<Eigen::Index>(x.size()) != p.dim()) {
    throw DimensionMismatch("kern: input dimension mismatch");
  }
  const std::size_t dim = x.size();
  thread_local std::vector<double> r;
  r.resize(dim);
  double r2 = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    r[d] = (x[d].value() - x2[d].value()) / p.lengthscales(static_cast<Eigen::Index>(d)).value();
    r2 += r[d] * r[d];
  }
  const double e = std::exp(-0.5 * r2);
  const double k = p.variance.value() * e;

  thread_local std::vector<std::int32_t> parents;
  thread_local std::vector<double> partials;
  parents.clear();
  partials.clear();
  auto add = [&](const ad::Var& v, double d) {
    if (!v.is_constant()) {
      parents.push_back(v.index());
      partials.push_back(d);
    }
  };
  add(p.variance, e);
  for (std::size_t d = 0; d < dim; ++d) {
    const ad::Var& ell = p.lengthscales(static_cast<Eigen::Index>(d));
    const double g = k * r[d] / ell.value();
    add(x[d], -g);
    add(x2[d], g);
    add(ell, g * r[d]);
  }
  if (parents.empty()) return ad::Var(k);
  return ad::Var::node(k, ad::active_tape()->push(k, parents, partials));
}

}  // namespace gpssm
