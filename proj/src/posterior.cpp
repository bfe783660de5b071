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

#include "gpssm/posterior.hpp"

#include <string>

namespace gpssm {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::FactorisedLinear: return "factorised-linear";
    case Variant::FactorisedNonlinear: return "factorised-nonlinear";
    case Variant::UFactorised: return "u-factorised";
    case Variant::NonFactorised: return "non-factorised";
    case Variant::PrSsm: return "pr-ssm";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

ChunkScheme ChunkScheme::single(Eigen::Index length) {
  ChunkScheme s;
  s.length = length;
  return s;
}

ChunkScheme ChunkScheme::uniform(Eigen::Index length, Eigen::Index tau) {
  if (tau < 1) throw std::invalid_argument("ChunkScheme: tau must be >= 1");
  ChunkScheme s;
  s.length = length;
  s.starts.clear();
  for (Eigen::Index b = 0; b < length; b += tau) s.starts.push_back(b);
  s.validate();
  return s;
}

void ChunkScheme::validate() const {
  if (length < 1) throw std::invalid_argument("ChunkScheme: empty sequence");
  if (starts.empty() || starts.front() != 0) throw std::invalid_argument("ChunkScheme: first chunk must start at 0");
  for (std::size_t i = 1; i < starts.size(); ++i) {
    if (starts[i] <= starts[i - 1]) throw std::invalid_argument("ChunkScheme: starts must be strictly increasing");
  }
  if (starts.back() >= length) throw std::invalid_argument("ChunkScheme: empty trailing chunk");
}

ChainParams<double> prssm_chain(Eigen::Index length, const PsdMatrix& q) {
  const Eigen::Index dim = q.dim();
  ChainParams<double> c;
  c.m1 = VectorD::Zero(dim);
  c.p1_factor = MatrixD::Identity(dim, dim);
  for (Eigen::Index t = 0; t + 1 < length; ++t) {
    c.a.push_back(MatrixD::Identity(dim, dim));
    c.b.push_back(VectorD::Zero(dim));
    c.s_factor.push_back(q.factor());
  }
  c.prior_transitions = true;
  return c;
}

}  // namespace gpssm
