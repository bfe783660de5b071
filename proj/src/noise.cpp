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

#include "gpssm/noise.hpp"

#include <cmath>
#include <numbers>

namespace gpssm {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double NoiseStream::normal(NoiseTag tag, std::uint64_t index, std::uint64_t component) const {
  std::uint64_t h = mix64(seed_);
  h = mix64(h ^ sample_);
  h = mix64(h ^ static_cast<std::uint64_t>(tag));
  h = mix64(h ^ index);
  h = mix64(h ^ component);
  const std::uint64_t h2 = mix64(h ^ 0x5851f42d4c957f2dULL);
  // 53-bit uniforms; u1 in (0, 1] keeps the log finite.
  const double u1 = (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

VectorD NoiseStream::normals(NoiseTag tag, std::uint64_t index, Eigen::Index dim) const {
  VectorD out(dim);
  for (Eigen::Index d = 0; d < dim; ++d) out(d) = normal(tag, index, static_cast<std::uint64_t>(d));
  return out;
}

}  // namespace gpssm
