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

#ifndef GPSSM_NOISE_HPP
#define GPSSM_NOISE_HPP

#include <cstdint>

#include "gpssm/linalg.hpp"

namespace gpssm {

enum class NoiseTag : std::uint32_t {
  InitialState = 1,
  Transition = 2,
  Inducing = 3,
  Function = 4,
  Emission = 5,
};

/// Counter-based standard-normal source. Every draw is a pure function of
/// (seed, sample, tag, index, component), so draws do not depend on the order
/// in which they are requested, on thread scheduling, or on which chunks of a
/// trajectory are evaluated.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t sample) : seed_(seed), sample_(sample) {}

  double normal(NoiseTag tag, std::uint64_t index, std::uint64_t component) const;
  VectorD normals(NoiseTag tag, std::uint64_t index, Eigen::Index dim) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t sample() const { return sample_; }

 private:
  std::uint64_t seed_;
  std::uint64_t sample_;
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace gpssm

#endif  // GPSSM_NOISE_HPP
