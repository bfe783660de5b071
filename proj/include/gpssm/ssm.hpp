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

// Generative state-space model with a GP-distributed transition, the kink
// benchmark transition, and dataset I/O.

#ifndef GPSSM_SSM_HPP
#define GPSSM_SSM_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "gpssm/gauss.hpp"

namespace gpssm {

/// y_t | x_t ~ N(C x_t + d, R)
struct EmissionModel {
  MatrixD c;
  VectorD d;
  PsdMatrix r;

  Eigen::Index obs_dim() const { return c.rows(); }
  Eigen::Index state_dim() const { return c.cols(); }
  static EmissionModel identity(Eigen::Index dim, double variance);
};

/// x_{t+1} | f, x_t ~ N(f(x_t), Q)
struct ProcessNoise {
  PsdMatrix q;
};

struct DatasetMeta {
  std::uint64_t seed = 0;
  MatrixD q;
  MatrixD r;
  Eigen::Index length = 0;
  std::string generator;
};

struct Dataset {
  MatrixD y;                       // T x E
  std::optional<MatrixD> x_true;   // T x D
  DatasetMeta meta;

  Eigen::Index length() const { return y.rows(); }
  void validate() const;
};

using TransitionFn = std::function<VectorD(const VectorD&)>;

/// 0.8 + (x + 0.2) * (1 - 5 / (1 + exp(-2x)))
double kink(double x);
double kink_derivative(double x);

/// Ancestral sampling: x_1 ~ N(0, I), x_{t+1} = f(x_t) + Q^{1/2} e,
/// y_t = C x_t + d + R^{1/2} e. Deterministic in `seed`.
Dataset simulate(const TransitionFn& f, Eigen::Index length, const ProcessNoise& noise,
                 const EmissionModel& emission, std::uint64_t seed);

inline constexpr Eigen::Index kKinkLength = 50;
inline constexpr double kKinkEmissionVariance = 0.1;
inline constexpr double kKinkProcessVariance = 0.01;

/// 50 steps of 1-D kink dynamics with Q = 0.01, R = 0.1 and identity emission.
Dataset make_kink_dataset(std::uint64_t seed);
EmissionModel kink_emission();

/// Writes `t,y_0..y_{E-1},x_0..x_{D-1}` to `csv` and the metadata to `json`.
void write_dataset(const Dataset& data, const std::filesystem::path& csv,
                   const std::filesystem::path& json);
/// Reads a dataset CSV; the sidecar JSON is read when it exists.
Dataset read_dataset(const std::filesystem::path& csv,
                     const std::optional<std::filesystem::path>& json = std::nullopt);

}  // namespace gpssm

#endif  // GPSSM_SSM_HPP
