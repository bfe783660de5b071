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

// Brute-force references for tiny 1-D models: x_1 ~ N(0, 1),
// x_{t+1} = f(x_t) + N(0, Q), y_t = x_t + N(0, R), f ~ GP(0, k).

#ifndef GPSSM_ORACLE_HPP
#define GPSSM_ORACLE_HPP

#include <string>
#include <vector>

#include "gpssm/kernel.hpp"
#include "gpssm/linalg.hpp"

namespace gpssm {

struct OracleConfig {
  RbfParams<double> kernel = RbfParams<double>::defaults(1);
  double q = 0.01;
  double r = 0.1;
  double tol = 1e-10;
  /// Half-width of the integration box in posterior standard deviations.
  double range_sd = 10.0;
  /// Intervals per axis of the T = 3 grid (even).
  int grid = 400;

  void validate() const;
};

struct MarginalReport {
  Eigen::Index length = 0;
  double log_marginal = 0.0;
  /// Richardson estimate (T = 3) or quadrature error bound (T = 2).
  double error_estimate = 0.0;
  double coarse = 0.0;
};

MarginalReport log_marginal_report(const OracleConfig& cfg, const VectorD& y);

/// Exact log p(Y) for T = 2 (adaptive quadrature) or T = 3 (Simpson grid).
double log_marginal_quadrature(const OracleConfig& cfg, const VectorD& y);

/// One inducing point, u ~ N(mu, s2), and transitions
/// x_{t+1} | x_t, u ~ N(a(x_t) u, v(x_t) + Q) with a = k(x, z) / k(z, z) and
/// v = k(x, x) - k(x, z)^2 / k(z, z).
struct NonMarkovSetup {
  RbfParams<double> kernel = RbfParams<double>::defaults(1);
  double z = 0.0;
  double mu = 0.0;
  double s2 = 1.0;
  double q = 0.01;
  double x1a = -1.0;
  double x1b = 1.0;
  double x2 = 0.5;
  double x3_lo = -3.0;
  double x3_hi = 3.0;
  int x3_points = 201;
  double tol = 1e-10;
};

struct NonMarkovReport {
  double x1a = 0.0;
  double x1b = 0.0;
  std::vector<double> x3;
  std::vector<double> density_a;
  std::vector<double> density_b;
  double max_deviation = 0.0;
};

/// q(x_3 | x_2, x_1) after integrating out u, at two values of x_1.
NonMarkovReport fitc_nonmarkov_check(const NonMarkovSetup& setup);

std::string to_json(const OracleConfig& cfg, const VectorD& y, const MarginalReport& report);
std::string to_json(const NonMarkovSetup& setup, const NonMarkovReport& report);

}  // namespace gpssm

#endif  // GPSSM_ORACLE_HPP
