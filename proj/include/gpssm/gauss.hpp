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

#ifndef GPSSM_GAUSS_HPP
#define GPSSM_GAUSS_HPP

#include <functional>
#include <stdexcept>

#include "gpssm/linalg.hpp"

namespace gpssm {

class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symmetric positive-definite matrix held by its lower Cholesky factor.
class PsdMatrix {
 public:
  PsdMatrix() = default;

  /// Adopts `lower` as the factor. Throws if it is not square lower-triangular
  /// with a strictly positive diagonal.
  static PsdMatrix from_factor(MatrixD lower, double jitter = 0.0);
  static PsdMatrix identity(Eigen::Index n);
  static PsdMatrix scaled_identity(Eigen::Index n, double variance);

  Eigen::Index dim() const { return factor_.rows(); }
  const MatrixD& factor() const { return factor_; }
  double jitter() const { return jitter_; }
  MatrixD dense() const { return factor_ * factor_.transpose(); }
  double log_det() const { return log_det_from_factor(factor_); }

 private:
  MatrixD factor_;
  double jitter_ = 0.0;
};

/// Factorizes a symmetric matrix, escalating jitter per `policy`.
PsdMatrix chol(const MatrixD& matrix, const JitterPolicy& policy = {});

struct GaussianMoments {
  VectorD mean;
  PsdMatrix cov;
};

double gauss_kl(const GaussianMoments& q, const GaussianMoments& p);
double mvn_logpdf(const VectorD& x, const GaussianMoments& g);
VectorD mvn_transform(const GaussianMoments& g, const VectorD& base_noise);

/// Adaptive Gauss-Kronrod quadrature on [lo, hi]. Throws NonConvergence when
/// the error estimate stays above `tol` after the refinement budget.
double quad_1d(const std::function<double(double)>& integrand, double lo, double hi,
               double tol = 1e-10);

/// Univariate normal density N(x; mean, variance).
double normal_pdf(double x, double mean, double variance);

}  // namespace gpssm

#endif  // GPSSM_GAUSS_HPP
