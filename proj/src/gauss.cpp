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

#include "gpssm/gauss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace gpssm {

double choose_jitter(const MatrixD& a, const JitterPolicy& policy) {
  if (a.rows() != a.cols()) throw DimensionMismatch("choose_jitter: matrix not square");
  const double scale = a.rows() > 0 ? std::abs(a.diagonal().mean()) : 1.0;
  auto ok = [&](double jitter) {
    try {
      cholesky_lower<double>(a, jitter);
      return true;
    } catch (const NotPositiveDefinite&) {
      return false;
    }
  };
  if (policy.try_zero && ok(0.0)) return 0.0;
  for (double level = policy.start; level <= policy.max * (1.0 + 1e-12); level *= policy.factor) {
    if (ok(level * scale)) return level * scale;
  }
  throw NotPositiveDefinite("factorization failed at maximum jitter " +
                            std::to_string(policy.max * scale));
}

PsdMatrix PsdMatrix::from_factor(MatrixD lower, double jitter) {
  if (lower.rows() != lower.cols()) throw DimensionMismatch("PsdMatrix: factor not square");
  for (Eigen::Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > 0.0)) throw NotPositiveDefinite("PsdMatrix: non-positive diagonal");
    for (Eigen::Index j = i + 1; j < lower.cols(); ++j) {
      if (lower(i, j) != 0.0) throw std::invalid_argument("PsdMatrix: factor not lower-triangular");
    }
  }
  PsdMatrix m;
  m.factor_ = std::move(lower);
  m.jitter_ = jitter;
  return m;
}

PsdMatrix PsdMatrix::identity(Eigen::Index n) { return from_factor(MatrixD::Identity(n, n)); }

PsdMatrix PsdMatrix::scaled_identity(Eigen::Index n, double variance) {
  return from_factor(MatrixD::Identity(n, n) * std::sqrt(variance));
}

PsdMatrix chol(const MatrixD& matrix, const JitterPolicy& policy) {
  if (matrix.rows() != matrix.cols()) throw DimensionMismatch("chol: matrix not square");
  const double scale = std::max(matrix.cwiseAbs().maxCoeff(), 1e-300);
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("chol: matrix not symmetric");
  }
  const double jitter = choose_jitter(matrix, policy);
  return PsdMatrix::from_factor(cholesky_lower<double>(matrix, jitter), jitter);
}

double gauss_kl(const GaussianMoments& q, const GaussianMoments& p) {
  if (q.mean.size() != q.cov.dim() || p.mean.size() != p.cov.dim()) {
    throw DimensionMismatch("gauss_kl: mean and covariance sizes differ");
  }
  return gauss_kl<double>(q.mean, q.cov.factor(), p.mean, p.cov.factor());
}

double mvn_logpdf(const VectorD& x, const GaussianMoments& g) {
  return mvn_logpdf<double>(x, g.mean, g.cov.factor());
}

VectorD mvn_transform(const GaussianMoments& g, const VectorD& base_noise) {
  return affine_transform<double>(g.mean, g.cov.factor(), base_noise);
}

double quad_1d(const std::function<double(double)>& integrand, double lo, double hi, double tol) {
  using boost::math::quadrature::gauss_kronrod;
  double error = 0.0;
  // Boost's tolerance is relative; the absolute estimate is checked afterwards.
  const double value = gauss_kronrod<double, 31>::integrate(integrand, lo, hi, 15, 1e-12, &error);
  if (!std::isfinite(value) || error > tol) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "quad_1d: error estimate %.3g exceeds tolerance %.3g", error, tol);
    throw NonConvergence(buf);
  }
  return value;
}

double normal_pdf(double x, double mean, double variance) {
  const double z = x - mean;
  return std::exp(-0.5 * z * z / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

}  // namespace gpssm
