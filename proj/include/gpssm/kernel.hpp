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

#ifndef GPSSM_KERNEL_HPP
#define GPSSM_KERNEL_HPP

#include <span>
#include <stdexcept>

#include "gpssm/linalg.hpp"

namespace gpssm {

/// Squared-exponential covariance with one lengthscale per input dimension.
template <class S>
struct RbfParams {
  S variance = 1.0;
  Vector<S> lengthscales = Vector<S>::Ones(1);

  static RbfParams defaults(Eigen::Index dim) { return {S(1.0), Vector<S>::Ones(dim)}; }
  Eigen::Index dim() const { return lengthscales.size(); }

  void validate() const {
    if (!(value_of(variance) > 0.0)) throw std::invalid_argument("RbfParams: variance must be > 0");
    for (Eigen::Index d = 0; d < lengthscales.size(); ++d) {
      if (!(value_of(lengthscales(d)) > 0.0)) {
        throw std::invalid_argument("RbfParams: lengthscales must be > 0");
      }
    }
  }
};

double kern(std::span<const double> x, std::span<const double> x2, const RbfParams<double>& p);

/// One tape node per evaluation, with partials for inputs and hyperparameters.
ad::Var kern(std::span<const ad::Var> x, std::span<const ad::Var> x2,
             const RbfParams<ad::Var>& p);

template <class S>
std::span<const S> row_span(const Matrix<S>& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

template <class S>
Matrix<S> kern_matrix(const Matrix<S>& xa, const Matrix<S>& xb, const RbfParams<S>& p) {
  if (xa.cols() != p.dim() || xb.cols() != p.dim()) {
    throw DimensionMismatch("kern_matrix: input dimension mismatch");
  }
  Matrix<S> k(xa.rows(), xb.rows());
  for (Eigen::Index i = 0; i < xa.rows(); ++i)
    for (Eigen::Index j = 0; j < xb.rows(); ++j) k(i, j) = kern(row_span(xa, i), row_span(xb, j), p);
  return k;
}

/// Symmetric Gram matrix; evaluates each pair once.
template <class S>
Matrix<S> kern_gram(const Matrix<S>& x, const RbfParams<S>& p) {
  if (x.cols() != p.dim()) throw DimensionMismatch("kern_gram: input dimension mismatch");
  Matrix<S> k(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    k(i, i) = p.variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      k(i, j) = kern(row_span(x, i), row_span(x, j), p);
      k(j, i) = k(i, j);
    }
  }
  return k;
}

template <class S>
Vector<S> kern_diag(const Matrix<S>& xa, const RbfParams<S>& p) {
  if (xa.cols() != p.dim()) throw DimensionMismatch("kern_diag: input dimension mismatch");
  return Vector<S>::Constant(xa.rows(), p.variance);
}

/// k(X_i, x) for every row of X.
template <class S>
Vector<S> kern_vector(const Matrix<S>& x_rows, std::span<const S> x, const RbfParams<S>& p) {
  if (x_rows.cols() != p.dim() || static_cast<Eigen::Index>(x.size()) != p.dim()) {
    throw DimensionMismatch("kern_vector: input dimension mismatch");
  }
  Vector<S> k(x_rows.rows());
  for (Eigen::Index i = 0; i < x_rows.rows(); ++i) k(i) = kern(row_span(x_rows, i), x, p);
  return k;
}

}  // namespace gpssm

#endif  // GPSSM_KERNEL_HPP
