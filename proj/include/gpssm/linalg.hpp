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

// Dense kernels templated on the scalar type, so the same code runs on
// plain doubles and on ad::Var for gradients. Everything works through
// lower-triangular factors; no explicit inverses.

#ifndef GPSSM_LINALG_HPP
#define GPSSM_LINALG_HPP

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gpssm/ad.hpp"

namespace gpssm {

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatrixD = Matrix<double>;
using VectorD = Vector<double>;

class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double value_of(double x) { return x; }
inline double value_of(const ad::Var& x) { return x.value(); }

template <class S>
MatrixD values_of(const Matrix<S>& m) {
  MatrixD out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = value_of(m(i, j));
  return out;
}

template <class S>
VectorD values_of(const Vector<S>& v) {
  VectorD out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = value_of(v(i));
  return out;
}

template <class S>
Matrix<S> lift(const MatrixD& m) {
  return m.template cast<S>();
}
template <class S>
Vector<S> lift(const VectorD& v) {
  return v.template cast<S>();
}

inline double dot_sub(double a, std::span<const double> x, std::span<const double> y) {
  for (std::size_t k = 0; k < x.size(); ++k) a -= x[k] * y[k];
  return a;
}
using ad::dot_sub;

inline double sum_squares(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}
using ad::sum_squares;

template <class S>
std::span<const S> row_prefix(const Matrix<S>& m, Eigen::Index row, Eigen::Index n) {
  return {m.data() + row * m.cols(), static_cast<std::size_t>(n)};
}

template <class S>
std::span<const S> head(const Vector<S>& v, Eigen::Index n) {
  return {v.data(), static_cast<std::size_t>(n)};
}

template <class S>
S sum_squares(const Vector<S>& v) {
  return sum_squares(std::span<const S>(v.data(), static_cast<std::size_t>(v.size())));
}

/// Lower Cholesky factor of a + jitter * I. Throws NotPositiveDefinite on a
/// non-positive or non-finite pivot.
template <class S>
Matrix<S> cholesky_lower(const Matrix<S>& a, double jitter = 0.0) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw DimensionMismatch("cholesky: matrix not square");
  Matrix<S> l = Matrix<S>::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const S pivot = dot_sub(a(j, j) + jitter, row_prefix(l, j, j), row_prefix(l, j, j));
    const double pv = value_of(pivot);
    if (!(pv > 0.0) || !std::isfinite(pv)) {
      throw NotPositiveDefinite("cholesky: non-positive pivot " + std::to_string(pv) +
                                " at index " + std::to_string(j));
    }
    using std::sqrt;
    const S d = sqrt(pivot);
    l(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = dot_sub(a(i, j), row_prefix(l, i, j), row_prefix(l, j, j)) / d;
    }
  }
  return l;
}

/// Escalation ladder for stabilising a near-singular factorization. Levels
/// are relative to the mean diagonal of the input.
struct JitterPolicy {
  bool try_zero = true;
  double start = 1e-9;
  double max = 1e-3;
  double factor = 10.0;
};

/// Smallest jitter (absolute) on the policy ladder for which the factorization
/// of `a` succeeds.
double choose_jitter(const MatrixD& a, const JitterPolicy& policy = {});

template <class S>
struct Factor {
  Matrix<S> lower;
  double jitter = 0.0;
};

/// The jitter is applied as level * mean(diag(a)) in S so that it moves with
/// the scale of `a` under differentiation.
template <class S>
Factor<S> factorize(const Matrix<S>& a, const JitterPolicy& policy = {}) {
  const double jitter = choose_jitter(values_of(a), policy);
  if (jitter == 0.0) return {cholesky_lower(a, 0.0), 0.0};
  S scale = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) scale += a(i, i);
  scale = scale / static_cast<double>(a.rows());
  const double level = jitter / std::abs(value_of(scale));
  Matrix<S> shifted = a;
  for (Eigen::Index i = 0; i < a.rows(); ++i) shifted(i, i) += level * scale;
  return {cholesky_lower(shifted, 0.0), jitter};
}

/// Solves L x = b for lower-triangular L.
template <class S>
Vector<S> solve_lower(const Matrix<S>& l, const Vector<S>& b) {
  const Eigen::Index n = l.rows();
  if (b.size() != n) throw DimensionMismatch("solve_lower: size mismatch");
  Vector<S> x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i) = dot_sub(b(i), row_prefix(l, i, i), head(x, i)) / l(i, i);
  }
  return x;
}

/// Solves L^T x = b for lower-triangular L.
template <class S>
Vector<S> solve_lower_transpose(const Matrix<S>& l, const Vector<S>& b) {
  const Eigen::Index n = l.rows();
  if (b.size() != n) throw DimensionMismatch("solve_lower_transpose: size mismatch");
  const Matrix<S> u = l.transpose();
  Vector<S> x(n);
  for (Eigen::Index i = n; i-- > 0;) {
    const std::size_t len = static_cast<std::size_t>(n - i - 1);
    x(i) = dot_sub(b(i), std::span<const S>(u.data() + i * n + i + 1, len),
                     std::span<const S>(x.data() + i + 1, len)) /
           u(i, i);
  }
  return x;
}

/// Column-wise solve L X = B.
template <class S>
Matrix<S> solve_lower(const Matrix<S>& l, const Matrix<S>& b) {
  Matrix<S> x(b.rows(), b.cols());
  for (Eigen::Index c = 0; c < b.cols(); ++c) {
    const Vector<S> col = b.col(c);
    x.col(c) = solve_lower(l, col);
  }
  return x;
}

/// X = L^{-1} B for lower-triangular L and B; X is lower-triangular.
template <class S>
Matrix<S> solve_lower_triangular(const Matrix<S>& l, const Matrix<S>& b) {
  const Eigen::Index n = l.rows();
  if (b.rows() != n || b.cols() != n) throw DimensionMismatch("solve_lower_triangular: size mismatch");
  Matrix<S> x = Matrix<S>::Zero(n, n);
  std::vector<S> col;
  for (Eigen::Index c = 0; c < n; ++c) {
    col.clear();
    for (Eigen::Index i = c; i < n; ++i) {
      const std::span<const S> li(l.data() + i * n + c, static_cast<std::size_t>(i - c));
      x(i, c) = dot_sub(b(i, c), li, std::span<const S>(col)) / l(i, i);
      col.push_back(x(i, c));
    }
  }
  return x;
}

/// A B for lower-triangular A and B.
template <class S>
Matrix<S> lower_product(const Matrix<S>& a, const Matrix<S>& b) {
  const Eigen::Index n = a.rows();
  if (b.rows() != n || b.cols() != n) throw DimensionMismatch("lower_product: size mismatch");
  Matrix<S> out = Matrix<S>::Zero(n, n);
  std::vector<S> col;
  for (Eigen::Index j = 0; j < n; ++j) {
    col.clear();
    for (Eigen::Index k = j; k < n; ++k) col.push_back(b(k, j));
    for (Eigen::Index i = j; i < n; ++i) {
      const std::span<const S> ai(a.data() + i * n + j, static_cast<std::size_t>(i - j + 1));
      out(i, j) = -dot_sub(S(0.0), ai, std::span<const S>(col.data(), ai.size()));
    }
  }
  return out;
}

/// Column-wise solve L^T X = B.
template <class S>
Matrix<S> solve_lower_transpose(const Matrix<S>& l, const Matrix<S>& b) {
  Matrix<S> x(b.rows(), b.cols());
  for (Eigen::Index c = 0; c < b.cols(); ++c) {
    const Vector<S> col = b.col(c);
    x.col(c) = solve_lower_transpose(l, col);
  }
  return x;
}

template <class S>
S log_det_from_factor(const Matrix<S>& l) {
  using std::log;
  S s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += log(l(i, i));
  return 2.0 * s;
}

/// mean + L * noise
template <class S>
Vector<S> affine_transform(const Vector<S>& mean, const Matrix<S>& l, const VectorD& noise) {
  const Eigen::Index n = mean.size();
  if (l.rows() != n || noise.size() != n) throw DimensionMismatch("transform: size mismatch");
  const Vector<S> e = lift<S>(noise);
  Vector<S> out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i) = mean(i) - dot_sub(S(0.0), row_prefix(l, i, i + 1), head(e, i + 1));
  }
  return out;
}

/// Closed-form KL(N(mq, Lq Lq^T) || N(mp, Lp Lp^T)).
template <class S>
S gauss_kl(const Vector<S>& mq, const Matrix<S>& lq, const Vector<S>& mp, const Matrix<S>& lp) {
  const Eigen::Index n = mq.size();
  if (mp.size() != n || lq.rows() != n || lp.rows() != n) {
    throw DimensionMismatch("gauss_kl: dimension mismatch");
  }
  const Matrix<S> b = solve_lower(lp, lq);
  S trace = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) trace += sum_squares(row_prefix(b, i, n));
  const Vector<S> diff = mp - mq;
  const S maha = sum_squares(solve_lower(lp, diff));
  return 0.5 * (trace + maha - static_cast<double>(n) + log_det_from_factor(lp) -
                log_det_from_factor(lq));
}

template <class S>
S mvn_logpdf(const Vector<S>& x, const Vector<S>& mean, const Matrix<S>& l) {
  const Eigen::Index n = x.size();
  if (mean.size() != n || l.rows() != n) throw DimensionMismatch("mvn_logpdf: dimension mismatch");
  const Vector<S> diff = x - mean;
  const S maha = sum_squares(solve_lower(l, diff));
  return -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) +
                 log_det_from_factor(l) + maha);
}

/// Lower triangle of a packed vector (row-major, diagonal stored as log).
template <class S>
Matrix<S> unpack_log_diag_lower(std::span<const S> packed, Eigen::Index n) {
  using std::exp;
  Matrix<S> l = Matrix<S>::Zero(n, n);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) l(i, j) = packed[k++];
    l(i, i) = exp(packed[k++]);
  }
  return l;
}

}  // namespace gpssm

#endif  // GPSSM_LINALG_HPP
