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

// Random model pieces and dense reference computations shared by the tests.

#ifndef GPSSM_TESTS_SUPPORT_HPP
#define GPSSM_TESTS_SUPPORT_HPP

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "gpssm/elbo.hpp"

namespace gpssm::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline MatrixD random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  MatrixD m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * gaussian(rng);
  return m;
}

/// Lower factor with diagonal in [lo, hi] and small off-diagonal entries.
inline MatrixD random_factor(Rng& rng, Eigen::Index n, double lo = 0.3, double hi = 1.0, double off = 0.3) {
  MatrixD l = MatrixD::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) l(i, j) = off * gaussian(rng);
    l(i, i) = uniform(rng, lo, hi);
  }
  return l;
}

inline RbfParams<double> random_kernel(Rng& rng, Eigen::Index dim) {
  RbfParams<double> k;
  k.variance = uniform(rng, 0.5, 2.0);
  k.lengthscales = VectorD(dim);
  for (Eigen::Index d = 0; d < dim; ++d) k.lengthscales(d) = uniform(rng, 0.6, 1.5);
  return k;
}

/// Inducing inputs on a jittered grid so that K_ZZ stays well conditioned.
inline InducingPosterior<double> random_inducing(Rng& rng, Eigen::Index m, Eigen::Index dim) {
  InducingPosterior<double> q;
  q.kernel = random_kernel(rng, dim);
  q.z = MatrixD(m, dim);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index d = 0; d < dim; ++d)
      q.z(i, d) = -2.0 + 4.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(m) + 0.1 * gaussian(rng);
  q.mu = random_matrix(rng, m, dim, 0.7);
  for (Eigen::Index d = 0; d < dim; ++d) q.sigma_factor.push_back(random_factor(rng, m, 0.2, 0.6, 0.1));
  return q;
}

inline ChainParams<double> random_chain(Rng& rng, Eigen::Index length, Eigen::Index dim,
                                        Eigen::Index num_chunks = 1) {
  ChainParams<double> c;
  c.m1 = random_matrix(rng, dim, 1, 0.5).col(0);
  c.p1_factor = random_factor(rng, dim, 0.3, 0.8);
  for (Eigen::Index t = 0; t + 1 < length; ++t) {
    c.a.push_back(random_matrix(rng, dim, dim, 0.4));
    c.b.push_back(random_matrix(rng, dim, 1, 0.3).col(0));
    c.s_factor.push_back(random_factor(rng, dim, 0.2, 0.5, 0.05));
  }
  for (Eigen::Index k = 0; k + 1 < num_chunks; ++k) {
    c.chunk_mean.push_back(random_matrix(rng, dim, 1, 0.5).col(0));
    c.chunk_factor.push_back(random_factor(rng, dim, 0.3, 0.8));
  }
  return c;
}

/// Identity emission problem with observations drawn from the kink model.
inline Problem kink_problem(Variant variant, Eigen::Index length, std::uint64_t seed = 1) {
  Dataset data = make_kink_dataset(seed);
  Problem p;
  p.variant = variant;
  p.y = data.y.topRows(length);
  p.c = MatrixD::Identity(1, 1);
  p.d = VectorD::Zero(1);
  return p;
}

/// Random model parameters matching `problem`.
inline ModelParams<double> random_model(Rng& rng, const Problem& problem, Eigen::Index m,
                                        Eigen::Index num_chunks = 1) {
  const Eigen::Index dim = problem.state_dim();
  ModelParams<double> p;
  p.inducing = random_inducing(rng, m, dim);
  if (problem.variant == Variant::PrSsm) {
    p.q_factor = random_factor(rng, dim, 0.2, 0.5);
    p.chain = prssm_chain(problem.length(), PsdMatrix::from_factor(p.q_factor));
    p.chain.m1 = random_matrix(rng, dim, 1, 0.5).col(0);
    p.chain.p1_factor = random_factor(rng, dim, 0.3, 0.8);
    for (Eigen::Index k = 0; k + 1 < num_chunks; ++k) {
      p.chain.chunk_mean.push_back(random_matrix(rng, dim, 1, 0.5).col(0));
      p.chain.chunk_factor.push_back(random_factor(rng, dim, 0.3, 0.8));
    }
  } else {
    p.chain = random_chain(rng, problem.length(), dim, num_chunks);
    p.q_factor = random_factor(rng, dim, 0.2, 0.5);
  }
  p.r_factor = random_factor(rng, problem.obs_dim(), 0.3, 0.6);
  return p;
}

/// Dense predictive moments of q(f(x)) from explicit inverses.
inline std::pair<double, double> dense_marginal(const InducingPosterior<double>& q, const VectorD& x,
                                                Eigen::Index out = 0) {
  const Eigen::MatrixXd kzz = kern_gram(q.z, q.kernel);
  const Eigen::MatrixXd kinv = kzz.inverse();
  const Eigen::VectorXd kxz = kern_vector(q.z, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), q.kernel);
  const Eigen::MatrixXd sigma =
      q.sigma_factor[static_cast<std::size_t>(out)] * q.sigma_factor[static_cast<std::size_t>(out)].transpose();
  const double mean = kxz.dot(kinv * q.mu.col(out));
  const double var = q.kernel.variance + kxz.dot(kinv * (sigma - kzz) * kinv * kxz);
  return {mean, var};
}

}  // namespace gpssm::testing

#endif  // GPSSM_TESTS_SUPPORT_HPP
