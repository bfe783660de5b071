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

// Monte Carlo evidence lower bound:
//
//   sum_t E_q(x_t)[log p(y_t | x_t)] - KL(q(u) || p(u)) - KL(q(x_1) || p(x_1))
//     - sum_t E_q(f, x_t)[KL(q(x_{t+1} | f, x_t) || p(x_{t+1} | f, x_t))]

#ifndef GPSSM_ELBO_HPP
#define GPSSM_ELBO_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gpssm/parallel.hpp"
#include "gpssm/posterior.hpp"
#include "gpssm/ssm.hpp"

namespace gpssm {

/// Fixed inputs of a bound evaluation: observations, the (fixed) emission
/// mean map and the posterior family.
struct Problem {
  Variant variant = Variant::UFactorised;
  MatrixD y;
  MatrixD c;
  VectorD d;

  Eigen::Index length() const { return y.rows(); }
  Eigen::Index state_dim() const { return c.cols(); }
  Eigen::Index obs_dim() const { return c.rows(); }
};

template <class S>
struct ModelParams {
  InducingPosterior<S> inducing;
  ChainParams<S> chain;
  Matrix<S> q_factor;
  Matrix<S> r_factor;
};

struct ElboEstimate {
  double value = 0.0;
  double loglik = 0.0;
  double kl_u = 0.0;
  double kl_x1 = 0.0;
  double transition_kl = 0.0;
  double stderr_ = 0.0;
  int n_samples = 0;
  double minibatch_scale = 1.0;
};

struct ElboConfig {
  int samples = 10;
  std::uint64_t seed = 0;
  std::optional<ChunkScheme> scheme;
  /// Chunk subset to evaluate; empty means every chunk.
  std::vector<Eigen::Index> minibatch;
  SamplingOptions sampling;
  Execution execution = Execution::Parallel;
};

template <class S>
struct SampleValue {
  S loglik = 0.0;
  S transition_kl = 0.0;
};

ChunkScheme resolve_scheme(const Problem& problem, const ElboConfig& config);
double minibatch_scale(const ChunkScheme& scheme, const ElboConfig& config);

/// Whether the variant's per-sample work needs q(f(x)) marginals.
constexpr bool needs_marginals(Variant v) {
  return v == Variant::FactorisedLinear || v == Variant::FactorisedNonlinear;
}

template <class S>
S kl_x1(const ChainParams<S>& chain) {
  const Eigen::Index dim = chain.state_dim();
  return gauss_kl(chain.m1, chain.p1_factor, Vector<S>(Vector<S>::Zero(dim)),
                  Matrix<S>(Matrix<S>::Identity(dim, dim)));
}

/// Reweighted log-likelihood and transition-KL sums of one trajectory draw.
template <class S>
SampleValue<S> sample_value(const Problem& problem, const ModelParams<S>& params, const SparseGp<S>& gp,
                            const ElboConfig& config, std::uint64_t sample) {
  const ChunkScheme scheme = resolve_scheme(problem, config);
  const TrajectorySampler<S> sampler(problem.variant, params.chain, gp, params.q_factor);
  Observations<S> obs{&problem.y, &problem.c, &problem.d, params.r_factor};
  std::vector<ChunkTerms<S>> terms;
  sampler.sample_chunked(scheme, NoiseStream(config.seed, sample), config.minibatch, config.sampling, &obs,
                         &terms);
  const double scale = minibatch_scale(scheme, config);
  SampleValue<S> v;
  for (const auto& t : terms) {
    v.loglik += t.loglik;
    v.transition_kl += t.transition_kl;
  }
  v.loglik *= scale;
  v.transition_kl *= scale;
  return v;
}

/// Combines the global KL terms and per-sample values into an estimate.
ElboEstimate assemble_estimate(double kl_u, double kl_x1, std::span<const SampleValue<double>> values,
                               double scale);

/// Draws `config.samples` trajectories and evaluates the bound.
ElboEstimate elbo(const Problem& problem, const ModelParams<double>& params, const ElboConfig& config);

/// Average over samples of sum_t log N(y_t; C x_t + d, R) over drawn chunks.
double expected_loglik(std::span<const TrajectorySample<double>> samples, const EmissionModel& emission,
                       const MatrixD& y);

/// Average over samples of the summed transition KLs, recomputed from the
/// stored draws. Rows 1-3 take the expectation over f(x_t) in closed form:
/// E_{f~N(m,V)} KL(N(a,S) || N(f,Q)) = KL(N(a,S) || N(m,Q)) + tr(Q^{-1} V) / 2.
double expected_transition_kl(Variant variant, std::span<const TrajectorySample<double>> samples,
                              const ChainParams<double>& chain, const SparseGp<double>& gp,
                              const PsdMatrix& q);

}  // namespace gpssm

#endif  // GPSSM_ELBO_HPP
