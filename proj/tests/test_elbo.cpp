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

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "gpssm/elbo.hpp"
#include "gpssm/oracle.hpp"
#include "support.hpp"

using namespace gpssm;
using namespace gpssm::testing;

namespace {

std::vector<TrajectorySample<double>> draw(const Problem& problem, const ModelParams<double>& p,
                                           const SparseGp<double>& gp, const ChunkScheme& scheme,
                                           std::uint64_t seed, int n) {
  const TrajectorySampler<double> sampler(problem.variant, p.chain, gp, p.q_factor);
  std::vector<TrajectorySample<double>> out;
  for (int s = 0; s < n; ++s) out.push_back(sampler.sample_chunked(scheme, NoiseStream(seed, static_cast<std::uint64_t>(s))));
  return out;
}

EmissionModel emission_of(const Problem& problem, const ModelParams<double>& p) {
  return {problem.c, problem.d, PsdMatrix::from_factor(p.r_factor)};
}

}  // namespace

TEST_CASE("expected_loglik at the true latents with zero residual") {
  const Eigen::Index T = 6;
  TrajectorySample<double> s;
  s.scheme = ChunkScheme::single(T);
  s.drawn = {1};
  s.x = VectorD::LinSpaced(T, -1.0, 1.0);
  const EmissionModel em{MatrixD::Identity(1, 1), VectorD::Zero(1), PsdMatrix::identity(1)};
  const std::vector<TrajectorySample<double>> samples{s};
  CHECK(std::abs(expected_loglik(samples, em, s.x) - T * (-0.5 * std::log(2.0 * std::numbers::pi))) < 1e-12);
}

TEST_CASE("deterministic row 1 chain gives an exact single-sample bound") {
  Rng rng(1);
  const Problem problem = kink_problem(Variant::FactorisedLinear, 6);
  ModelParams<double> p = random_model(rng, problem, 3);
  p.chain.p1_factor(0, 0) = 1e-200;
  for (auto& s : p.chain.s_factor) s(0, 0) = 1e-200;
  // Transition KLs diverge with vanishing S, so only the likelihood term is compared.
  const SparseGp<double> gp(p.inducing);
  const auto samples = draw(problem, p, gp, ChunkScheme::single(6), 0, 5);
  const double ll = expected_loglik(samples, emission_of(problem, p), problem.y);
  VectorD x = p.chain.m1;
  double exact = 0.0;
  for (Eigen::Index t = 0; t < 6; ++t) {
    exact += mvn_logpdf(VectorD(problem.y.row(t).transpose()), {x, PsdMatrix::from_factor(p.r_factor)});
    if (t < 5) x = p.chain.a[static_cast<std::size_t>(t)] * x + p.chain.b[static_cast<std::size_t>(t)];
  }
  CHECK(std::abs(ll - exact) < 1e-10);
  std::vector<TrajectorySample<double>> one{samples[0]};
  CHECK(std::abs(expected_loglik(one, emission_of(problem, p), problem.y) - exact) < 1e-10);
}

TEST_CASE("row 1 Monte Carlo likelihood matches the closed-form Gaussian expectation") {
  Rng rng(2);
  const Eigen::Index T = 5;
  const Problem problem = kink_problem(Variant::FactorisedLinear, T);
  const ModelParams<double> p = random_model(rng, problem, 3);
  const double r = p.r_factor(0, 0) * p.r_factor(0, 0);
  double m = p.chain.m1(0), v = p.chain.p1_factor(0, 0) * p.chain.p1_factor(0, 0), exact = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const double y = problem.y(t, 0);
    exact += -0.5 * std::log(2.0 * std::numbers::pi * r) - 0.5 * ((y - m) * (y - m) + v) / r;
    if (t + 1 < T) {
      const auto k = static_cast<std::size_t>(t);
      const double a = p.chain.a[k](0, 0), s = p.chain.s_factor[k](0, 0);
      m = a * m + p.chain.b[k](0);
      v = a * a * v + s * s;
    }
  }
  ElboConfig cfg;
  cfg.samples = 100000;
  cfg.seed = 5;
  const ElboEstimate e = elbo(problem, p, cfg);
  // The per-sample spread of the bound bounds the spread of its likelihood part
  // only loosely, so the standard error is recomputed from the likelihood alone.
  const SparseGp<double> gp(p.inducing);
  const TrajectorySampler<double> sampler(problem.variant, p.chain, gp, p.q_factor);
  double s1 = 0.0, s2 = 0.0;
  const EmissionModel em = emission_of(problem, p);
  for (int s = 0; s < cfg.samples; ++s) {
    const std::vector<TrajectorySample<double>> one{sampler.sample(T, NoiseStream(cfg.seed, static_cast<std::uint64_t>(s)))};
    const double l = expected_loglik(one, em, problem.y);
    s1 += l;
    s2 += l * l;
  }
  const double n = cfg.samples;
  const double se = std::sqrt((s2 / n - (s1 / n) * (s1 / n)) / n);
  CHECK(std::abs(e.loglik - s1 / n) < 1e-9 * std::abs(s1 / n));
  CHECK(std::abs(e.loglik - exact) < 5.0 * se);
}

TEST_CASE("prssm transition KL is zero") {
  Rng rng(3);
  const Problem problem = kink_problem(Variant::PrSsm, 10);
  const ModelParams<double> p = random_model(rng, problem, 4);
  const SparseGp<double> gp(p.inducing);
  const auto samples = draw(problem, p, gp, ChunkScheme::single(10), 1, 4);
  CHECK(expected_transition_kl(Variant::PrSsm, samples, p.chain, gp, PsdMatrix::from_factor(p.q_factor)) == 0.0);
}

TEST_CASE("row 4 with identity map and S = Q has zero transition KL") {
  Rng rng(4);
  const Problem problem = kink_problem(Variant::NonFactorised, 8);
  ModelParams<double> p = random_model(rng, problem, 4);
  for (std::size_t k = 0; k < p.chain.a.size(); ++k) {
    p.chain.a[k] = MatrixD::Identity(1, 1);
    p.chain.b[k] = VectorD::Zero(1);
    p.chain.s_factor[k] = p.q_factor;
  }
  const SparseGp<double> gp(p.inducing);
  const auto samples = draw(problem, p, gp, ChunkScheme::single(8), 2, 4);
  CHECK(std::abs(expected_transition_kl(Variant::NonFactorised, samples, p.chain, gp, PsdMatrix::from_factor(p.q_factor))) < 1e-12);
}

TEST_CASE("closed-form inner expectation matches nested Monte Carlo") {
  Rng rng(5);
  for (int rep = 0; rep < 3; ++rep) {
    const VectorD a = random_matrix(rng, 2, 1).col(0);
    const MatrixD sf = random_factor(rng, 2);
    const VectorD m = random_matrix(rng, 2, 1).col(0);
    const VectorD v = (random_matrix(rng, 2, 1).array().abs() + 0.1).matrix().col(0);
    const MatrixD qf = random_factor(rng, 2, 0.4, 1.0);
    const PsdMatrix q = PsdMatrix::from_factor(qf);
    const MatrixD qinv = (qf * qf.transpose()).inverse();
    const double closed = gauss_kl({a, PsdMatrix::from_factor(sf)}, {m, q}) + 0.5 * (qinv.diagonal().array() * v.array()).sum();
    const int n = 200000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      VectorD f(2);
      for (int d = 0; d < 2; ++d) f(d) = m(d) + std::sqrt(v(d)) * gaussian(rng);
      const double k = gauss_kl({a, PsdMatrix::from_factor(sf)}, {f, q});
      s1 += k;
      s2 += k * k;
    }
    const double mean = s1 / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - closed) < 3.0 * se);
  }
}

TEST_CASE("fused per-sample terms equal the compositional recomputation") {
  for (const Variant v : kAllVariants) {
    for (const Eigen::Index chunks : {1, 3}) {
      Rng rng(6);
      const Eigen::Index T = 12;
      const Problem problem = kink_problem(v, T);
      const ModelParams<double> p = random_model(rng, problem, 4, chunks);
      ElboConfig cfg;
      cfg.samples = 6;
      cfg.seed = 9;
      cfg.scheme = ChunkScheme::uniform(T, T / chunks);
      const ElboEstimate e = elbo(problem, p, cfg);
      const SparseGp<double> gp(p.inducing);
      const auto samples = draw(problem, p, gp, *cfg.scheme, cfg.seed, cfg.samples);
      const double ll = expected_loglik(samples, emission_of(problem, p), problem.y);
      const double tk = expected_transition_kl(v, samples, p.chain, gp, PsdMatrix::from_factor(p.q_factor));
      CHECK(std::abs(e.loglik - ll) < 1e-9 * std::max(1.0, std::abs(ll)));
      CHECK(std::abs(e.transition_kl - tk) < 1e-9 * std::max(1.0, std::abs(tk)));
      CHECK(std::abs(e.kl_u - kl_u(p.inducing)) < 1e-9);
      CHECK(std::abs(e.kl_x1 - gauss_kl({p.chain.m1, PsdMatrix::from_factor(p.chain.p1_factor)},
                                        {VectorD::Zero(1), PsdMatrix::identity(1)})) < 1e-12);
      CHECK(e.value == doctest::Approx(e.loglik - e.kl_u - e.kl_x1 - e.transition_kl).epsilon(1e-14));
    }
  }
}

TEST_CASE("prssm bound at the prior reduces to the likelihood term") {
  Rng rng(7);
  const Problem problem = kink_problem(Variant::PrSsm, 10);
  ModelParams<double> p = random_model(rng, problem, 4);
  p.chain.m1 = VectorD::Zero(1);
  p.chain.p1_factor = MatrixD::Identity(1, 1);
  p.inducing.mu.setZero();
  p.inducing.sigma_factor[0] = chol(kern_gram(p.inducing.z, p.inducing.kernel)).factor();
  ElboConfig cfg;
  cfg.samples = 4;
  const ElboEstimate e = elbo(problem, p, cfg);
  CHECK(e.transition_kl == 0.0);
  CHECK(std::abs(e.kl_u) < 1e-9);
  CHECK(e.kl_x1 == 0.0);
  CHECK(std::abs(e.value - e.loglik) < 1e-9);
}

TEST_CASE("a minibatch of every chunk equals the full batch") {
  for (const Variant v : kAllVariants) {
    Rng rng(8);
    const Problem problem = kink_problem(v, 16);
    const ModelParams<double> p = random_model(rng, problem, 4, 4);
    ElboConfig cfg;
    cfg.samples = 5;
    cfg.scheme = ChunkScheme::uniform(16, 4);
    const ElboEstimate full = elbo(problem, p, cfg);
    cfg.minibatch = {0, 1, 2, 3};
    const ElboEstimate mb = elbo(problem, p, cfg);
    CHECK(mb.value == full.value);
    CHECK(mb.minibatch_scale == 1.0);
  }
}

TEST_CASE("averaging over all 2-of-4 chunk subsets recovers the full batch") {
  for (const Variant v : kAllVariants) {
    Rng rng(9);
    const Problem problem = kink_problem(v, 16);
    const ModelParams<double> p = random_model(rng, problem, 4, 4);
    ElboConfig cfg;
    cfg.samples = 5;
    cfg.scheme = ChunkScheme::uniform(16, 4);
    const ElboEstimate full = elbo(problem, p, cfg);
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index j = i + 1; j < 4; ++j) {
        cfg.minibatch = {i, j};
        const ElboEstimate e = elbo(problem, p, cfg);
        CHECK(e.minibatch_scale == 2.0);
        sum += e.value;
        ++count;
      }
    }
    CHECK(std::abs(sum / count - full.value) <= 1e-12 * std::abs(full.value));
  }
}

TEST_CASE("bound stays below the exact log marginal at T = 2") {
  OracleConfig oracle;
  for (const Variant v : kAllVariants) {
    Rng rng(10);
    for (int rep = 0; rep < 3; ++rep) {
      Problem problem = kink_problem(v, 2, 20 + static_cast<std::uint64_t>(rep));
      ModelParams<double> p = random_model(rng, problem, 3);
      p.q_factor = MatrixD::Constant(1, 1, std::sqrt(oracle.q));
      p.r_factor = MatrixD::Constant(1, 1, std::sqrt(oracle.r));
      p.inducing.kernel = oracle.kernel;
      if (v == Variant::PrSsm) p.chain = prssm_chain(2, PsdMatrix::from_factor(p.q_factor));
      ElboConfig cfg;
      cfg.samples = 4000;
      cfg.seed = static_cast<std::uint64_t>(rep);
      const ElboEstimate e = elbo(problem, p, cfg);
      const VectorD y = problem.y.col(0);
      CHECK(e.value - 3.0 * e.stderr_ <= log_marginal_quadrature(oracle, y));
    }
  }
}

TEST_CASE("invalid configurations are rejected") {
  Rng rng(11);
  const Problem problem = kink_problem(Variant::UFactorised, 8);
  const ModelParams<double> p = random_model(rng, problem, 3);
  ElboConfig cfg;
  cfg.samples = 0;
  CHECK_THROWS(elbo(problem, p, cfg));
  cfg.samples = 2;
  cfg.scheme = ChunkScheme::uniform(9, 3);
  CHECK_THROWS(elbo(problem, p, cfg));
}
