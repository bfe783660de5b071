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

#include "doctest.h"
#include "gpssm/posterior.hpp"
#include "support.hpp"

using namespace gpssm;
using namespace gpssm::testing;

namespace {

std::span<const double> sp(const VectorD& x) { return {x.data(), static_cast<std::size_t>(x.size())}; }

MatrixD cov_of(const TransitionMoments<double>& m) { return m.cov_factor * m.cov_factor.transpose(); }

bool same_bits(const MatrixD& a, const MatrixD& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = b.data()[i];
    if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("variant names roundtrip") {
  for (const Variant v : kAllVariants) CHECK(parse_variant(variant_name(v)) == v);
  CHECK(variant_name(Variant::UFactorised) == "u-factorised");
  CHECK_THROWS(parse_variant("bogus"));
}

TEST_CASE("chunk schemes") {
  const ChunkScheme s = ChunkScheme::uniform(50, 10);
  CHECK(s.num_chunks() == 5);
  for (Eigen::Index c = 0; c < 5; ++c) CHECK(s.end(c) - s.begin(c) == 10);
  const ChunkScheme r = ChunkScheme::uniform(23, 10);
  CHECK(r.num_chunks() == 3);
  CHECK(r.end(2) - r.begin(2) == 3);
  CHECK(ChunkScheme::uniform(7, 7).num_chunks() == 1);
  CHECK_THROWS(ChunkScheme::uniform(7, 0));
}

TEST_CASE("row 1 with identity map is a random walk around x_t") {
  Rng rng(1);
  ChainParams<double> chain = random_chain(rng, 4, 2);
  chain.a[1] = MatrixD::Identity(2, 2);
  chain.b[1] = VectorD::Zero(2);
  const SparseGp<double> gp(random_inducing(rng, 3, 2));
  const VectorD x = random_matrix(rng, 2, 1).col(0);
  const auto m = transition_moments(Variant::FactorisedLinear, 1, x, chain, gp, {});
  CHECK((m.mean - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cov_of(m) - chain.s_factor[1] * chain.s_factor[1].transpose()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("row 2 assembles from predict_marginal") {
  Rng rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const ChainParams<double> chain = random_chain(rng, 3, 2);
    const SparseGp<double> gp(random_inducing(rng, 4, 2));
    const VectorD x = random_matrix(rng, 2, 1).col(0);
    const auto m = transition_moments(Variant::FactorisedNonlinear, 0, x, chain, gp, {});
    const auto fm = gp.predict_marginal(sp(x));
    const MatrixD a = chain.a[0];
    const VectorD mean = a * fm.mean + chain.b[0];
    const MatrixD cov = chain.s_factor[0] * chain.s_factor[0].transpose() + a * fm.var.asDiagonal() * a.transpose();
    CHECK((m.mean - mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((cov_of(m) - cov).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("row 3 at an inducing input uses u directly") {
  Rng rng(3);
  const ChainParams<double> chain = random_chain(rng, 3, 1);
  const InducingPosterior<double> q = random_inducing(rng, 4, 1);
  const SparseGp<double> gp(q);
  const PreparedInducing<double> u = gp.prepare(random_matrix(rng, 4, 1));
  TransitionContext<double> ctx;
  ctx.u = &u;
  const VectorD x = q.z.row(2).transpose();
  const auto m = transition_moments(Variant::UFactorised, 1, x, chain, gp, ctx);
  CHECK(std::abs(m.mean(0) - (chain.a[1](0, 0) * u.u(2, 0) + chain.b[1](0))) < 1e-9);
  CHECK(std::abs(cov_of(m)(0, 0) - chain.s_factor[1](0, 0) * chain.s_factor[1](0, 0)) < 1e-9);
}

TEST_CASE("variants that need context reject a missing one") {
  Rng rng(4);
  const ChainParams<double> chain = random_chain(rng, 3, 1);
  const SparseGp<double> gp(random_inducing(rng, 3, 1));
  const VectorD x = VectorD::Zero(1);
  CHECK_THROWS_AS(transition_moments(Variant::UFactorised, 0, x, chain, gp, {}), MissingContext);
  CHECK_THROWS_AS(transition_moments(Variant::NonFactorised, 0, x, chain, gp, {}), MissingContext);
}

TEST_CASE("near-deterministic row 1 chain follows the affine recursion") {
  Rng rng(5);
  ChainParams<double> chain = random_chain(rng, 6, 2);
  const double tiny = 1e-200;
  chain.p1_factor = MatrixD::Identity(2, 2) * tiny;
  for (auto& s : chain.s_factor) s = MatrixD::Identity(2, 2) * tiny;
  const SparseGp<double> gp(random_inducing(rng, 3, 2));
  const MatrixD qf = MatrixD::Identity(2, 2);
  const TrajectorySampler<double> sampler(Variant::FactorisedLinear, chain, gp, qf);
  const auto s = sampler.sample(6, NoiseStream(1, 0));
  VectorD x = chain.m1;
  for (Eigen::Index t = 0; t < 6; ++t) {
    CHECK((s.x.row(t).transpose() - x).cwiseAbs().maxCoeff() < 1e-14);
    if (t + 1 < 6) x = chain.a[static_cast<std::size_t>(t)] * x + chain.b[static_cast<std::size_t>(t)];
  }
}

TEST_CASE("row 1 sample moments match the Gaussian forward recursion") {
  Rng rng(6);
  const Eigen::Index T = 5;
  const ChainParams<double> chain = random_chain(rng, T, 2);
  const SparseGp<double> gp(random_inducing(rng, 3, 2));
  const MatrixD qf = MatrixD::Identity(2, 2);
  const TrajectorySampler<double> sampler(Variant::FactorisedLinear, chain, gp, qf);
  std::vector<VectorD> mean{chain.m1};
  std::vector<MatrixD> cov{chain.p1_factor * chain.p1_factor.transpose()};
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    mean.push_back(chain.a[k] * mean.back() + chain.b[k]);
    cov.push_back(chain.a[k] * cov.back() * chain.a[k].transpose() + chain.s_factor[k] * chain.s_factor[k].transpose());
  }
  const int n = 100000;
  std::vector<VectorD> s1(T, VectorD::Zero(2));
  std::vector<MatrixD> s2(T, MatrixD::Zero(2, 2));
  for (int i = 0; i < n; ++i) {
    const auto s = sampler.sample(T, NoiseStream(9, static_cast<std::uint64_t>(i)));
    for (Eigen::Index t = 0; t < T; ++t) {
      const VectorD x = s.x.row(t).transpose();
      s1[static_cast<std::size_t>(t)] += x;
      s2[static_cast<std::size_t>(t)] += x * x.transpose();
    }
  }
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    const VectorD m = s1[k] / n;
    const MatrixD c = s2[k] / n - m * m.transpose();
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(m(i) - mean[k](i)) < 5.0 * std::sqrt(cov[k](i, i) / n));
      for (int j = 0; j < 2; ++j) {
        const double se = std::sqrt((cov[k](i, i) * cov[k](j, j) + cov[k](i, j) * cov[k](i, j)) / n);
        CHECK(std::abs(c(i, j) - cov[k](i, j)) < 5.0 * se);
      }
    }
  }
}

TEST_CASE("single-chunk sampling equals unchunked sampling bit for bit") {
  for (const Variant v : kAllVariants) {
    Rng rng(7);
    const Problem problem = kink_problem(v, 20);
    const ModelParams<double> p = random_model(rng, problem, 5);
    const SparseGp<double> gp(p.inducing);
    const TrajectorySampler<double> sampler(v, p.chain, gp, p.q_factor);
    for (std::uint64_t s = 0; s < 3; ++s) {
      const auto a = sampler.sample(20, NoiseStream(4, s));
      const auto b = sampler.sample_chunked(ChunkScheme::uniform(20, 20), NoiseStream(4, s));
      CHECK(same_bits(a.x, b.x));
      CHECK(same_bits(a.f, b.f));
      CHECK(same_bits(a.u, b.u));
    }
  }
}

TEST_CASE("chunk subsets reproduce the full draw on the selected chunks") {
  for (const Variant v : kAllVariants) {
    Rng rng(8);
    const Problem problem = kink_problem(v, 20);
    const ModelParams<double> p = random_model(rng, problem, 5, 4);
    const SparseGp<double> gp(p.inducing);
    const TrajectorySampler<double> sampler(v, p.chain, gp, p.q_factor);
    const ChunkScheme scheme = ChunkScheme::uniform(20, 5);
    const auto full = sampler.sample_chunked(scheme, NoiseStream(2, 1));
    const std::vector<Eigen::Index> pick{1, 3};
    const auto part = sampler.sample_chunked(scheme, NoiseStream(2, 1), pick);
    CHECK(part.drawn == std::vector<char>{0, 1, 0, 1});
    for (const Eigen::Index c : pick) {
      for (Eigen::Index t = scheme.begin(c); t < scheme.end(c); ++t) CHECK(part.x(t, 0) == full.x(t, 0));
    }
    CHECK(std::isnan(part.x(0, 0)));
    CHECK(std::isnan(part.x(12, 0)));
  }
}

TEST_CASE("chunk initial states come from the explicit chunk Gaussians") {
  Rng rng(9);
  const Problem problem = kink_problem(Variant::NonFactorised, 12);
  ModelParams<double> p = random_model(rng, problem, 4, 3);
  const SparseGp<double> gp(p.inducing);
  const TrajectorySampler<double> sampler(Variant::NonFactorised, p.chain, gp, p.q_factor);
  const ChunkScheme scheme = ChunkScheme::uniform(12, 4);
  const NoiseStream noise(3, 0);
  const auto s = sampler.sample_chunked(scheme, noise);
  for (Eigen::Index c = 1; c < 3; ++c) {
    const auto k = static_cast<std::size_t>(c - 1);
    const double e = noise.normal(NoiseTag::InitialState, static_cast<std::uint64_t>(scheme.begin(c)), 0);
    CHECK(std::abs(s.x(scheme.begin(c), 0) - (p.chain.chunk_mean[k](0) + p.chain.chunk_factor[k](0, 0) * e)) < 1e-14);
  }
}

TEST_CASE("retained sites require every chunk") {
  Rng rng(10);
  const Problem problem = kink_problem(Variant::NonFactorised, 12);
  const ModelParams<double> p = random_model(rng, problem, 4, 3);
  const SparseGp<double> gp(p.inducing);
  const TrajectorySampler<double> sampler(Variant::NonFactorised, p.chain, gp, p.q_factor);
  const std::vector<Eigen::Index> pick{0};
  SamplingOptions opt;
  opt.retain_sites = true;
  CHECK_THROWS(sampler.sample_chunked(ChunkScheme::uniform(12, 4), NoiseStream(0, 0), pick, opt));
  CHECK_NOTHROW(sampler.sample_chunked(ChunkScheme::uniform(12, 4), NoiseStream(0, 0), {}, opt));
}

TEST_CASE("prssm chain matches the prior transition") {
  const PsdMatrix q = PsdMatrix::scaled_identity(1, 0.3);
  const ChainParams<double> chain = prssm_chain(10, q);
  CHECK(chain.prior_transitions);
  Rng rng(11);
  const SparseGp<double> gp(random_inducing(rng, 3, 1));
  const VectorD f = VectorD::Constant(1, 0.7);
  TransitionContext<double> ctx;
  ctx.f = &f;
  ctx.q_factor = &q.factor();
  const auto m = transition_moments(Variant::PrSsm, 4, VectorD(VectorD::Constant(1, -0.2)), chain, gp, ctx);
  CHECK(m.mean(0) == 0.7);
  CHECK(std::abs(cov_of(m)(0, 0) - 0.3) < 1e-15);
  const MatrixD qf = q.factor();
  CHECK_THROWS(TrajectorySampler<double>(Variant::UFactorised, chain, gp, qf));
}

TEST_CASE("prssm rollouts under large Q spread more than a u-factorised posterior") {
  Rng rng(12);
  const Eigen::Index T = 20;
  const Problem problem = kink_problem(Variant::UFactorised, T);
  ModelParams<double> p = random_model(rng, problem, 5);
  for (auto& s : p.chain.s_factor) s = MatrixD::Constant(1, 1, 0.1);
  const SparseGp<double> gp(p.inducing);
  const MatrixD big_q = MatrixD::Constant(1, 1, 1.5);
  const ChainParams<double> pr = prssm_chain(T, PsdMatrix::from_factor(big_q));
  const TrajectorySampler<double> a(Variant::UFactorised, p.chain, gp, big_q);
  const TrajectorySampler<double> b(Variant::PrSsm, pr, gp, big_q);
  auto final_var = [&](const TrajectorySampler<double>& s) {
    double s1 = 0.0, s2 = 0.0;
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
      const double x = s.sample(T, NoiseStream(5, static_cast<std::uint64_t>(i))).x(T - 1, 0);
      s1 += x;
      s2 += x * x;
    }
    return s2 / n - (s1 / n) * (s1 / n);
  };
  CHECK(final_var(b) > final_var(a));
}
