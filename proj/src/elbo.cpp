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

#include "gpssm/elbo.hpp"

#include <cmath>
#include <stdexcept>

namespace gpssm {

ChunkScheme resolve_scheme(const Problem& problem, const ElboConfig& config) {
  if (!config.scheme) return ChunkScheme::single(problem.length());
  if (config.scheme->length != problem.length()) {
    throw std::invalid_argument("chunk scheme length differs from the data length");
  }
  return *config.scheme;
}

double minibatch_scale(const ChunkScheme& scheme, const ElboConfig& config) {
  if (config.minibatch.empty()) return 1.0;
  return static_cast<double>(scheme.num_chunks()) / static_cast<double>(config.minibatch.size());
}

ElboEstimate assemble_estimate(double kl_u, double kl_x1, std::span<const SampleValue<double>> values,
                               double scale) {
  if (values.empty()) throw std::invalid_argument("elbo: need at least one sample");
  const double n = static_cast<double>(values.size());
  double loglik = 0.0;
  double trans = 0.0;
  for (const auto& v : values) {
    loglik += v.loglik;
    trans += v.transition_kl;
  }
  loglik /= n;
  trans /= n;
  const double mean = loglik - trans;
  double ss = 0.0;
  for (const auto& v : values) {
    const double r = (v.loglik - v.transition_kl) - mean;
    ss += r * r;
  }
  ElboEstimate e;
  e.loglik = loglik;
  e.transition_kl = trans;
  e.kl_u = kl_u;
  e.kl_x1 = kl_x1;
  e.value = e.loglik - e.kl_u - e.kl_x1 - e.transition_kl;
  e.stderr_ = values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  e.n_samples = static_cast<int>(values.size());
  e.minibatch_scale = scale;
  return e;
}

ElboEstimate elbo(const Problem& problem, const ModelParams<double>& params, const ElboConfig& config) {
  if (config.samples < 1) throw std::invalid_argument("elbo: samples must be >= 1");
  const SparseGp<double> gp(params.inducing);
  const double klu = gp.kl_u();
  const double klx = kl_x1(params.chain);
  std::vector<SampleValue<double>> values(static_cast<std::size_t>(config.samples));
  for_each_index(values.size(), config.execution, [&](std::size_t s) {
    values[s] = sample_value(problem, params, gp, config, s);
  });
  return assemble_estimate(klu, klx, values, minibatch_scale(resolve_scheme(problem, config), config));
}

double expected_loglik(std::span<const TrajectorySample<double>> samples, const EmissionModel& emission,
                       const MatrixD& y) {
  if (samples.empty()) throw std::invalid_argument("expected_loglik: no samples");
  double total = 0.0;
  for (const auto& s : samples) {
    for (Eigen::Index c = 0; c < s.scheme.num_chunks(); ++c) {
      if (!s.drawn[static_cast<std::size_t>(c)]) continue;
      for (Eigen::Index t = s.scheme.begin(c); t < s.scheme.end(c); ++t) {
        const VectorD x = s.x.row(t).transpose();
        const GaussianMoments g{emission.c * x + emission.d, emission.r};
        total += mvn_logpdf(VectorD(y.row(t).transpose()), g);
      }
    }
  }
  return total / static_cast<double>(samples.size());
}

double expected_transition_kl(Variant variant, std::span<const TrajectorySample<double>> samples,
                              const ChainParams<double>& chain, const SparseGp<double>& gp,
                              const PsdMatrix& q) {
  if (samples.empty()) throw std::invalid_argument("expected_transition_kl: no samples");
  const Eigen::Index dim = q.dim();
  const MatrixD q_inv = solve_lower(q.factor(), MatrixD(MatrixD::Identity(dim, dim)));

  double total = 0.0;
  for (const auto& s : samples) {
    std::optional<PreparedInducing<double>> u;
    if (draws_inducing(variant)) u = gp.prepare(s.u);
    for (Eigen::Index c = 0; c < s.scheme.num_chunks(); ++c) {
      if (!s.drawn[static_cast<std::size_t>(c)]) continue;
      const bool last = c + 1 == s.scheme.num_chunks();
      const Eigen::Index stop = last ? s.scheme.end(c) - 1 : s.scheme.end(c);
      for (Eigen::Index t = s.scheme.begin(c); t < stop; ++t) {
        const bool boundary = !last && t == s.scheme.end(c) - 1;
        if (variant == Variant::PrSsm && !boundary) continue;
        const VectorD x = s.x.row(t).transpose();
        const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
        VectorD f;
        if (s.f.rows() > 0) f = s.f.row(t).transpose();

        GaussianMoments qt;
        if (boundary) {
          const std::size_t k = static_cast<std::size_t>(c);
          qt = {chain.chunk_mean[k], PsdMatrix::from_factor(chain.chunk_factor[k])};
        } else {
          TransitionContext<double> ctx{u ? &*u : nullptr, &f, &q.factor()};
          const TransitionMoments<double> m = transition_moments(variant, t, x, chain, gp, ctx);
          qt = {m.mean, PsdMatrix::from_factor(m.cov_factor)};
        }

        if (uses_conditioner(variant)) {
          total += gauss_kl(qt, GaussianMoments{f, q});
          continue;
        }
        const DiagMoments<double> fm =
            variant == Variant::UFactorised ? gp.conditional_given_u(*u, xs) : gp.predict_marginal(xs);
        double trace = 0.0;
        for (Eigen::Index d = 0; d < dim; ++d) trace += fm.var(d) * q_inv.col(d).squaredNorm();
        total += gauss_kl(qt, GaussianMoments{fm.mean, q}) + 0.5 * trace;
      }
    }
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace gpssm
