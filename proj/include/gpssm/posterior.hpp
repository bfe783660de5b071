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

// Approximate posteriors over latent trajectories. Each variant defines the
// Markov transition q(x_{t+1} | f, x_t) = N(A_t f_t + b_t, S_t*):
//
//   FactorisedLinear     f_t = x_t                     S_t* = S_t
//   FactorisedNonlinear  f_t = K_xZ K_ZZ^{-1} mu_u     S_t* = S_t + A_t C_f(x_t) A_t^T
//   UFactorised          f_t = K_xZ K_ZZ^{-1} u        S_t* = S_t + A_t C_{f|u}(x_t) A_t^T
//   NonFactorised        f_t = f(x_t) (drawn exactly)  S_t* = S_t
//   PrSsm                prior transition N(f(x_t), Q)
//
// All randomness enters through NoiseStream draws, so every sample is a
// deterministic, differentiable function of the parameters.

#ifndef GPSSM_POSTERIOR_HPP
#define GPSSM_POSTERIOR_HPP

#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gpssm/noise.hpp"
#include "gpssm/sparse_gp.hpp"

namespace gpssm {

enum class Variant { FactorisedLinear, FactorisedNonlinear, UFactorised, NonFactorised, PrSsm };

inline constexpr Variant kAllVariants[] = {Variant::FactorisedLinear, Variant::FactorisedNonlinear,
                                           Variant::UFactorised, Variant::NonFactorised, Variant::PrSsm};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

/// Variants whose samples carry a draw of the inducing outputs.
constexpr bool draws_inducing(Variant v) {
  return v == Variant::UFactorised || v == Variant::NonFactorised || v == Variant::PrSsm;
}
/// Variants that sample f(x_t) exactly through the sequential conditioner.
constexpr bool uses_conditioner(Variant v) {
  return v == Variant::NonFactorised || v == Variant::PrSsm;
}

class MissingContext : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Partition of time indices 0..T-1 into consecutive chunks.
struct ChunkScheme {
  std::vector<Eigen::Index> starts{0};
  Eigen::Index length = 0;

  static ChunkScheme single(Eigen::Index length);
  /// Chunks of `tau` steps; the last one takes the remainder.
  static ChunkScheme uniform(Eigen::Index length, Eigen::Index tau);

  Eigen::Index num_chunks() const { return static_cast<Eigen::Index>(starts.size()); }
  Eigen::Index begin(Eigen::Index c) const { return starts[static_cast<std::size_t>(c)]; }
  Eigen::Index end(Eigen::Index c) const {
    return c + 1 < num_chunks() ? starts[static_cast<std::size_t>(c + 1)] : length;
  }
  void validate() const;
};

/// Variational parameters of q(x_1) and the per-step transitions, plus the
/// explicit initial-state Gaussians of every chunk after the first.
template <class S>
struct ChainParams {
  Vector<S> m1;
  Matrix<S> p1_factor;
  std::vector<Matrix<S>> a;
  std::vector<Vector<S>> b;
  std::vector<Matrix<S>> s_factor;
  std::vector<Vector<S>> chunk_mean;
  std::vector<Matrix<S>> chunk_factor;
  bool tied = false;
  bool prior_transitions = false;

  Eigen::Index state_dim() const { return m1.size(); }
  std::size_t step(Eigen::Index t) const { return tied ? 0 : static_cast<std::size_t>(t); }
  const Matrix<S>& a_at(Eigen::Index t) const { return a[step(t)]; }
  const Vector<S>& b_at(Eigen::Index t) const { return b[step(t)]; }
  const Matrix<S>& s_at(Eigen::Index t) const { return s_factor[step(t)]; }

  void validate(Eigen::Index length, Eigen::Index num_chunks) const {
    const Eigen::Index dim = m1.size();
    const std::size_t steps = tied ? 1 : static_cast<std::size_t>(length - 1);
    if (p1_factor.rows() != dim || p1_factor.cols() != dim) throw DimensionMismatch("ChainParams: P1");
    if (!prior_transitions && (a.size() != steps || b.size() != steps || s_factor.size() != steps)) {
      throw DimensionMismatch("ChainParams: transition lists must have T-1 entries");
    }
    if (chunk_mean.size() + 1 < static_cast<std::size_t>(num_chunks) ||
        chunk_factor.size() != chunk_mean.size()) {
      throw DimensionMismatch("ChainParams: missing chunk-initial Gaussians");
    }
    for (const auto& s : s_factor) {
      for (Eigen::Index i = 0; i < s.rows(); ++i) {
        if (!(value_of(s(i, i)) > 0.0)) throw NotPositiveDefinite("ChainParams: S_t");
      }
    }
  }
};

/// PR-SSM configuration: transitions equal the prior N(f(x_t), Q) and q(x_1)
/// equals p(x_1) = N(0, I).
ChainParams<double> prssm_chain(Eigen::Index length, const PsdMatrix& q);

template <class S>
struct TransitionMoments {
  Vector<S> mean;
  Matrix<S> cov_factor;
};

/// Extra inputs some variants need at a step.
template <class S>
struct TransitionContext {
  const PreparedInducing<S>* u = nullptr;  // UFactorised
  const Vector<S>* f = nullptr;            // NonFactorised, PrSsm: drawn f(x_t)
  const Matrix<S>* q_factor = nullptr;     // PrSsm
};

/// Gaussian q(x_{t+1} | ., x_t) for the variant's row.
template <class S>
TransitionMoments<S> transition_moments(Variant variant, Eigen::Index t, const Vector<S>& x,
                                        const ChainParams<S>& chain, const SparseGp<S>& gp,
                                        const TransitionContext<S>& ctx) {
  auto inflate = [&](const Vector<S>& fvar) {
    const Matrix<S>& a = chain.a_at(t);
    const Matrix<S>& s = chain.s_at(t);
    Matrix<S> cov = s * s.transpose();
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
      for (Eigen::Index j = 0; j < cov.cols(); ++j)
        for (Eigen::Index k = 0; k < fvar.size(); ++k) cov(i, j) += a(i, k) * fvar(k) * a(j, k);
    return cholesky_lower(cov);
  };
  const std::span<const S> xs(x.data(), static_cast<std::size_t>(x.size()));
  switch (variant) {
    case Variant::FactorisedLinear:
      return {chain.a_at(t) * x + chain.b_at(t), chain.s_at(t)};
    case Variant::FactorisedNonlinear: {
      const DiagMoments<S> m = gp.predict_marginal(xs);
      return {chain.a_at(t) * m.mean + chain.b_at(t), inflate(m.var)};
    }
    case Variant::UFactorised: {
      if (ctx.u == nullptr) throw MissingContext("UFactorised transition needs an inducing draw");
      const DiagMoments<S> m = gp.conditional_given_u(*ctx.u, xs);
      return {chain.a_at(t) * m.mean + chain.b_at(t), inflate(m.var)};
    }
    case Variant::NonFactorised:
      if (ctx.f == nullptr) throw MissingContext("NonFactorised transition needs f(x_t)");
      return {chain.a_at(t) * (*ctx.f) + chain.b_at(t), chain.s_at(t)};
    case Variant::PrSsm:
      if (ctx.f == nullptr || ctx.q_factor == nullptr) {
        throw MissingContext("PrSsm transition needs f(x_t) and Q");
      }
      return {*ctx.f, *ctx.q_factor};
  }
  throw std::logic_error("unknown variant");
}

/// One drawn trajectory. Rows of x (and f) belonging to chunks that were not
/// drawn are NaN.
template <class S>
struct TrajectorySample {
  Variant variant = Variant::FactorisedLinear;
  Matrix<S> x;               // T x D
  Matrix<S> f;               // (T-1) x D; empty for FactorisedLinear
  Matrix<S> u;               // M x Dout; empty unless draws_inducing
  ChunkScheme scheme;
  std::vector<char> drawn;   // per chunk
  std::vector<double> base_noise;
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;
};

/// Per-chunk Monte Carlo terms: log-likelihood of the chunk's observations and
/// the transition KLs of every step leaving a state of the chunk (including
/// the step into the next chunk's explicit initial state).
template <class S>
struct ChunkTerms {
  S loglik = 0.0;
  S transition_kl = 0.0;
};

/// Observation side needed to accumulate ChunkTerms during sampling.
template <class S>
struct Observations {
  const MatrixD* y = nullptr;
  const MatrixD* c = nullptr;
  const VectorD* d = nullptr;
  Matrix<S> r_factor;
};

struct SamplingOptions {
  /// Keep conditioner sites across chunk boundaries instead of resetting to
  /// (Z, u). Only valid when every chunk is drawn.
  bool retain_sites = false;
};

template <class S>
class TrajectorySampler {
 public:
  TrajectorySampler(Variant variant, const ChainParams<S>& chain, const SparseGp<S>& gp,
                    const Matrix<S>& q_factor)
      : variant_(variant), chain_(chain), gp_(gp), q_factor_(q_factor) {
    if (chain_.prior_transitions != (variant_ == Variant::PrSsm)) {
      throw std::invalid_argument("PrSsm requires a prior-transition chain and vice versa");
    }
  }

  /// Unchunked forward sampling of T states.
  TrajectorySample<S> sample(Eigen::Index length, const NoiseStream& noise) const {
    chain_.validate(length, 1);
    TrajectorySample<S> out = empty_sample(ChunkScheme::single(length), noise);
    out.drawn.assign(1, 1);
    const std::optional<PreparedInducing<S>> u = draw_inducing(noise, out);
    std::optional<SequentialConditioner<S>> cond;
    if (uses_conditioner(variant_)) cond.emplace(gp_, *u);

    Vector<S> x = initial(0, noise, out);
    out.x.row(0) = x.transpose();
    for (Eigen::Index t = 0; t + 1 < length; ++t) {
      x = advance(t, x, u, cond, noise, out, nullptr);
      out.x.row(t + 1) = x.transpose();
    }
    return out;
  }

  /// Chunked sampling. Each chunk starts from its explicit initial Gaussian
  /// and the conditioner restarts from (Z, u). When `chunks` is non-empty only
  /// those chunks are drawn. With `obs`, per-chunk terms are accumulated
  /// into `terms` (indexed by chunk).
  TrajectorySample<S> sample_chunked(const ChunkScheme& scheme, const NoiseStream& noise,
                                     std::span<const Eigen::Index> chunks = {},
                                     const SamplingOptions& options = {},
                                     const Observations<S>* obs = nullptr,
                                     std::vector<ChunkTerms<S>>* terms = nullptr) const {
    scheme.validate();
    chain_.validate(scheme.length, scheme.num_chunks());
    TrajectorySample<S> out = empty_sample(scheme, noise);
    std::vector<Eigen::Index> selected(chunks.begin(), chunks.end());
    if (selected.empty()) {
      for (Eigen::Index c = 0; c < scheme.num_chunks(); ++c) selected.push_back(c);
    }
    if (options.retain_sites && static_cast<Eigen::Index>(selected.size()) != scheme.num_chunks()) {
      throw std::invalid_argument("retain_sites requires every chunk to be drawn");
    }
    out.drawn.assign(static_cast<std::size_t>(scheme.num_chunks()), 0);
    if (terms != nullptr) terms->assign(static_cast<std::size_t>(scheme.num_chunks()), ChunkTerms<S>{});

    const std::optional<PreparedInducing<S>> u = draw_inducing(noise, out);
    std::optional<SequentialConditioner<S>> cond;
    StepKl kl(*this, obs != nullptr);

    for (const Eigen::Index c : selected) {
      if (c < 0 || c >= scheme.num_chunks()) throw std::out_of_range("sample_chunked: chunk index");
      out.drawn[static_cast<std::size_t>(c)] = 1;
      if (uses_conditioner(variant_)) {
        if (!cond) {
          cond.emplace(gp_, *u);
        } else if (!options.retain_sites) {
          cond->reset();
        }
      }
      ChunkTerms<S>* sink = terms != nullptr ? &(*terms)[static_cast<std::size_t>(c)] : nullptr;
      const Eigen::Index begin = scheme.begin(c);
      const Eigen::Index end = scheme.end(c);

      Vector<S> x = initial(c, noise, out);
      out.x.row(begin) = x.transpose();
      if (sink != nullptr) sink->loglik += loglik(*obs, begin, x);
      for (Eigen::Index t = begin; t + 1 < end; ++t) {
        x = advance(t, x, u, cond, noise, out, sink != nullptr ? &kl : nullptr, sink);
        out.x.row(t + 1) = x.transpose();
        if (sink != nullptr) sink->loglik += loglik(*obs, t + 1, x);
      }
      if (c + 1 < scheme.num_chunks()) {
        // Step into the next chunk: q is that chunk's explicit initial state.
        const Eigen::Index t = end - 1;
        const std::size_t k = static_cast<std::size_t>(c);
        const TransitionMoments<S> q{chain_.chunk_mean[k], chain_.chunk_factor[k]};
        const FInfo info = function_at(t, x, u, cond, noise, out, sink != nullptr);
        if (sink != nullptr) sink->transition_kl += kl(q, info);
      }
    }
    return out;
  }

  Variant variant() const { return variant_; }

 private:
  // What is known about f(x_t): exact moments (rows 1-3) or a draw (rows 4-5).
  struct FInfo {
    std::optional<DiagMoments<S>> moments;
    std::optional<Vector<S>> draw;
  };

  class StepKl {
   public:
    StepKl(const TrajectorySampler& s, bool active) : s_(s) {
      if (!active) return;
      const Eigen::Index dim = s.q_factor_.rows();
      const Matrix<S> inv = solve_lower(s.q_factor_, lift<S>(MatrixD(MatrixD::Identity(dim, dim))));
      q_inv_diag_ = Vector<S>(dim);
      for (Eigen::Index d = 0; d < dim; ++d) {
        const Vector<S> col = inv.col(d);
        q_inv_diag_(d) = sum_squares(col);
      }
    }

    /// E_f KL(q || N(f, Q)) with f known in distribution or drawn.
    S operator()(const TransitionMoments<S>& q, const FInfo& info) const {
      if (info.draw) return gauss_kl(q.mean, q.cov_factor, *info.draw, s_.q_factor_);
      const DiagMoments<S>& m = *info.moments;
      S trace = 0.0;
      for (Eigen::Index d = 0; d < m.var.size(); ++d) trace += m.var(d) * q_inv_diag_(d);
      return gauss_kl(q.mean, q.cov_factor, m.mean, s_.q_factor_) + 0.5 * trace;
    }

   private:
    const TrajectorySampler& s_;
    Vector<S> q_inv_diag_;
  };

  TrajectorySample<S> empty_sample(const ChunkScheme& scheme, const NoiseStream& noise) const {
    const Eigen::Index dim = chain_.state_dim();
    TrajectorySample<S> out;
    out.variant = variant_;
    out.scheme = scheme;
    out.seed = noise.seed();
    out.sample = noise.sample();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.x = Matrix<S>::Constant(scheme.length, dim, S(nan));
    if (variant_ != Variant::FactorisedLinear) out.f = Matrix<S>::Constant(scheme.length - 1, dim, S(nan));
    return out;
  }

  std::optional<PreparedInducing<S>> draw_inducing(const NoiseStream& noise, TrajectorySample<S>& out) const {
    if (!draws_inducing(variant_)) return std::nullopt;
    const auto& q = gp_.posterior();
    MatrixD e(q.num_inducing(), q.output_dim());
    for (Eigen::Index i = 0; i < e.rows(); ++i)
      for (Eigen::Index d = 0; d < e.cols(); ++d) {
        e(i, d) = noise.normal(NoiseTag::Inducing, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(d));
        out.base_noise.push_back(e(i, d));
      }
    out.u = gp_.sample_u(e);
    return gp_.prepare(out.u);
  }

  Vector<S> initial(Eigen::Index chunk, const NoiseStream& noise, TrajectorySample<S>& out) const {
    const Eigen::Index begin = out.scheme.begin(chunk);
    const VectorD e = noise.normals(NoiseTag::InitialState, static_cast<std::uint64_t>(begin), chain_.state_dim());
    out.base_noise.insert(out.base_noise.end(), e.data(), e.data() + e.size());
    if (chunk == 0) return affine_transform(chain_.m1, chain_.p1_factor, e);
    const std::size_t k = static_cast<std::size_t>(chunk - 1);
    return affine_transform(chain_.chunk_mean[k], chain_.chunk_factor[k], e);
  }

  FInfo function_at(Eigen::Index t, const Vector<S>& x, const std::optional<PreparedInducing<S>>& u,
                    std::optional<SequentialConditioner<S>>& cond, const NoiseStream& noise,
                    TrajectorySample<S>& out, bool need_moments) const {
    const std::span<const S> xs(x.data(), static_cast<std::size_t>(x.size()));
    FInfo info;
    switch (variant_) {
      case Variant::FactorisedLinear:
        if (need_moments) info.moments = gp_.predict_marginal(xs);
        break;
      case Variant::FactorisedNonlinear:
        info.moments = gp_.predict_marginal(xs);
        out.f.row(t) = info.moments->mean.transpose();
        break;
      case Variant::UFactorised:
        info.moments = gp_.conditional_given_u(*u, xs);
        out.f.row(t) = info.moments->mean.transpose();
        break;
      case Variant::NonFactorised:
      case Variant::PrSsm: {
        const VectorD e = noise.normals(NoiseTag::Function, static_cast<std::uint64_t>(t), gp_.posterior().output_dim());
        out.base_noise.insert(out.base_noise.end(), e.data(), e.data() + e.size());
        info.draw = cond->extend(xs, e);
        out.f.row(t) = info.draw->transpose();
        break;
      }
    }
    return info;
  }

  Vector<S> advance(Eigen::Index t, const Vector<S>& x, const std::optional<PreparedInducing<S>>& u,
                    std::optional<SequentialConditioner<S>>& cond, const NoiseStream& noise,
                    TrajectorySample<S>& out, const StepKl* kl, ChunkTerms<S>* sink = nullptr) const {
    const FInfo info = function_at(t, x, u, cond, noise, out, kl != nullptr);
    const Eigen::Index dim = chain_.state_dim();
    TransitionMoments<S> q;
    switch (variant_) {
      case Variant::FactorisedLinear:
        q = {chain_.a_at(t) * x + chain_.b_at(t), chain_.s_at(t)};
        break;
      case Variant::FactorisedNonlinear:
      case Variant::UFactorised:
        q = {chain_.a_at(t) * info.moments->mean + chain_.b_at(t), inflated(t, info.moments->var)};
        break;
      case Variant::NonFactorised:
        q = {chain_.a_at(t) * (*info.draw) + chain_.b_at(t), chain_.s_at(t)};
        break;
      case Variant::PrSsm:
        q = {*info.draw, q_factor_};
        break;
    }
    const VectorD e = noise.normals(NoiseTag::Transition, static_cast<std::uint64_t>(t), dim);
    out.base_noise.insert(out.base_noise.end(), e.data(), e.data() + e.size());
    if (kl != nullptr && sink != nullptr && variant_ != Variant::PrSsm) sink->transition_kl += (*kl)(q, info);
    return affine_transform(q.mean, q.cov_factor, e);
  }

  Matrix<S> inflated(Eigen::Index t, const Vector<S>& fvar) const {
    const Matrix<S>& a = chain_.a_at(t);
    const Matrix<S>& s = chain_.s_at(t);
    Matrix<S> cov = s * s.transpose();
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
      for (Eigen::Index j = 0; j < cov.cols(); ++j)
        for (Eigen::Index k = 0; k < fvar.size(); ++k) cov(i, j) += a(i, k) * fvar(k) * a(j, k);
    return cholesky_lower(cov);
  }

  S loglik(const Observations<S>& obs, Eigen::Index t, const Vector<S>& x) const {
    const Vector<S> y = lift<S>(VectorD(obs.y->row(t).transpose()));
    const Vector<S> mean = lift<S>(*obs.c) * x + lift<S>(*obs.d);
    return mvn_logpdf(y, mean, obs.r_factor);
  }

  Variant variant_;
  const ChainParams<S>& chain_;
  const SparseGp<S>& gp_;
  const Matrix<S>& q_factor_;
};

}  // namespace gpssm

#endif  // GPSSM_POSTERIOR_HPP
