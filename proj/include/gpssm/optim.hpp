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

#ifndef GPSSM_OPTIM_HPP
#define GPSSM_OPTIM_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpssm/elbo.hpp"

namespace gpssm {

/// Sizes that determine the flat parameter layout.
struct ModelShape {
  Eigen::Index length = 2;
  Eigen::Index state_dim = 1;
  Eigen::Index obs_dim = 1;
  Eigen::Index num_inducing = 1;
  Eigen::Index num_chunks = 1;
  bool tied = false;
  bool full_s = false;
  bool prior_transitions = false;
  /// q(u) stored as N(m, S S^T) over v with u = L_ZZ v.
  bool whiten = false;

  Eigen::Index transition_count() const {
    if (prior_transitions) return 0;
    return tied ? 1 : length - 1;
  }
};

/// How a slice of the flat vector maps to model parameters.
enum class Constraint {
  None,          // copied as is
  Log,           // positive scalars: exp
  LowerLogDiag,  // packed lower factors, diagonal through exp
  LogDiag,       // diagonal factors: exp
};

struct Slice {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  Constraint constraint = Constraint::None;
};

class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const ModelShape& shape);

  const ModelShape& shape() const { return shape_; }
  const std::vector<Slice>& slices() const { return slices_; }
  const Slice& slice(const std::string& name) const;
  std::size_t size() const { return size_; }
  /// Name of the slice containing flat coordinate `index`.
  const std::string& name_of(std::size_t index) const;

  VectorD pack(const ModelParams<double>& params) const;

  template <class S>
  ModelParams<S> unpack(std::span<const S> flat) const;

 private:
  void add(const std::string& name, std::size_t size, Constraint c);

  ModelShape shape_;
  std::vector<Slice> slices_;
  std::size_t size_ = 0;
};

struct ParamVector {
  VectorD flat;
  ParamLayout layout;
};

ParamVector pack(const ModelParams<double>& params, const ModelShape& shape);
ModelParams<double> unpack(const ParamVector& pv);

class NumericalBreakdown : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Divergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradientResult {
  ElboEstimate estimate;
  VectorD gradient;
};

/// Exact gradient of the frozen-noise bound estimate with respect to the flat
/// vector, by reverse-mode differentiation. Global KL terms are taped once;
/// each trajectory sample gets its own tape.
GradientResult grad_elbo(const ParamVector& pv, const Problem& problem, const ElboConfig& config);

/// Central difference of the frozen-noise bound along one coordinate, with
/// step h * max(1, |theta_i|).
double fd_gradient(const ParamVector& pv, const Problem& problem, const ElboConfig& config,
                   std::size_t coordinate, double h = 1e-5);

struct FitConfig {
  int iterations = 3000;
  double step_size = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int samples = 10;
  std::uint64_t seed = 0;
  Eigen::Index num_inducing = 20;
  std::optional<Eigen::Index> chunk_length;
  /// Chunks per iteration; 0 evaluates every chunk.
  int minibatch_chunks = 0;
  bool retain_sites = false;
  bool tied = false;
  bool full_s = false;
  double q_init = 0.1;
  double sigma_u_init = 0.1;
  bool whiten = true;
  /// Initial inducing means: "regression" (GP fit of y_{t+1} on y_t) or
  /// "identity" (mu_u = Z).
  std::string mu_init = "identity";
  std::set<std::string> frozen{"noise.R"};
  Execution execution = Execution::Parallel;
};

struct TraceEntry {
  int iteration = 0;
  ElboEstimate estimate;
  double grad_norm = 0.0;
  double step_norm = 0.0;
};

struct FitResult {
  ParamVector best;
  ParamVector last;
  int best_iteration = -1;
  std::vector<TraceEntry> trace;
};

ModelShape model_shape(const Problem& problem, const FitConfig& config);

/// Starting point: mu_u = Z (or a GP regression of y_{t+1} on y_t), Sigma_u =
/// sigma_u_init * K_ZZ, chain anchored to the observations (A_t = 0,
/// b_t = y_{t+1}), Q = q_init * I.
ModelParams<double> initial_params(const Problem& problem, const PsdMatrix& r, const FitConfig& config);

Problem make_problem(const Dataset& data, const EmissionModel& emission, Variant variant);

/// Stochastic ascent on the bound with bias-corrected adaptive moments.
/// Returns the parameters with the highest estimate seen and the full trace.
FitResult fit(const Dataset& data, const EmissionModel& emission, Variant variant, const FitConfig& config);

/// Writes `iter,elbo,loglik,kl_u,kl_x1,trans_kl,stderr,grad_norm`.
void write_trace(const std::vector<TraceEntry>& trace, const std::filesystem::path& path);

// ---------------------------------------------------------------------------

template <class S>
ModelParams<S> ParamLayout::unpack(std::span<const S> flat) const {
  if (flat.size() != size_) throw DimensionMismatch("unpack: flat vector size does not match layout");
  using std::exp;
  const ModelShape& sh = shape_;
  const Eigen::Index dim = sh.state_dim;
  const Eigen::Index m = sh.num_inducing;
  const auto tri = [](Eigen::Index n) { return static_cast<std::size_t>(n * (n + 1) / 2); };
  auto at = [&](const std::string& name) { return flat.subspan(slice(name).offset, slice(name).size); };

  ModelParams<S> p;
  {
    auto v = at("kernel.variance");
    auto l = at("kernel.lengthscales");
    p.inducing.kernel.variance = exp(v[0]);
    p.inducing.kernel.lengthscales = Vector<S>(dim);
    for (Eigen::Index d = 0; d < dim; ++d) p.inducing.kernel.lengthscales(d) = exp(l[static_cast<std::size_t>(d)]);
  }
  {
    auto z = at("inducing.z");
    p.inducing.z = Matrix<S>(m, dim);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index d = 0; d < dim; ++d) p.inducing.z(i, d) = z[static_cast<std::size_t>(i * dim + d)];
    auto mu = at("inducing.mu");
    p.inducing.mu = Matrix<S>(m, dim);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index d = 0; d < dim; ++d) p.inducing.mu(i, d) = mu[static_cast<std::size_t>(i * dim + d)];
    auto sig = at("inducing.sigma");
    for (Eigen::Index d = 0; d < dim; ++d) {
      p.inducing.sigma_factor.push_back(
          unpack_log_diag_lower(sig.subspan(static_cast<std::size_t>(d) * tri(m), tri(m)), m));
    }
    if (sh.whiten) {
      const Matrix<S> l = factorize(kern_gram(p.inducing.z, p.inducing.kernel)).lower;
      p.inducing.mu = (l * p.inducing.mu).eval();
      for (auto& f : p.inducing.sigma_factor) f = lower_product(l, f);
    }
  }
  {
    auto m1 = at("x1.mean");
    p.chain.m1 = Vector<S>(dim);
    for (Eigen::Index d = 0; d < dim; ++d) p.chain.m1(d) = m1[static_cast<std::size_t>(d)];
    p.chain.p1_factor = unpack_log_diag_lower(at("x1.cov"), dim);
  }
  p.chain.tied = sh.tied;
  p.chain.prior_transitions = sh.prior_transitions;
  {
    auto a = at("chain.A");
    auto b = at("chain.b");
    auto s = at("chain.S");
    const std::size_t s_width = sh.full_s ? tri(dim) : static_cast<std::size_t>(dim);
    for (Eigen::Index k = 0; k < sh.transition_count(); ++k) {
      Matrix<S> ak(dim, dim);
      Vector<S> bk(dim);
      for (Eigen::Index i = 0; i < dim; ++i) {
        bk(i) = b[static_cast<std::size_t>(k * dim + i)];
        for (Eigen::Index j = 0; j < dim; ++j) ak(i, j) = a[static_cast<std::size_t>((k * dim + i) * dim + j)];
      }
      auto sk = s.subspan(static_cast<std::size_t>(k) * s_width, s_width);
      Matrix<S> sf;
      if (sh.full_s) {
        sf = unpack_log_diag_lower(sk, dim);
      } else {
        sf = Matrix<S>::Zero(dim, dim);
        for (Eigen::Index i = 0; i < dim; ++i) sf(i, i) = exp(sk[static_cast<std::size_t>(i)]);
      }
      p.chain.a.push_back(std::move(ak));
      p.chain.b.push_back(std::move(bk));
      p.chain.s_factor.push_back(std::move(sf));
    }
  }
  p.q_factor = unpack_log_diag_lower(at("noise.Q"), dim);
  p.r_factor = unpack_log_diag_lower(at("noise.R"), sh.obs_dim);
  {
    auto cm = at("chunk.mean");
    auto cc = at("chunk.cov");
    for (Eigen::Index c = 0; c + 1 < sh.num_chunks; ++c) {
      Vector<S> mean(dim);
      for (Eigen::Index d = 0; d < dim; ++d) mean(d) = cm[static_cast<std::size_t>(c * dim + d)];
      p.chain.chunk_mean.push_back(std::move(mean));
      p.chain.chunk_factor.push_back(unpack_log_diag_lower(cc.subspan(static_cast<std::size_t>(c) * tri(dim), tri(dim)), dim));
    }
  }
  return p;
}

}  // namespace gpssm

#endif  // GPSSM_OPTIM_HPP
