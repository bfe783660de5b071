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

// Inducing-point variational GP q(f) = p(f | u) q(u), one independent GP per
// output dimension with shared kernel hyperparameters.

#ifndef GPSSM_SPARSE_GP_HPP
#define GPSSM_SPARSE_GP_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "gpssm/gauss.hpp"
#include "gpssm/kernel.hpp"

namespace gpssm {

template <class S>
struct InducingPosterior {
  Matrix<S> z;                          // M x D inducing inputs
  Matrix<S> mu;                         // M x Dout variational means
  std::vector<Matrix<S>> sigma_factor;  // Dout lower factors of Sigma_u, M x M
  RbfParams<S> kernel;

  Eigen::Index num_inducing() const { return z.rows(); }
  Eigen::Index input_dim() const { return z.cols(); }
  Eigen::Index output_dim() const { return mu.cols(); }

  void validate() const {
    kernel.validate();
    if (z.cols() != kernel.dim()) throw DimensionMismatch("InducingPosterior: Z width != kernel dim");
    if (mu.rows() != z.rows()) throw DimensionMismatch("InducingPosterior: mu rows != M");
    if (static_cast<Eigen::Index>(sigma_factor.size()) != mu.cols()) {
      throw DimensionMismatch("InducingPosterior: one Sigma_u factor per output required");
    }
    for (const auto& l : sigma_factor) {
      if (l.rows() != z.rows() || l.cols() != z.rows()) {
        throw DimensionMismatch("InducingPosterior: Sigma_u factor must be M x M");
      }
      for (Eigen::Index i = 0; i < l.rows(); ++i) {
        if (!(value_of(l(i, i)) > 0.0)) throw NotPositiveDefinite("InducingPosterior: Sigma_u factor");
      }
    }
  }
};

/// Per-output mean and variance; outputs are independent.
template <class S>
struct DiagMoments {
  Vector<S> mean;
  Vector<S> var;
};

/// Inducing values u together with L^{-1} u_d for each output, where
/// L L^T = K_ZZ.
template <class S>
struct PreparedInducing {
  Matrix<S> u;
  std::vector<Vector<S>> whitened;
};

/// Minimum pairwise separation enforced between inducing inputs.
inline constexpr double kMinInducingSeparation = 1e-6;

/// Nudges duplicate inducing inputs apart so every pair is at least
/// kMinInducingSeparation apart in the max norm.
MatrixD separate_duplicates(MatrixD z);

/// Factorized K_ZZ plus the derived quantities every prediction reuses.
template <class S>
class SparseGp {
 public:
  /// `with_marginals = false` skips the O(M^3) whitening of Sigma_u; only
  /// conditional_given_u and sampling are then available.
  explicit SparseGp(InducingPosterior<S> q, bool with_marginals = true,
                    const JitterPolicy& policy = {})
      : q_(std::move(q)), with_marginals_(with_marginals) {
    q_.validate();
    kzz_ = factorize(kern_gram(q_.z, q_.kernel), policy);
    if (!with_marginals_) return;
    for (Eigen::Index d = 0; d < q_.output_dim(); ++d) {
      const Vector<S> mu_d = q_.mu.col(d);
      whitened_mu_.push_back(solve_lower(kzz_.lower, mu_d));
      // B = L^{-1} L_Sigma is lower-triangular; keep B^T row-major for Bt * a.
      whitened_sigma_t_.push_back(
          solve_lower_triangular(kzz_.lower, q_.sigma_factor[static_cast<std::size_t>(d)]).transpose());
    }
  }

  const InducingPosterior<S>& posterior() const { return q_; }
  const Matrix<S>& kzz_factor() const { return kzz_.lower; }

  /// Applies `f` to every stored scalar, in a fixed order.
  template <class F>
  void visit_scalars(F&& f) {
    f(q_.kernel.variance);
    visit_all(q_.kernel.lengthscales, f);
    visit_all(q_.z, f);
    visit_all(q_.mu, f);
    for (auto& m : q_.sigma_factor) visit_all(m, f);
    visit_all(kzz_.lower, f);
    for (auto& v : whitened_mu_) visit_all(v, f);
    for (auto& m : whitened_sigma_t_) visit_all(m, f);
  }
  double jitter() const { return kzz_.jitter; }

  /// L^{-1} k(Z, x)
  Vector<S> whitened_cross(std::span<const S> x) const {
    return solve_lower(kzz_.lower, kern_vector(q_.z, x, q_.kernel));
  }

  /// Marginal of q(f(x)): mean K_xZ K_ZZ^{-1} mu_u and variance
  /// K_xx + K_xZ K_ZZ^{-1} (Sigma_u - K_ZZ) K_ZZ^{-1} K_Zx.
  DiagMoments<S> predict_marginal(std::span<const S> x) const {
    require_marginals();
    const Vector<S> a = whitened_cross(x);
    const S explained = sum_squares(a);
    const Eigen::Index m = a.size();
    const Eigen::Index dout = q_.output_dim();
    DiagMoments<S> out{Vector<S>(dout), Vector<S>(dout)};
    for (Eigen::Index d = 0; d < dout; ++d) {
      const auto& mu_w = whitened_mu_[static_cast<std::size_t>(d)];
      out.mean(d) = -dot_sub(S(0.0), head(a, m), head(mu_w, m));
      const Matrix<S>& bt = whitened_sigma_t_[static_cast<std::size_t>(d)];
      Vector<S> v(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        const std::size_t len = static_cast<std::size_t>(m - j);
        v(j) = -dot_sub(S(0.0), std::span<const S>(bt.data() + j * m + j, len),
                        std::span<const S>(a.data() + j, len));
      }
      out.var(d) = q_.kernel.variance - explained + sum_squares(v);
    }
    return out;
  }

  PreparedInducing<S> prepare(const Matrix<S>& u) const {
    if (u.rows() != q_.num_inducing() || u.cols() != q_.output_dim()) {
      throw DimensionMismatch("prepare: u must be M x Dout");
    }
    PreparedInducing<S> p{u, {}};
    for (Eigen::Index d = 0; d < u.cols(); ++d) {
      const Vector<S> col = u.col(d);
      p.whitened.push_back(solve_lower(kzz_.lower, col));
    }
    return p;
  }

  /// Moments of f(x) | u: mean K_xZ K_ZZ^{-1} u, variance K_xx - K_xZ K_ZZ^{-1} K_Zx.
  DiagMoments<S> conditional_given_u(const PreparedInducing<S>& u, std::span<const S> x) const {
    const Vector<S> a = whitened_cross(x);
    const Eigen::Index m = a.size();
    const Eigen::Index dout = q_.output_dim();
    DiagMoments<S> out{Vector<S>(dout), Vector<S>::Constant(dout, q_.kernel.variance - sum_squares(a))};
    for (Eigen::Index d = 0; d < dout; ++d) {
      out.mean(d) = -dot_sub(S(0.0), head(a, m), head(u.whitened[static_cast<std::size_t>(d)], m));
    }
    return out;
  }

  /// Draws u = mu_u + L_Sigma * noise per output; noise is M x Dout.
  Matrix<S> sample_u(const MatrixD& noise) const {
    if (noise.rows() != q_.num_inducing() || noise.cols() != q_.output_dim()) {
      throw DimensionMismatch("sample_u: noise must be M x Dout");
    }
    Matrix<S> u(noise.rows(), noise.cols());
    for (Eigen::Index d = 0; d < noise.cols(); ++d) {
      const Vector<S> mu_d = q_.mu.col(d);
      const VectorD e = noise.col(d);
      u.col(d) = affine_transform(mu_d, q_.sigma_factor[static_cast<std::size_t>(d)], e);
    }
    return u;
  }

  /// Sum over outputs of KL(N(mu_d, Sigma_d) || N(0, K_ZZ)), reusing the
  /// whitened factors.
  S kl_u() const {
    require_marginals();
    const Eigen::Index m = q_.num_inducing();
    S total = 0.0;
    const S logdet_k = log_det_from_factor(kzz_.lower);
    for (Eigen::Index d = 0; d < q_.output_dim(); ++d) {
      const Matrix<S>& bt = whitened_sigma_t_[static_cast<std::size_t>(d)];
      S trace = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        trace += sum_squares(std::span<const S>(bt.data() + j * m + j, static_cast<std::size_t>(m - j)));
      }
      const S maha = sum_squares(whitened_mu_[static_cast<std::size_t>(d)]);
      total += 0.5 * (trace + maha - static_cast<double>(m) + logdet_k -
                      log_det_from_factor(q_.sigma_factor[static_cast<std::size_t>(d)]));
    }
    return total;
  }

 private:
  template <class M, class F>
  static void visit_all(M& m, F& f) {
    for (Eigen::Index i = 0; i < m.size(); ++i) f(m.data()[i]);
  }

  void require_marginals() const {
    if (!with_marginals_) throw std::logic_error("SparseGp built without marginal support");
  }

  InducingPosterior<S> q_;
  bool with_marginals_;
  Factor<S> kzz_;
  std::vector<Vector<S>> whitened_mu_;
  std::vector<Matrix<S>> whitened_sigma_t_;
};

/// KL(q(u) || p(u)) summed over outputs, with p(u) = N(0, K_ZZ), evaluated
/// with the generic Gaussian KL.
template <class S>
S kl_u(const InducingPosterior<S>& q, const JitterPolicy& policy = {}) {
  q.validate();
  const Factor<S> kzz = factorize(kern_gram(q.z, q.kernel), policy);
  S total = 0.0;
  const Vector<S> zero = Vector<S>::Zero(q.num_inducing());
  for (Eigen::Index d = 0; d < q.output_dim(); ++d) {
    const Vector<S> mu_d = q.mu.col(d);
    total += gauss_kl(mu_d, q.sigma_factor[static_cast<std::size_t>(d)], zero, kzz.lower);
  }
  return total;
}

/// Exact sequential sampling of GP function values. Seeded with the inducing
/// sites and a draw u; every extension conditions on all stored sites with
/// one O(n^2) rank-1 growth of the triangular factor. The factor is packed by
/// rows, and L^{-1} f is maintained per output so that the predictive mean is
/// a single dot product.
template <class S>
class SequentialConditioner {
 public:
  SequentialConditioner(const SparseGp<S>& gp, const PreparedInducing<S>& u)
      : kernel_(gp.posterior().kernel),
        dim_(gp.posterior().input_dim()),
        base_sites_(gp.posterior().num_inducing()) {
    const auto& z = gp.posterior().z;
    sites_.assign(z.data(), z.data() + z.size());
    const Matrix<S>& l = gp.kzz_factor();
    for (Eigen::Index i = 0; i < l.rows(); ++i)
      for (Eigen::Index j = 0; j <= i; ++j) factor_.push_back(l(i, j));
    for (const auto& w : u.whitened) whitened_.emplace_back(w.data(), w.data() + w.size());
    base_factor_size_ = factor_.size();
  }

  Eigen::Index num_sites() const { return static_cast<Eigen::Index>(sites_.size()) / dim_; }
  Eigen::Index base_sites() const { return base_sites_; }
  Eigen::Index output_dim() const { return static_cast<Eigen::Index>(whitened_.size()); }
  double last_jitter() const { return last_jitter_; }

  /// Predictive moments of f(x) given every stored site, without the nugget.
  DiagMoments<S> predict(std::span<const S> x) const {
    const Vector<S> l = whitened_cross(x);
    const Eigen::Index dout = output_dim();
    DiagMoments<S> out{Vector<S>(dout), Vector<S>::Constant(dout, kernel_.variance - sum_squares(l))};
    for (Eigen::Index d = 0; d < dout; ++d) out.mean(d) = mean_at(l, d);
    return out;
  }

  /// Draws f(x) jointly with everything stored, then stores (x, f(x)).
  Vector<S> extend(std::span<const S> x, const VectorD& noise) {
    const Eigen::Index dout = output_dim();
    if (noise.size() != dout) throw DimensionMismatch("cond_extend: noise size != Dout");
    const Vector<S> l = whitened_cross(x);
    const S schur = kernel_.variance - sum_squares(l);
    const double s = value_of(schur);
    const double scale = value_of(kernel_.variance);
    double level = -1.0;
    for (double j = 1e-9; j <= 1e-3 * (1.0 + 1e-12); j *= 10.0) {
      if (s > -0.5 * j * scale) {
        level = j;
        break;
      }
    }
    if (level < 0.0 || !std::isfinite(s)) {
      throw NotPositiveDefinite("cond_extend: Schur complement " + std::to_string(s) +
                                " not recoverable with jitter");
    }
    last_jitter_ = level * scale;
    using std::sqrt;
    const S diag = sqrt(schur + level * kernel_.variance);

    Vector<S> f(dout);
    for (Eigen::Index d = 0; d < dout; ++d) f(d) = mean_at(l, d) + diag * noise(d);

    sites_.insert(sites_.end(), x.begin(), x.end());
    factor_.insert(factor_.end(), l.data(), l.data() + l.size());
    factor_.push_back(diag);
    // New entry of L^{-1} f is (f - l^T g) / diag, which is the noise itself.
    for (Eigen::Index d = 0; d < dout; ++d) whitened_[static_cast<std::size_t>(d)].push_back(S(noise(d)));
    return f;
  }

  /// Drops every site added since construction; keeps (Z, u).
  void reset() {
    sites_.resize(static_cast<std::size_t>(base_sites_ * dim_));
    factor_.resize(base_factor_size_);
    for (auto& w : whitened_) w.resize(static_cast<std::size_t>(base_sites_));
  }

 private:
  Vector<S> whitened_cross(std::span<const S> x) const {
    if (static_cast<Eigen::Index>(x.size()) != dim_) throw DimensionMismatch("conditioner: x size != D");
    const Eigen::Index n = num_sites();
    Vector<S> l(n);
    if constexpr (std::is_same_v<S, double>) {
      // Whole kernel row at once so exp vectorizes.
      const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> sites(
          sites_.data(), n, dim_);
      Eigen::ArrayXd r2 = Eigen::ArrayXd::Zero(n);
      for (Eigen::Index d = 0; d < dim_; ++d)
        r2 += ((sites.col(d).array() - x[static_cast<std::size_t>(d)]) / kernel_.lengthscales(d)).square();
      l = (kernel_.variance * (-0.5 * r2).exp()).matrix();
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        l(i) = kern(std::span<const S>(sites_.data() + i * dim_, static_cast<std::size_t>(dim_)), x, kernel_);
    }
    std::size_t row = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      l(i) = dot_sub(l(i), std::span<const S>(factor_.data() + row, static_cast<std::size_t>(i)), head(l, i)) /
             factor_[row + static_cast<std::size_t>(i)];
      row += static_cast<std::size_t>(i) + 1;
    }
    return l;
  }

  S mean_at(const Vector<S>& l, Eigen::Index d) const {
    const auto& g = whitened_[static_cast<std::size_t>(d)];
    return -dot_sub(S(0.0), head(l, l.size()), std::span<const S>(g.data(), g.size()));
  }

  RbfParams<S> kernel_;
  Eigen::Index dim_;
  Eigen::Index base_sites_;
  std::size_t base_factor_size_ = 0;
  std::vector<S> sites_;
  std::vector<S> factor_;
  std::vector<std::vector<S>> whitened_;
  double last_jitter_ = 0.0;
};

}  // namespace gpssm

#endif  // GPSSM_SPARSE_GP_HPP
