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

#include "gpssm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include <Eigen/QR>

#include "gpssm/ad.hpp"

namespace gpssm {
namespace {

std::size_t tri(Eigen::Index n) { return static_cast<std::size_t>(n * (n + 1) / 2); }

void pack_lower(const MatrixD& l, std::vector<double>& out) {
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) out.push_back(l(i, j));
    out.push_back(std::log(l(i, i)));
  }
}

std::uint64_t iteration_seed(std::uint64_t seed, int iteration) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(iteration) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

ParamLayout::ParamLayout(const ModelShape& shape) : shape_(shape) {
  const Eigen::Index dim = shape.state_dim;
  const auto d = static_cast<std::size_t>(dim);
  const auto m = static_cast<std::size_t>(shape.num_inducing);
  const auto steps = static_cast<std::size_t>(shape.transition_count());
  const auto extra = static_cast<std::size_t>(std::max<Eigen::Index>(shape.num_chunks - 1, 0));
  add("kernel.variance", 1, Constraint::Log);
  add("kernel.lengthscales", d, Constraint::Log);
  add("inducing.z", m * d, Constraint::None);
  add("inducing.mu", m * d, Constraint::None);
  add("inducing.sigma", d * tri(shape.num_inducing), Constraint::LowerLogDiag);
  add("x1.mean", d, Constraint::None);
  add("x1.cov", tri(dim), Constraint::LowerLogDiag);
  add("chain.A", steps * d * d, Constraint::None);
  add("chain.b", steps * d, Constraint::None);
  add("chain.S", steps * (shape.full_s ? tri(dim) : d), shape.full_s ? Constraint::LowerLogDiag : Constraint::LogDiag);
  add("noise.Q", tri(dim), Constraint::LowerLogDiag);
  add("noise.R", tri(shape.obs_dim), Constraint::LowerLogDiag);
  add("chunk.mean", extra * d, Constraint::None);
  add("chunk.cov", extra * tri(dim), Constraint::LowerLogDiag);
}

void ParamLayout::add(const std::string& name, std::size_t size, Constraint c) {
  slices_.push_back({name, size_, size, c});
  size_ += size;
}

const Slice& ParamLayout::slice(const std::string& name) const {
  for (const auto& s : slices_)
    if (s.name == name) return s;
  throw std::invalid_argument("unknown parameter slice: " + name);
}

const std::string& ParamLayout::name_of(std::size_t index) const {
  for (const auto& s : slices_)
    if (index >= s.offset && index < s.offset + s.size) return s.name;
  throw std::out_of_range("parameter index out of range");
}

VectorD ParamLayout::pack(const ModelParams<double>& p) const {
  const ModelShape& sh = shape_;
  const Eigen::Index dim = sh.state_dim;
  std::vector<double> out;
  out.reserve(size_);
  out.push_back(std::log(p.inducing.kernel.variance));
  for (Eigen::Index i = 0; i < dim; ++i) out.push_back(std::log(p.inducing.kernel.lengthscales(i)));
  for (Eigen::Index i = 0; i < sh.num_inducing; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) out.push_back(p.inducing.z(i, j));
  MatrixD mu = p.inducing.mu;
  std::vector<MatrixD> sigma = p.inducing.sigma_factor;
  if (sh.whiten) {
    const MatrixD l = factorize(kern_gram(p.inducing.z, p.inducing.kernel)).lower;
    mu = solve_lower(l, mu);
    for (auto& f : sigma) f = MatrixD(solve_lower(l, f)).triangularView<Eigen::Lower>();
  }
  for (Eigen::Index i = 0; i < sh.num_inducing; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) out.push_back(mu(i, j));
  for (const auto& l : sigma) pack_lower(l, out);
  for (Eigen::Index i = 0; i < dim; ++i) out.push_back(p.chain.m1(i));
  pack_lower(p.chain.p1_factor, out);
  const auto steps = static_cast<std::size_t>(sh.transition_count());
  if (p.chain.a.size() < steps || p.chain.b.size() < steps || p.chain.s_factor.size() < steps) {
    throw DimensionMismatch("pack: too few transition parameters");
  }
  for (std::size_t k = 0; k < steps; ++k)
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) out.push_back(p.chain.a[k](i, j));
  for (std::size_t k = 0; k < steps; ++k)
    for (Eigen::Index i = 0; i < dim; ++i) out.push_back(p.chain.b[k](i));
  for (std::size_t k = 0; k < steps; ++k) {
    const MatrixD& sf = p.chain.s_factor[k];
    if (sh.full_s) {
      pack_lower(sf, out);
    } else {
      for (Eigen::Index i = 0; i < dim; ++i) out.push_back(std::log(sf(i, i)));
    }
  }
  pack_lower(p.q_factor, out);
  pack_lower(p.r_factor, out);
  for (const auto& m : p.chain.chunk_mean)
    for (Eigen::Index i = 0; i < dim; ++i) out.push_back(m(i));
  for (const auto& l : p.chain.chunk_factor) pack_lower(l, out);
  if (out.size() != size_) throw DimensionMismatch("pack: parameters do not match the layout");
  return Eigen::Map<VectorD>(out.data(), static_cast<Eigen::Index>(out.size()));
}

ParamVector pack(const ModelParams<double>& params, const ModelShape& shape) {
  ParamLayout layout(shape);
  VectorD flat = layout.pack(params);
  return {std::move(flat), std::move(layout)};
}

ModelParams<double> unpack(const ParamVector& pv) {
  return pv.layout.unpack(std::span<const double>(pv.flat.data(), static_cast<std::size_t>(pv.flat.size())));
}

namespace {

template <class M, class F>
void visit_all(M& m, F& f) {
  for (Eigen::Index i = 0; i < m.size(); ++i) f(m.data()[i]);
}

template <class F>
void visit_scalars(ModelParams<ad::Var>& p, F&& f) {
  ChainParams<ad::Var>& c = p.chain;
  visit_all(c.m1, f);
  visit_all(c.p1_factor, f);
  for (auto& m : c.a) visit_all(m, f);
  for (auto& v : c.b) visit_all(v, f);
  for (auto& m : c.s_factor) visit_all(m, f);
  for (auto& v : c.chunk_mean) visit_all(v, f);
  for (auto& m : c.chunk_factor) visit_all(m, f);
  visit_all(p.q_factor, f);
  visit_all(p.r_factor, f);
}

}  // namespace

GradientResult grad_elbo(const ParamVector& pv, const Problem& problem, const ElboConfig& config) {
  if (config.samples < 1) throw std::invalid_argument("grad_elbo: samples must be >= 1");
  const std::size_t n = pv.layout.size();

  // Parameter transforms, the K_ZZ factorization and the global KL terms are
  // taped once. Each trajectory sample is taped separately on fresh leaves
  // bound to those values; its adjoints are then pushed back through the
  // global tape.
  ad::Tape global;
  ad::ScopedTape scope(global);
  std::vector<ad::Var> theta;
  theta.reserve(n);
  for (std::size_t i = 0; i < n; ++i) theta.push_back(global.variable(pv.flat(static_cast<Eigen::Index>(i))));
  ModelParams<ad::Var> p = pv.layout.unpack(std::span<const ad::Var>(theta));
  SparseGp<ad::Var> gp(std::move(p.inducing));
  const ad::Var ku = gp.kl_u();
  const ad::Var kx = kl_x1(p.chain);
  const ad::Var kl = ku + kx;

  std::vector<std::int32_t> bound_nodes;
  {
    const auto record = [&](ad::Var& v) {
      if (!v.is_constant()) bound_nodes.push_back(v.index());
    };
    ModelParams<ad::Var> cp = p;
    SparseGp<ad::Var> cgp = gp;
    visit_scalars(cp, record);
    cgp.visit_scalars(record);
  }

  const auto samples = static_cast<std::size_t>(config.samples);
  std::vector<SampleValue<double>> values(samples);
  std::vector<std::vector<double>> sample_adj(samples);
  for_each_index(samples, config.execution, [&](std::size_t s) {
    thread_local ad::Tape tape;
    tape.clear();
    ad::ScopedTape local(tape);
    ModelParams<ad::Var> lp = p;
    SparseGp<ad::Var> lgp = gp;
    const auto bind = [&](ad::Var& v) {
      if (!v.is_constant()) v = tape.variable(v.value());
    };
    visit_scalars(lp, bind);
    lgp.visit_scalars(bind);
    const SampleValue<ad::Var> v = sample_value(problem, lp, lgp, config, s);
    values[s] = {v.loglik.value(), v.transition_kl.value()};
    std::vector<double> adj = tape.adjoints(v.loglik - v.transition_kl);
    adj.resize(bound_nodes.size());
    sample_adj[s] = std::move(adj);
  });

  std::vector<double> adj(global.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(samples);
  for (const auto& a : sample_adj)
    for (std::size_t k = 0; k < a.size(); ++k) adj[static_cast<std::size_t>(bound_nodes[k])] += a[k] * inv;
  if (!kl.is_constant()) adj[static_cast<std::size_t>(kl.index())] -= 1.0;
  global.propagate(adj);

  VectorD gradient(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    gradient(static_cast<Eigen::Index>(i)) = adj[i];
    if (!std::isfinite(adj[i])) throw NumericalBreakdown("non-finite gradient in " + pv.layout.name_of(i));
  }
  const ChunkScheme scheme = resolve_scheme(problem, config);
  return {assemble_estimate(ku.value(), kx.value(), values, minibatch_scale(scheme, config)), std::move(gradient)};
}

double fd_gradient(const ParamVector& pv, const Problem& problem, const ElboConfig& config,
                   std::size_t coordinate, double h) {
  const auto i = static_cast<Eigen::Index>(coordinate);
  const double step = h * std::max(1.0, std::abs(pv.flat(i)));
  ParamVector plus = pv;
  ParamVector minus = pv;
  plus.flat(i) += step;
  minus.flat(i) -= step;
  const double fp = elbo(problem, unpack(plus), config).value;
  const double fm = elbo(problem, unpack(minus), config).value;
  return (fp - fm) / (2.0 * step);
}

Problem make_problem(const Dataset& data, const EmissionModel& emission, Variant variant) {
  data.validate();
  if (data.y.cols() != emission.obs_dim()) throw DimensionMismatch("dataset and emission disagree on E");
  return {variant, data.y, emission.c, emission.d};
}

ModelShape model_shape(const Problem& problem, const FitConfig& config) {
  ModelShape sh;
  sh.length = problem.length();
  sh.state_dim = problem.state_dim();
  sh.obs_dim = problem.obs_dim();
  sh.num_inducing = config.num_inducing;
  sh.num_chunks = config.chunk_length ? ChunkScheme::uniform(sh.length, *config.chunk_length).num_chunks() : 1;
  sh.tied = config.tied;
  sh.full_s = config.full_s;
  sh.prior_transitions = problem.variant == Variant::PrSsm;
  sh.whiten = config.whiten;
  return sh;
}

ModelParams<double> initial_params(const Problem& problem, const PsdMatrix& r, const FitConfig& config) {
  const ModelShape sh = model_shape(problem, config);
  const Eigen::Index dim = sh.state_dim;
  const Eigen::Index t_len = sh.length;
  if (sh.num_inducing < 1) throw std::invalid_argument("num_inducing must be >= 1");

  // Observations pulled back to the latent space.
  const MatrixD pinv = problem.c.completeOrthogonalDecomposition().pseudoInverse();
  MatrixD x(t_len, dim);
  for (Eigen::Index t = 0; t < t_len; ++t)
    x.row(t) = (pinv * (problem.y.row(t).transpose() - problem.d)).transpose();
  const MatrixD r_lat = pinv * r.dense() * pinv.transpose();
  const PsdMatrix p1 = chol(0.5 * (r_lat + r_lat.transpose()));

  ModelParams<double> p;
  p.inducing.kernel = RbfParams<double>::defaults(dim);
  p.inducing.z = MatrixD(sh.num_inducing, dim);
  for (Eigen::Index d = 0; d < dim; ++d) {
    const double lo = x.col(d).minCoeff() - 1.0;
    const double hi = x.col(d).maxCoeff() + 1.0;
    for (Eigen::Index i = 0; i < sh.num_inducing; ++i) {
      const double frac = sh.num_inducing > 1 ? static_cast<double>(i) / static_cast<double>(sh.num_inducing - 1) : 0.5;
      p.inducing.z(i, d) = lo + frac * (hi - lo);
    }
  }
  if (config.mu_init == "identity") {
    p.inducing.mu = p.inducing.z;
  } else if (config.mu_init == "regression") {
    // GP regression of the next pulled-back observation on the current one.
    const MatrixD xin = x.topRows(t_len - 1);
    MatrixD gram = kern_gram(xin, p.inducing.kernel);
    gram.diagonal().array() += r_lat.diagonal().mean() + config.q_init;
    const MatrixD l = chol(gram).factor();
    const MatrixD alpha = solve_lower_transpose(l, MatrixD(solve_lower(l, MatrixD(x.bottomRows(t_len - 1)))));
    p.inducing.mu = kern_matrix(p.inducing.z, xin, p.inducing.kernel) * alpha;
  } else {
    throw std::invalid_argument("unknown mu_init: " + config.mu_init);
  }
  // Sigma_u = sigma_u_init * K_ZZ: a shrunken copy of the prior.
  const MatrixD kzz_lower = factorize(kern_gram(p.inducing.z, p.inducing.kernel), JitterPolicy{}).lower;
  for (Eigen::Index d = 0; d < dim; ++d) {
    p.inducing.sigma_factor.push_back(kzz_lower * std::sqrt(config.sigma_u_init));
  }

  p.chain.m1 = x.row(0).transpose();
  p.chain.p1_factor = p1.factor();
  p.chain.tied = sh.tied;
  p.chain.prior_transitions = sh.prior_transitions;
  const VectorD s_diag = (r_lat.diagonal().array() + config.q_init).sqrt();
  for (Eigen::Index k = 0; k < sh.transition_count(); ++k) {
    p.chain.a.push_back(MatrixD::Zero(dim, dim));
    if (sh.tied) {
      p.chain.b.push_back(x.bottomRows(t_len - 1).colwise().mean().transpose());
    } else {
      p.chain.b.push_back(x.row(k + 1).transpose());
    }
    p.chain.s_factor.push_back(s_diag.asDiagonal());
  }
  if (sh.num_chunks > 1) {
    const ChunkScheme scheme = ChunkScheme::uniform(t_len, *config.chunk_length);
    for (Eigen::Index c = 1; c < scheme.num_chunks(); ++c) {
      p.chain.chunk_mean.push_back(x.row(scheme.begin(c)).transpose());
      p.chain.chunk_factor.push_back(p1.factor());
    }
  }
  p.q_factor = MatrixD::Identity(dim, dim) * std::sqrt(config.q_init);
  p.r_factor = r.factor();
  return p;
}

FitResult fit(const Dataset& data, const EmissionModel& emission, Variant variant, const FitConfig& config) {
  if (config.iterations < 0) throw std::invalid_argument("fit: iterations must be >= 0");
  const Problem problem = make_problem(data, emission, variant);
  const ModelShape shape = model_shape(problem, config);
  ParamVector theta = pack(initial_params(problem, emission.r, config), shape);
  for (const auto& name : config.frozen) (void)theta.layout.slice(name);

  std::vector<char> frozen(theta.layout.size(), 0);
  for (const auto& s : theta.layout.slices())
    if (config.frozen.count(s.name)) std::fill_n(frozen.begin() + static_cast<std::ptrdiff_t>(s.offset), s.size, 1);

  ElboConfig ec;
  ec.samples = config.samples;
  ec.execution = config.execution;
  ec.sampling.retain_sites = config.retain_sites;
  std::optional<ChunkScheme> scheme;
  if (config.chunk_length) scheme = ChunkScheme::uniform(shape.length, *config.chunk_length);
  ec.scheme = scheme;
  const Eigen::Index n_chunks = scheme ? scheme->num_chunks() : 1;
  const bool minibatching = config.minibatch_chunks > 0 && config.minibatch_chunks < n_chunks;

  std::mt19937_64 rng(config.seed ^ 0x5bd1e995ULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_chunks));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::size_t cursor = order.size();

  const auto n = static_cast<Eigen::Index>(theta.layout.size());
  VectorD m = VectorD::Zero(n);
  VectorD v = VectorD::Zero(n);

  FitResult result;
  result.best = theta;
  double best = -std::numeric_limits<double>::infinity();
  double elbo0 = 0.0;
  int below = 0;

  for (int it = 0; it < config.iterations; ++it) {
    ec.seed = iteration_seed(config.seed, it);
    ec.minibatch.clear();
    if (minibatching) {
      const auto k = static_cast<std::size_t>(config.minibatch_chunks);
      if (cursor + k > order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      ec.minibatch.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                          order.begin() + static_cast<std::ptrdiff_t>(cursor + k));
      std::sort(ec.minibatch.begin(), ec.minibatch.end());
      cursor += k;
    }

    GradientResult g = grad_elbo(theta, problem, ec);
    for (Eigen::Index i = 0; i < n; ++i)
      if (frozen[static_cast<std::size_t>(i)]) g.gradient(i) = 0.0;

    const double value = g.estimate.value;
    if (it == 0) elbo0 = value;
    if (value > best) {
      best = value;
      result.best = theta;
      result.best_iteration = it;
    }
    below = value < elbo0 - 10.0 * std::abs(elbo0) ? below + 1 : 0;
    if (below >= 100) throw Divergence("bound fell far below its starting value for 100 iterations");

    m = config.beta1 * m + (1.0 - config.beta1) * g.gradient;
    v = config.beta2 * v + (1.0 - config.beta2) * g.gradient.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config.beta1, it + 1);
    const double c2 = 1.0 - std::pow(config.beta2, it + 1);
    VectorD step = VectorD::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (frozen[static_cast<std::size_t>(i)]) continue;
      step(i) = config.step_size * (m(i) / c1) / (std::sqrt(v(i) / c2) + config.epsilon);
      theta.flat(i) += step(i);
    }
    result.trace.push_back({it, g.estimate, g.gradient.norm(), step.norm()});
  }
  result.last = theta;
  if (result.best_iteration < 0) result.best = theta;
  return result;
}

void write_trace(const std::vector<TraceEntry>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iter,elbo,loglik,kl_u,kl_x1,trans_kl,stderr,grad_norm\n";
  char buf[512];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.iteration, e.estimate.value,
                  e.estimate.loglik, e.estimate.kl_u, e.estimate.kl_x1, e.estimate.transition_kl, e.estimate.stderr_,
                  e.grad_norm);
    out << buf;
  }
}

}  // namespace gpssm
