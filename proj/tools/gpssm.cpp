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

// Command-line experiment runner: dataset generation, fitting, timing and
// oracle checks. Every subcommand reads one JSON config document.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gpssm/benchmark.hpp"
#include "gpssm/metrics.hpp"
#include "gpssm/optim.hpp"
#include "gpssm/oracle.hpp"
#include "gpssm/parallel.hpp"

namespace {

using nlohmann::json;
using namespace gpssm;

enum ExitCode { kOk = 0, kConfigError = 2, kNumericalFailure = 3, kOracleViolation = 4 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::optional<std::string> csv;
  std::optional<std::string> meta;
  Eigen::Index length = kKinkLength;
  double q = kKinkProcessVariance;
  double r = kKinkEmissionVariance;
};

struct GridConfig {
  double lo = -3.0;
  double hi = 1.2;
  int n = 200;
};

struct BenchConfig {
  std::vector<Eigen::Index> lengths{50, 100, 200, 400};
  int repetitions = 20;
  Eigen::Index num_inducing = 10;
  Eigen::Index tau = 25;
  std::vector<std::string> variants{"factorised-linear", "factorised-nonlinear", "u-factorised", "non-factorised"};
};

struct OracleRunConfig {
  int configs = 20;
  int samples = 10000;
  std::vector<std::string> variants{"factorised-linear", "factorised-nonlinear", "u-factorised", "non-factorised",
                                    "pr-ssm"};
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = ".";
  int threads = 0;
  DataConfig data;
  std::string variant = "u-factorised";
  FitConfig fit;
  GridConfig grid;
  int pair_samples = 1000;
  BenchConfig bench;
  OracleRunConfig oracle;
};

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& target) {
  if (j.contains(key) && !j.at(key).is_null()) target = j.at(key).get<T>();
}

template <class T>
void read(const json& j, const char* key, std::optional<T>& target) {
  if (j.contains(key) && !j.at(key).is_null()) target = j.at(key).get<T>();
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  check_keys(j, "config",
             {"seed", "out", "threads", "dataset", "model", "optimizer", "grid", "pairs", "benchmark", "oracle"});
  read(j, "seed", c.seed);
  read(j, "out", c.out);
  read(j, "threads", c.threads);
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, "dataset", {"csv", "meta", "length", "q", "r"});
    read(d, "csv", c.data.csv);
    read(d, "meta", c.data.meta);
    read(d, "length", c.data.length);
    read(d, "q", c.data.q);
    read(d, "r", c.data.r);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model",
               {"variant", "num_inducing", "chunk_length", "retain_sites", "tied", "full_s", "whiten", "mu_init",
                "q_init", "sigma_u_init", "frozen"});
    read(m, "variant", c.variant);
    read(m, "num_inducing", c.fit.num_inducing);
    read(m, "chunk_length", c.fit.chunk_length);
    read(m, "retain_sites", c.fit.retain_sites);
    read(m, "tied", c.fit.tied);
    read(m, "full_s", c.fit.full_s);
    read(m, "whiten", c.fit.whiten);
    read(m, "mu_init", c.fit.mu_init);
    read(m, "q_init", c.fit.q_init);
    read(m, "sigma_u_init", c.fit.sigma_u_init);
    read(m, "frozen", c.fit.frozen);
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    check_keys(o, "optimizer",
               {"iterations", "step_size", "beta1", "beta2", "epsilon", "samples", "minibatch_chunks", "execution"});
    read(o, "iterations", c.fit.iterations);
    read(o, "step_size", c.fit.step_size);
    read(o, "beta1", c.fit.beta1);
    read(o, "beta2", c.fit.beta2);
    read(o, "epsilon", c.fit.epsilon);
    read(o, "samples", c.fit.samples);
    read(o, "minibatch_chunks", c.fit.minibatch_chunks);
    std::string execution = "parallel";
    read(o, "execution", execution);
    if (execution != "parallel" && execution != "serial") throw ConfigError("optimizer.execution: parallel or serial");
    c.fit.execution = execution == "serial" ? Execution::Serial : Execution::Parallel;
  }
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    check_keys(g, "grid", {"lo", "hi", "n"});
    read(g, "lo", c.grid.lo);
    read(g, "hi", c.grid.hi);
    read(g, "n", c.grid.n);
  }
  if (j.contains("pairs")) {
    check_keys(j.at("pairs"), "pairs", {"samples"});
    read(j.at("pairs"), "samples", c.pair_samples);
  }
  if (j.contains("benchmark")) {
    const json& b = j.at("benchmark");
    check_keys(b, "benchmark", {"lengths", "repetitions", "num_inducing", "tau", "variants"});
    read(b, "lengths", c.bench.lengths);
    read(b, "repetitions", c.bench.repetitions);
    read(b, "num_inducing", c.bench.num_inducing);
    read(b, "tau", c.bench.tau);
    read(b, "variants", c.bench.variants);
  }
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    check_keys(o, "oracle", {"configs", "samples", "variants"});
    read(o, "configs", c.oracle.configs);
    read(o, "samples", c.oracle.samples);
    read(o, "variants", c.oracle.variants);
  }
  return c;
}

void validate(const RunConfig& c) {
  if (c.grid.n < 2) throw ConfigError("grid.n must be >= 2");
  if (!(c.grid.lo < c.grid.hi)) throw ConfigError("grid.lo must be below grid.hi");
  if (c.fit.num_inducing < 1) throw ConfigError("model.num_inducing must be >= 1");
  if (c.fit.chunk_length && *c.fit.chunk_length < 1) throw ConfigError("model.chunk_length must be >= 1");
  if (c.fit.iterations < 1) throw ConfigError("optimizer.iterations must be >= 1");
  if (c.fit.samples < 1) throw ConfigError("optimizer.samples must be >= 1");
  if (c.fit.minibatch_chunks < 0) throw ConfigError("optimizer.minibatch_chunks must be >= 0");
  if (c.data.length < 2) throw ConfigError("dataset.length must be >= 2");
  if (!(c.data.q > 0.0) || !(c.data.r > 0.0)) throw ConfigError("dataset.q and dataset.r must be positive");
  if (c.pair_samples < 2) throw ConfigError("pairs.samples must be >= 2");
  if (c.bench.lengths.size() < 2 || c.bench.repetitions < 1 || c.bench.num_inducing < 1 || c.bench.tau < 1) {
    throw ConfigError("benchmark: need >= 2 lengths, repetitions >= 1, num_inducing >= 1, tau >= 1");
  }
  if (c.oracle.configs < 1 || c.oracle.samples < 2) throw ConfigError("oracle: configs >= 1 and samples >= 2");
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
  try {
    parse_variant(c.variant);
    for (const auto& v : c.bench.variants) parse_variant(v);
    for (const auto& v : c.oracle.variants) parse_variant(v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

json resolved(const RunConfig& c) {
  const FitConfig& f = c.fit;
  json j;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["threads"] = c.threads;
  j["dataset"] = {{"csv", c.data.csv ? json(*c.data.csv) : json(nullptr)},
                  {"meta", c.data.meta ? json(*c.data.meta) : json(nullptr)},
                  {"length", c.data.length},
                  {"q", c.data.q},
                  {"r", c.data.r}};
  j["model"] = {{"variant", c.variant},
                {"num_inducing", f.num_inducing},
                {"chunk_length", f.chunk_length ? json(*f.chunk_length) : json(nullptr)},
                {"retain_sites", f.retain_sites},
                {"tied", f.tied},
                {"full_s", f.full_s},
                {"whiten", f.whiten},
                {"mu_init", f.mu_init},
                {"q_init", f.q_init},
                {"sigma_u_init", f.sigma_u_init},
                {"frozen", f.frozen}};
  j["optimizer"] = {{"iterations", f.iterations},
                    {"step_size", f.step_size},
                    {"beta1", f.beta1},
                    {"beta2", f.beta2},
                    {"epsilon", f.epsilon},
                    {"samples", f.samples},
                    {"minibatch_chunks", f.minibatch_chunks},
                    {"execution", f.execution == Execution::Serial ? "serial" : "parallel"}};
  j["grid"] = {{"lo", c.grid.lo}, {"hi", c.grid.hi}, {"n", c.grid.n}};
  j["pairs"] = {{"samples", c.pair_samples}};
  j["benchmark"] = {{"lengths", c.bench.lengths},
                    {"repetitions", c.bench.repetitions},
                    {"num_inducing", c.bench.num_inducing},
                    {"tau", c.bench.tau},
                    {"variants", c.bench.variants}};
  j["oracle"] = {{"configs", c.oracle.configs}, {"samples", c.oracle.samples}, {"variants", c.oracle.variants}};
  return j;
}

std::filesystem::path output_dir(const RunConfig& c) {
  const std::filesystem::path dir(c.out);
  std::filesystem::create_directories(dir);
  return dir;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  return out;
}

void write_json(const std::filesystem::path& path, const json& j) { open_out(path) << j.dump(2) << "\n"; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json to_json(const ElboEstimate& e) {
  return {{"elbo", e.value},       {"loglik", e.loglik},   {"kl_u", e.kl_u},
          {"kl_x1", e.kl_x1},      {"trans_kl", e.transition_kl}, {"stderr", e.stderr_},
          {"samples", e.n_samples}, {"minibatch_scale", e.minibatch_scale}};
}

Dataset kink_data(Eigen::Index length, double q, double r, std::uint64_t seed) {
  const TransitionFn f = [](const VectorD& x) { return VectorD::Constant(1, kink(x(0))); };
  Dataset data = simulate(f, length, {PsdMatrix::scaled_identity(1, q)}, EmissionModel::identity(1, r), seed);
  data.meta.generator = "kink";
  return data;
}

Dataset load_data(const RunConfig& c) {
  if (!c.data.csv) return kink_data(c.data.length, c.data.q, c.data.r, c.seed);
  std::optional<std::filesystem::path> meta;
  if (c.data.meta) meta = *c.data.meta;
  return read_dataset(*c.data.csv, meta);
}

/// Identity emission with R from the dataset metadata, or the configured R.
EmissionModel emission_for(const Dataset& data, const RunConfig& c) {
  const Eigen::Index obs = data.y.cols();
  EmissionModel em = EmissionModel::identity(obs, c.data.r);
  if (data.meta.r.rows() == obs && data.meta.r.cols() == obs) em.r = chol(data.meta.r);
  return em;
}

int cmd_generate(const RunConfig& c) {
  const Dataset data = kink_data(c.data.length, c.data.q, c.data.r, c.seed);
  const auto dir = output_dir(c);
  write_dataset(data, dir / "dataset.csv", dir / "dataset.json");
  std::cout << "wrote " << (dir / "dataset.csv").string() << " (" << data.length() << " steps)\n";
  return kOk;
}

/// Sample moments of (x_t, x_{t+1}) for state component 0.
void write_pairs(const std::filesystem::path& path, const ModelParams<double>& p, const SparseGp<double>& gp,
                 Variant variant, Eigen::Index length, const std::optional<Eigen::Index>& tau, int samples,
                 std::uint64_t seed) {
  const TrajectorySampler<double> sampler(variant, p.chain, gp, p.q_factor);
  const ChunkScheme scheme = tau ? ChunkScheme::uniform(length, *tau) : ChunkScheme::single(length);
  MatrixD xs(samples, length);
  for (int s = 0; s < samples; ++s) {
    const TrajectorySample<double> draw = sampler.sample_chunked(scheme, NoiseStream(seed, static_cast<std::uint64_t>(s)));
    xs.row(s) = draw.x.col(0).transpose();
  }
  std::ofstream out = open_out(path);
  out << "t,mean_t,mean_t1,c00,c01,c11\n";
  const double n = static_cast<double>(samples);
  for (Eigen::Index t = 0; t + 1 < length; ++t) {
    const VectorD a = xs.col(t), b = xs.col(t + 1);
    const double ma = a.mean(), mb = b.mean();
    const double c00 = (a.array() - ma).square().sum() / (n - 1.0);
    const double c01 = ((a.array() - ma) * (b.array() - mb)).sum() / (n - 1.0);
    const double c11 = (b.array() - mb).square().sum() / (n - 1.0);
    out << t << "," << num(ma) << "," << num(mb) << "," << num(c00) << "," << num(c01) << "," << num(c11) << "\n";
  }
}

int cmd_fit(const RunConfig& c) {
  const Dataset data = load_data(c);
  const EmissionModel em = emission_for(data, c);
  const Variant variant = parse_variant(c.variant);
  FitConfig cfg = c.fit;
  cfg.seed = c.seed;
  const FitResult r = fit(data, em, variant, cfg);
  if (r.best_iteration < 0) throw NumericalBreakdown("fit produced no finite bound estimate");
  const TraceEntry& best = r.trace[static_cast<std::size_t>(r.best_iteration)];

  const auto dir = output_dir(c);
  write_trace(r.trace, dir / "trace.csv");
  const ModelParams<double> p = unpack(r.best);
  const SparseGp<double> gp(p.inducing);

  json metrics = nullptr;
  const bool one_dim = data.y.cols() == 1 && p.inducing.input_dim() == 1;
  if (one_dim) {
    const GridPosterior grid = transition_grid(gp, c.grid.lo, c.grid.hi, c.grid.n);
    std::ofstream out = open_out(dir / "grid.csv");
    out << "x,mean,std\n";
    for (std::size_t i = 0; i < grid.x.size(); ++i) {
      out << num(grid.x[i]) << "," << num(grid.mean[i]) << "," << num(grid.sd[i]) << "\n";
    }
    if (data.meta.generator == "kink" && data.x_true) {
      const TransitionMetrics m =
          transition_metrics(grid, kink, data.x_true->minCoeff(), data.x_true->maxCoeff());
      metrics = {{"coverage2sd", m.coverage2sd},
                 {"mean_band_width", m.mean_band_width},
                 {"rmse", m.rmse},
                 {"covered_points", m.covered_points}};
    }
  }
  write_pairs(dir / "pairs.csv", p, gp, variant, data.length(), cfg.chunk_length, c.pair_samples, c.seed + 1);

  json report;
  report["command"] = "fit";
  report["config"] = resolved(c);
  report["final"] = to_json(best.estimate);
  report["best_iteration"] = r.best_iteration;
  report["iterations_run"] = r.trace.size();
  report["metrics"] = metrics;
  report["trace"] = "trace.csv";
  report["grid"] = one_dim ? json("grid.csv") : json(nullptr);
  report["pairs"] = "pairs.csv";
  write_json(dir / "report.json", report);
  std::cout << "best bound " << num(best.estimate.value) << " at iteration " << r.best_iteration << "\n";
  return kOk;
}

int cmd_benchmark(const RunConfig& c) {
  struct Series {
    std::string variant;
    std::optional<Eigen::Index> tau;
  };
  std::vector<Series> series;
  for (const auto& v : c.bench.variants) series.push_back({v, std::nullopt});
  series.push_back({"non-factorised", c.bench.tau});

  const auto dir = output_dir(c);
  std::ofstream csv = open_out(dir / "bench.csv");
  csv << "variant,T,tau,median_seconds\n";
  json slopes = json::array();
  for (const Series& s : series) {
    std::vector<double> xs, ys;
    for (const Eigen::Index t : c.bench.lengths) {
      const SamplingTiming timing =
          time_sampling(parse_variant(s.variant), t, s.tau, c.bench.num_inducing, c.bench.repetitions, c.seed);
      csv << s.variant << "," << t << "," << (s.tau ? std::to_string(*s.tau) : "") << "," << num(timing.median_seconds)
          << "\n";
      xs.push_back(static_cast<double>(t));
      ys.push_back(timing.median_seconds);
    }
    const double slope = loglog_slope(xs, ys);
    slopes.push_back({{"variant", s.variant}, {"tau", s.tau ? json(*s.tau) : json(nullptr)}, {"slope", slope}});
    std::printf("%-21s tau=%-4s slope %.3f\n", s.variant.c_str(), s.tau ? std::to_string(*s.tau).c_str() : "-", slope);
  }
  write_json(dir / "bench.json", {{"command", "benchmark"}, {"config", resolved(c)}, {"slopes", slopes}});
  return kOk;
}

/// Random T = 2 configuration: oracle hyperparameters, observations and a
/// variational posterior with three inducing points.
struct BoundCase {
  OracleConfig oracle;
  Problem problem;
  ModelParams<double> params;
};

BoundCase random_case(Variant v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto normal = [&] { return std::normal_distribution<double>(0.0, 1.0)(rng); };
  auto scalar = [](double v) { return MatrixD::Constant(1, 1, v); };
  BoundCase out;
  out.oracle.kernel.variance = uniform(0.5, 2.0);
  out.oracle.kernel.lengthscales(0) = uniform(0.5, 2.0);
  out.oracle.q = uniform(0.01, 0.5);
  out.oracle.r = uniform(0.05, 0.5);
  out.problem.variant = v;
  out.problem.y = MatrixD(2, 1);
  out.problem.y << 1.2 * normal(), 1.2 * normal();
  out.problem.c = MatrixD::Identity(1, 1);
  out.problem.d = VectorD::Zero(1);

  ModelParams<double>& p = out.params;
  const Eigen::Index m = 3;
  p.inducing.kernel = out.oracle.kernel;
  p.inducing.z = MatrixD(m, 1);
  p.inducing.mu = MatrixD(m, 1);
  MatrixD s = MatrixD::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    p.inducing.z(i, 0) = -2.0 + 4.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(m) + 0.1 * normal();
    p.inducing.mu(i, 0) = 0.7 * normal();
    for (Eigen::Index j = 0; j < i; ++j) s(i, j) = 0.1 * normal();
    s(i, i) = uniform(0.2, 0.6);
  }
  p.inducing.sigma_factor.push_back(s);
  p.q_factor = scalar(std::sqrt(out.oracle.q));
  p.r_factor = scalar(std::sqrt(out.oracle.r));
  if (v == Variant::PrSsm) {
    p.chain = prssm_chain(2, PsdMatrix::from_factor(p.q_factor));
  } else {
    p.chain.m1 = VectorD::Constant(1, 0.5 * normal());
    p.chain.p1_factor = scalar(uniform(0.3, 0.8));
    p.chain.a.push_back(scalar(0.4 * normal()));
    p.chain.b.push_back(VectorD::Constant(1, 0.3 * normal()));
    p.chain.s_factor.push_back(scalar(uniform(0.2, 0.5)));
  }
  return out;
}

int cmd_oracle(const RunConfig& c) {
  const auto dir = output_dir(c);
  json cases = json::array();
  int violations = 0;
  for (const auto& name : c.oracle.variants) {
    const Variant v = parse_variant(name);
    for (int i = 0; i < c.oracle.configs; ++i) {
      const BoundCase bc = random_case(v, c.seed * 1000003 + 1000 + static_cast<std::uint64_t>(i));
      ElboConfig ec;
      ec.samples = c.oracle.samples;
      ec.seed = c.seed + static_cast<std::uint64_t>(i);
      const ElboEstimate e = elbo(bc.problem, bc.params, ec);
      const VectorD y = bc.problem.y.col(0);
      const MarginalReport exact = log_marginal_report(bc.oracle, y);
      const double gap = e.value - 3.0 * e.stderr_ - exact.log_marginal;
      const bool violated = !(gap <= 0.0);
      violations += violated;
      cases.push_back({{"variant", name},
                       {"index", i},
                       {"oracle", json::parse(to_json(bc.oracle, y, exact))},
                       {"estimate", to_json(e)},
                       {"gap", gap},
                       {"violated", violated}});
    }
  }
  write_json(dir / "oracle_bound.json", {{"command", "oracle"},
                                         {"config", resolved(c)},
                                         {"rule", "elbo - 3 stderr <= log p(Y)"},
                                         {"violations", violations},
                                         {"cases", cases}});

  NonMarkovSetup point;
  point.s2 = 0.0;
  NonMarkovSetup unit;
  NonMarkovSetup asym;
  asym.x1b = 0.3;
  json nonmarkov = json::array();
  for (const auto& [label, setup] : {std::pair<const char*, NonMarkovSetup>{"point-mass", point},
                                     {"unit", unit},
                                     {"asymmetric", asym}}) {
    json entry = json::parse(to_json(setup, fitc_nonmarkov_check(setup)));
    entry["label"] = label;
    nonmarkov.push_back(entry);
    std::printf("non-Markov %-10s max deviation %.3g\n", label, entry["result"].value("max_deviation", 0.0));
  }
  write_json(dir / "nonmarkov.json", {{"command", "oracle"}, {"reports", nonmarkov}});
  std::printf("bound check: %d violations\n", violations);
  return violations ? kOracleViolation : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational inference for Gaussian process state-space models"};
  std::string command, config_path, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  app.add_option("command", command, "generate | fit | benchmark | oracle")
      ->required()
      ->check(CLI::IsMember({"generate", "fit", "benchmark", "oracle"}));
  app.add_option("--config", config_path, "JSON config document")->required();
  app.add_option("--seed", seed, "Seed overriding the config");
  app.add_option("--out", out, "Output directory overriding the config");
  app.add_option("--threads", threads, "Thread cap (0 = runtime default)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  RunConfig cfg;
  try {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot read config " + config_path);
    cfg = parse_config(json::parse(in));
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out = out;
    if (threads) cfg.threads = *threads;
    validate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  if (cfg.threads > 0) set_thread_limit(cfg.threads);

  try {
    if (command == "generate") return cmd_generate(cfg);
    if (command == "fit") return cmd_fit(cfg);
    if (command == "benchmark") return cmd_benchmark(cfg);
    return cmd_oracle(cfg);
  } catch (const NumericalBreakdown& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
  } catch (const Divergence& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
  } catch (const NotPositiveDefinite& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
  } catch (const NonConvergence& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kNumericalFailure;
}
