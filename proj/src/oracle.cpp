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

#include "gpssm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "gpssm/gauss.hpp"

namespace gpssm {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double k1(const RbfParams<double>& p, double a, double b) {
  return kern(std::span<const double>(&a, 1), std::span<const double>(&b, 1), p);
}

// log N([a, b]; 0, [[s00, s01], [s01, s11]])
double log_normal2(double a, double b, double s00, double s01, double s11) {
  const double det = s00 * s11 - s01 * s01;
  const double maha = (s11 * a * a - 2.0 * s01 * a * b + s00 * b * b) / det;
  return -0.5 * (2.0 * kLog2Pi + std::log(det) + maha);
}

double simpson_weight(int i, int n) {
  if (i == 0 || i == n) return 1.0;
  return i % 2 == 1 ? 4.0 : 2.0;
}

// log of the T = 3 integral on an n x n Simpson grid.
double log_grid(const OracleConfig& cfg, const VectorD& y, int n, double lo1, double hi1, double lo2,
                double hi2) {
  const double h1 = (hi1 - lo1) / n;
  const double h2 = (hi2 - lo2) / n;
  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    const double x1 = lo1 + i * h1;
    const double k11 = k1(cfg.kernel, x1, x1);
    const double base = log_normal(x1, 0.0, 1.0) + log_normal(y(0), x1, cfg.r);
    for (int j = 0; j <= n; ++j) {
      const double x2 = lo2 + j * h2;
      const double k12 = k1(cfg.kernel, x1, x2);
      const double k22 = k1(cfg.kernel, x2, x2);
      // (x_2, y_3) given x_1 and the input location x_2 is jointly Gaussian.
      const double v = base + log_normal(y(1), x2, cfg.r) +
                       log_normal2(x2, y(2), k11 + cfg.q, k12, k22 + cfg.q + cfg.r);
      logs.push_back(v);
      peak = std::max(peak, v);
    }
  }
  double sum = 0.0;
  std::size_t idx = 0;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) sum += simpson_weight(i, n) * simpson_weight(j, n) * std::exp(logs[idx++] - peak);
  return peak + std::log(sum * h1 * h2 / 9.0);
}

}  // namespace

void OracleConfig::validate() const {
  kernel.validate();
  if (kernel.dim() != 1) throw std::invalid_argument("oracle: only D = 1 is supported");
  if (!(q > 0.0) || !(r > 0.0)) throw std::invalid_argument("oracle: Q and R must be positive");
  if (!(range_sd > 0.0)) throw std::invalid_argument("oracle: range_sd must be positive");
  if (grid < 4 || grid % 4 != 0) throw std::invalid_argument("oracle: grid must be a positive multiple of 4");
}

MarginalReport log_marginal_report(const OracleConfig& cfg, const VectorD& y) {
  cfg.validate();
  MarginalReport out;
  out.length = y.size();
  // x_1 is informed by the prior and y_1 only; other factors are bounded in x_1.
  const double c1 = y(0) / (1.0 + cfg.r);
  const double s1 = std::sqrt(cfg.r / (1.0 + cfg.r));
  const double lo1 = c1 - cfg.range_sd * s1;
  const double hi1 = c1 + cfg.range_sd * s1;

  if (y.size() == 2) {
    const auto logf = [&](double x1) {
      const double k11 = k1(cfg.kernel, x1, x1);
      return log_normal(x1, 0.0, 1.0) + log_normal(y(0), x1, cfg.r) + log_normal(y(1), 0.0, k11 + cfg.q + cfg.r);
    };
    const double ref = logf(c1);
    const double integral = quad_1d([&](double x) { return std::exp(logf(x) - ref); }, lo1, hi1, cfg.tol);
    out.log_marginal = ref + std::log(integral);
    out.coarse = out.log_marginal;
    out.error_estimate = cfg.tol / integral;
    return out;
  }
  if (y.size() == 3) {
    const double var2 = cfg.kernel.variance + cfg.q;
    const double c2 = y(1) * var2 / (var2 + cfg.r);
    const double s2 = std::sqrt(cfg.r * var2 / (var2 + cfg.r));
    const double lo2 = c2 - cfg.range_sd * s2;
    const double hi2 = c2 + cfg.range_sd * s2;
    out.log_marginal = log_grid(cfg, y, cfg.grid, lo1, hi1, lo2, hi2);
    out.coarse = log_grid(cfg, y, cfg.grid / 2, lo1, hi1, lo2, hi2);
    out.error_estimate = std::abs(out.log_marginal - out.coarse) / 15.0;
    return out;
  }
  throw std::invalid_argument("oracle: T must be 2 or 3");
}

double log_marginal_quadrature(const OracleConfig& cfg, const VectorD& y) {
  return log_marginal_report(cfg, y).log_marginal;
}

NonMarkovReport fitc_nonmarkov_check(const NonMarkovSetup& s) {
  s.kernel.validate();
  if (s.kernel.dim() != 1) throw std::invalid_argument("nonmarkov: only D = 1 is supported");
  if (s.s2 < 0.0 || !(s.q > 0.0)) throw std::invalid_argument("nonmarkov: need s2 >= 0 and Q > 0");
  if (s.x3_points < 2) throw std::invalid_argument("nonmarkov: need at least two grid points");
  const double kzz = k1(s.kernel, s.z, s.z);
  const auto coef = [&](double x) {
    const double kxz = k1(s.kernel, x, s.z);
    return std::pair{kxz / kzz, k1(s.kernel, x, x) - kxz * kxz / kzz + s.q};
  };

  const auto conditional = [&](double x1, double x3) {
    const auto [a1, c1] = coef(x1);
    const auto [a2, c2] = coef(s.x2);
    if (s.s2 == 0.0) return normal_pdf(x3, a2 * s.mu, c2);
    // Integrate over w = (u - mu) / sd so the box does not shrink with s2.
    const double sd = std::sqrt(s.s2);
    const auto weight = [&](double w) {
      return normal_pdf(w, 0.0, 1.0) * normal_pdf(s.x2, a1 * (s.mu + sd * w), c1);
    };
    const double joint = quad_1d(
        [&](double w) { return weight(w) * normal_pdf(x3, a2 * (s.mu + sd * w), c2); }, -12.0, 12.0, s.tol);
    const double marg = quad_1d(weight, -12.0, 12.0, s.tol);
    return joint / marg;
  };

  NonMarkovReport out;
  out.x1a = s.x1a;
  out.x1b = s.x1b;
  for (int i = 0; i < s.x3_points; ++i) {
    const double x3 = s.x3_lo + (s.x3_hi - s.x3_lo) * i / (s.x3_points - 1);
    out.x3.push_back(x3);
    out.density_a.push_back(conditional(s.x1a, x3));
    out.density_b.push_back(conditional(s.x1b, x3));
    out.max_deviation = std::max(out.max_deviation, std::abs(out.density_a.back() - out.density_b.back()));
  }
  return out;
}

std::string to_json(const OracleConfig& cfg, const VectorD& y, const MarginalReport& report) {
  nlohmann::json j;
  j["oracle"] = "log_marginal_quadrature";
  j["inputs"] = {{"kernel_variance", cfg.kernel.variance},
                 {"lengthscale", cfg.kernel.lengthscales(0)},
                 {"Q", cfg.q},
                 {"R", cfg.r},
                 {"tol", cfg.tol},
                 {"range_sd", cfg.range_sd},
                 {"grid", cfg.grid},
                 {"y", std::vector<double>(y.data(), y.data() + y.size())}};
  j["result"] = {{"T", report.length}, {"log_marginal", report.log_marginal}, {"coarse", report.coarse}};
  j["error_estimate"] = report.error_estimate;
  return j.dump(2);
}

std::string to_json(const NonMarkovSetup& s, const NonMarkovReport& report) {
  nlohmann::json j;
  j["oracle"] = "fitc_nonmarkov_check";
  j["inputs"] = {{"kernel_variance", s.kernel.variance},
                 {"lengthscale", s.kernel.lengthscales(0)},
                 {"z", s.z},
                 {"mu", s.mu},
                 {"s2", s.s2},
                 {"Q", s.q},
                 {"x1", {s.x1a, s.x1b}},
                 {"x2", s.x2},
                 {"x3_range", {s.x3_lo, s.x3_hi, s.x3_points}},
                 {"tol", s.tol}};
  j["result"] = {{"x3", report.x3},
                 {"density_a", report.density_a},
                 {"density_b", report.density_b},
                 {"max_deviation", report.max_deviation}};
  return j.dump(2);
}

}  // namespace gpssm
