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

#include "gpssm/ssm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpssm/noise.hpp"

namespace gpssm {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json matrix_to_json(const MatrixD& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

MatrixD matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  MatrixD m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
  return m;
}

}  // namespace

EmissionModel EmissionModel::identity(Eigen::Index dim, double variance) {
  return {MatrixD::Identity(dim, dim), VectorD::Zero(dim), PsdMatrix::scaled_identity(dim, variance)};
}

void Dataset::validate() const {
  if (y.rows() < 2) throw std::invalid_argument("Dataset: need at least two time steps");
  if (x_true && x_true->rows() != y.rows()) {
    throw DimensionMismatch("Dataset: latent and observation lengths differ");
  }
}

double kink(double x) { return 0.8 + (x + 0.2) * (1.0 - 5.0 / (1.0 + std::exp(-2.0 * x))); }

double kink_derivative(double x) {
  const double s = 1.0 / (1.0 + std::exp(-2.0 * x));
  return (1.0 - 5.0 * s) - (x + 0.2) * 10.0 * s * (1.0 - s);
}

Dataset simulate(const TransitionFn& f, Eigen::Index length, const ProcessNoise& noise,
                 const EmissionModel& emission, std::uint64_t seed) {
  if (length < 2) throw std::invalid_argument("simulate: length must be >= 2");
  const Eigen::Index dim = emission.state_dim();
  const Eigen::Index obs = emission.obs_dim();
  if (noise.q.dim() != dim || emission.r.dim() != obs || emission.d.size() != obs) {
    throw DimensionMismatch("simulate: inconsistent model dimensions");
  }
  const NoiseStream rng(seed, 0);
  Dataset data;
  data.y.resize(length, obs);
  MatrixD x(length, dim);

  VectorD state = rng.normals(NoiseTag::InitialState, 0, dim);
  for (Eigen::Index t = 0; t < length; ++t) {
    if (t > 0) {
      const VectorD mean = f(state);
      if (mean.size() != dim) throw DimensionMismatch("simulate: transition output size");
      state = mean + noise.q.factor() * rng.normals(NoiseTag::Transition, static_cast<std::uint64_t>(t - 1), dim);
    }
    x.row(t) = state.transpose();
    VectorD e(obs);
    for (Eigen::Index k = 0; k < obs; ++k) {
      e(k) = rng.normal(NoiseTag::Emission, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(k));
    }
    const VectorD y = emission.c * state + emission.d + emission.r.factor() * e;
    data.y.row(t) = y.transpose();
  }
  data.x_true = std::move(x);
  data.meta.seed = seed;
  data.meta.q = noise.q.dense();
  data.meta.r = emission.r.dense();
  data.meta.length = length;
  data.meta.generator = "simulate";
  return data;
}

EmissionModel kink_emission() { return EmissionModel::identity(1, kKinkEmissionVariance); }

Dataset make_kink_dataset(std::uint64_t seed) {
  const ProcessNoise noise{PsdMatrix::scaled_identity(1, kKinkProcessVariance)};
  auto f = [](const VectorD& x) {
    VectorD out(1);
    out(0) = kink(x(0));
    return out;
  };
  Dataset data = simulate(f, kKinkLength, noise, kink_emission(), seed);
  data.meta.generator = "kink";
  return data;
}

void write_dataset(const Dataset& data, const std::filesystem::path& csv,
                   const std::filesystem::path& json) {
  data.validate();
  std::ofstream out(csv);
  if (!out) throw std::runtime_error("cannot open " + csv.string());
  const Eigen::Index obs = data.y.cols();
  const Eigen::Index dim = data.x_true ? data.x_true->cols() : 0;
  out << "t";
  for (Eigen::Index e = 0; e < obs; ++e) out << ",y_" << e;
  for (Eigen::Index d = 0; d < dim; ++d) out << ",x_" << d;
  out << "\n";
  for (Eigen::Index t = 0; t < data.y.rows(); ++t) {
    out << t;
    for (Eigen::Index e = 0; e < obs; ++e) out << "," << format_double(data.y(t, e));
    for (Eigen::Index d = 0; d < dim; ++d) out << "," << format_double((*data.x_true)(t, d));
    out << "\n";
  }

  nlohmann::json meta;
  meta["seed"] = data.meta.seed;
  meta["Q"] = matrix_to_json(data.meta.q);
  meta["R"] = matrix_to_json(data.meta.r);
  meta["T"] = data.meta.length;
  meta["generator"] = data.meta.generator;
  std::ofstream js(json);
  if (!js) throw std::runtime_error("cannot open " + json.string());
  js << meta.dump(2) << "\n";
}

Dataset read_dataset(const std::filesystem::path& csv, const std::optional<std::filesystem::path>& json) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot open " + csv.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  Eigen::Index obs = 0;
  Eigen::Index dim = 0;
  for (const auto& h : header) {
    if (h.rfind("y_", 0) == 0) ++obs;
    if (h.rfind("x_", 0) == 0) ++dim;
  }
  if (header.empty() || header[0] != "t" || obs == 0) {
    throw std::runtime_error("read_dataset: malformed header in " + csv.string());
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<Eigen::Index>(row.size()) != 1 + obs + dim) {
      throw std::runtime_error("read_dataset: ragged row in " + csv.string());
    }
    rows.push_back(std::move(row));
  }
  Dataset data;
  const auto length = static_cast<Eigen::Index>(rows.size());
  data.y.resize(length, obs);
  MatrixD x(length, dim);
  for (Eigen::Index t = 0; t < length; ++t) {
    for (Eigen::Index e = 0; e < obs; ++e) data.y(t, e) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(1 + e)];
    for (Eigen::Index d = 0; d < dim; ++d) x(t, d) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(1 + obs + d)];
  }
  if (dim > 0) data.x_true = std::move(x);
  data.meta.length = length;

  std::filesystem::path sidecar = json ? *json : std::filesystem::path(csv).replace_extension(".json");
  if (std::filesystem::exists(sidecar)) {
    std::ifstream js(sidecar);
    const auto meta = nlohmann::json::parse(js);
    data.meta.seed = meta.value("seed", std::uint64_t{0});
    if (meta.contains("Q")) data.meta.q = matrix_from_json(meta["Q"]);
    if (meta.contains("R")) data.meta.r = matrix_from_json(meta["R"]);
    data.meta.generator = meta.value("generator", std::string{});
  }
  data.validate();
  return data;
}

}  // namespace gpssm
