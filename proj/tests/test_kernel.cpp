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
#include "gpssm/kernel.hpp"
#include "support.hpp"

using namespace gpssm;
using namespace gpssm::testing;

namespace {
double k1(double a, double b, const RbfParams<double>& p) {
  return kern(std::span<const double>(&a, 1), std::span<const double>(&b, 1), p);
}
}  // namespace

TEST_CASE("kern at zero distance is the variance") {
  Rng rng(1);
  const RbfParams<double> p = random_kernel(rng, 3);
  const VectorD x = random_matrix(rng, 3, 1).col(0);
  const std::span<const double> s(x.data(), 3);
  CHECK(kern(s, s, p) == p.variance);
}

TEST_CASE("kern with unit parameters at unit distance") {
  const auto p = RbfParams<double>::defaults(1);
  CHECK(k1(0.0, 1.0, p) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(k1(0.0, 1.0, p) == doctest::Approx(0.6065306597).epsilon(1e-9));
}

TEST_CASE("kern vanishes at large separation") { CHECK(k1(0.0, 100.0, RbfParams<double>::defaults(1)) < 1e-100); }

TEST_CASE("kern_matrix of a single point") {
  RbfParams<double> p = RbfParams<double>::defaults(1);
  p.variance = 2.5;
  const MatrixD x = MatrixD::Constant(1, 1, 0.3);
  const MatrixD k = kern_matrix(x, x, p);
  CHECK(k.rows() == 1);
  CHECK(k(0, 0) == 2.5);
}

TEST_CASE("kern_gram on {-1, 0, 1}") {
  MatrixD x(3, 1);
  x << -1, 0, 1;
  const MatrixD k = kern_gram(x, RbfParams<double>::defaults(1));
  CHECK(k(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(k(1, 2) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(k(0, 2) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
}

TEST_CASE("kern_matrix is symmetric with diagonal kern_diag") {
  Rng rng(2);
  const RbfParams<double> p = random_kernel(rng, 2);
  const MatrixD x = random_matrix(rng, 15, 2);
  const MatrixD k = kern_matrix(x, x, p);
  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((k.diagonal() - kern_diag(x, p)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((kern_gram(x, p) - k).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ARD kernel matches the product of 1-D kernels") {
  Rng rng(3);
  const RbfParams<double> p = random_kernel(rng, 3);
  const VectorD a = random_matrix(rng, 3, 1).col(0);
  const VectorD b = random_matrix(rng, 3, 1).col(0);
  double expected = p.variance;
  for (int d = 0; d < 3; ++d) {
    const double r = (a(d) - b(d)) / p.lengthscales(d);
    expected *= std::exp(-0.5 * r * r);
  }
  CHECK(kern(std::span<const double>(a.data(), 3), std::span<const double>(b.data(), 3), p) ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("Gram plus small jitter factorizes for random inputs") {
  Rng rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index n = 20 * (rep + 1);
    const RbfParams<double> p = random_kernel(rng, 2);
    const MatrixD x = random_matrix(rng, n, 2, 2.0);
    CHECK_NOTHROW(cholesky_lower<double>(kern_gram(x, p), 1e-8 * 200.0));
  }
}

TEST_CASE("kern is translation invariant and scale covariant") {
  Rng rng(5);
  const RbfParams<double> p = random_kernel(rng, 2);
  const VectorD a = random_matrix(rng, 2, 1).col(0);
  const VectorD b = random_matrix(rng, 2, 1).col(0);
  const VectorD shift = random_matrix(rng, 2, 1, 3.0).col(0);
  const auto k = [](const VectorD& x, const VectorD& y, const RbfParams<double>& q) {
    return kern(std::span<const double>(x.data(), 2), std::span<const double>(y.data(), 2), q);
  };
  CHECK(k(a + shift, b + shift, p) == doctest::Approx(k(a, b, p)).epsilon(1e-12));
  RbfParams<double> scaled = p;
  scaled.lengthscales *= 3.7;
  CHECK(k(VectorD(a * 3.7), VectorD(b * 3.7), scaled) == doctest::Approx(k(a, b, p)).epsilon(1e-12));
}

TEST_CASE("RbfParams validation rejects non-positive values") {
  RbfParams<double> p = RbfParams<double>::defaults(2);
  p.lengthscales(1) = 0.0;
  CHECK_THROWS(p.validate());
  p = RbfParams<double>::defaults(2);
  p.variance = -1.0;
  CHECK_THROWS(p.validate());
}
