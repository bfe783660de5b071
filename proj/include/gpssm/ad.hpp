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

#ifndef GPSSM_AD_HPP
#define GPSSM_AD_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace gpssm::ad {

class Var;

/// Append-only record of elementary operations for reverse-mode
/// differentiation. Node i stores its parents and the local partials
/// d node_i / d parent. One tape per thread; see ScopedTape.
class Tape {
 public:
  Tape();

  Var variable(double value);

  std::int32_t push(double value, std::span<const std::int32_t> parents,
                    std::span<const double> partials);
  std::int32_t push1(std::int32_t p, double d);
  std::int32_t push2(std::int32_t p0, double d0, std::int32_t p1, double d1);

  /// Adjoints of every node with respect to `output`.
  std::vector<double> adjoints(const Var& output) const;

  /// Reverse sweep over every node starting from the adjoints already in
  /// `adj` (resized to the tape length).
  void propagate(std::vector<double>& adj) const;

  std::size_t size() const { return offsets_.size() - 1; }
  std::size_t edges() const { return parents_.size(); }
  void clear();

 private:
  void sweep(std::vector<double>& adj, std::size_t end) const;

  std::vector<std::uint32_t> offsets_;
  std::vector<std::int32_t> parents_;
  std::vector<double> partials_;
};

/// The tape receiving new nodes on the calling thread, or nullptr.
Tape* active_tape();

class ScopedTape {
 public:
  explicit ScopedTape(Tape& tape);
  ~ScopedTape();
  ScopedTape(const ScopedTape&) = delete;
  ScopedTape& operator=(const ScopedTape&) = delete;

 private:
  Tape* previous_;
};

/// Scalar that records its history on the active tape. A Var built from a
/// plain double is a constant and never touches the tape.
class Var {
 public:
  Var() = default;
  Var(double v) : value_(v) {}  // NOLINT(google-explicit-constructor)
  Var(int v) : value_(v) {}     // NOLINT(google-explicit-constructor)

  static Var node(double v, std::int32_t index) {
    Var r(v);
    r.index_ = index;
    return r;
  }

  double value() const { return value_; }
  std::int32_t index() const { return index_; }
  bool is_constant() const { return index_ < 0; }

  Var& operator+=(const Var& o);
  Var& operator-=(const Var& o);
  Var& operator*=(const Var& o);
  Var& operator/=(const Var& o);

 private:
  double value_ = 0.0;
  std::int32_t index_ = -1;
};

namespace detail {

inline Var unary(const Var& a, double value, double d) {
  if (a.is_constant()) return Var(value);
  return Var::node(value, active_tape()->push1(a.index(), d));
}

inline Var binary(const Var& a, const Var& b, double value, double da,
                  double db) {
  if (a.is_constant() && b.is_constant()) return Var(value);
  if (a.is_constant()) return Var::node(value, active_tape()->push1(b.index(), db));
  if (b.is_constant()) return Var::node(value, active_tape()->push1(a.index(), da));
  return Var::node(value, active_tape()->push2(a.index(), da, b.index(), db));
}

}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  return detail::binary(a, b, a.value() + b.value(), 1.0, 1.0);
}
inline Var operator-(const Var& a, const Var& b) {
  return detail::binary(a, b, a.value() - b.value(), 1.0, -1.0);
}
inline Var operator*(const Var& a, const Var& b) {
  return detail::binary(a, b, a.value() * b.value(), b.value(), a.value());
}
inline Var operator/(const Var& a, const Var& b) {
  const double q = a.value() / b.value();
  return detail::binary(a, b, q, 1.0 / b.value(), -q / b.value());
}
inline Var operator-(const Var& a) { return detail::unary(a, -a.value(), -1.0); }
inline Var operator+(const Var& a) { return a; }

inline Var& Var::operator+=(const Var& o) { return *this = *this + o; }
inline Var& Var::operator-=(const Var& o) { return *this = *this - o; }
inline Var& Var::operator*=(const Var& o) { return *this = *this * o; }
inline Var& Var::operator/=(const Var& o) { return *this = *this / o; }

inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }
inline bool operator==(const Var& a, const Var& b) { return a.value() == b.value(); }
inline bool operator!=(const Var& a, const Var& b) { return a.value() != b.value(); }

inline Var exp(const Var& a) {
  const double e = std::exp(a.value());
  return detail::unary(a, e, e);
}
inline Var log(const Var& a) {
  return detail::unary(a, std::log(a.value()), 1.0 / a.value());
}
inline Var sqrt(const Var& a) {
  const double s = std::sqrt(a.value());
  return detail::unary(a, s, 0.5 / s);
}
inline Var abs(const Var& a) {
  return detail::unary(a, std::abs(a.value()), a.value() < 0 ? -1.0 : 1.0);
}
inline Var abs2(const Var& a) { return a * a; }
inline Var conj(const Var& a) { return a; }
inline Var real(const Var& a) { return a; }
inline Var imag(const Var&) { return Var(0.0); }
inline bool isfinite(const Var& a) { return std::isfinite(a.value()); }
inline bool isnan(const Var& a) { return std::isnan(a.value()); }

/// a - sum_k x[k] * y[k] as a single tape node.
Var dot_sub(const Var& a, std::span<const Var> x, std::span<const Var> y);

/// sum_k x[k] * x[k] as a single tape node.
Var sum_squares(std::span<const Var> x);

}  // namespace gpssm::ad

namespace Eigen {

template <>
struct NumTraits<gpssm::ad::Var> : NumTraits<double> {
  using Real = gpssm::ad::Var;
  using NonInteger = gpssm::ad::Var;
  using Nested = gpssm::ad::Var;
  using Literal = gpssm::ad::Var;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3
  };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<gpssm::ad::Var, double, BinaryOp> {
  using ReturnType = gpssm::ad::Var;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, gpssm::ad::Var, BinaryOp> {
  using ReturnType = gpssm::ad::Var;
};

}  // namespace Eigen

#endif  // GPSSM_AD_HPP
