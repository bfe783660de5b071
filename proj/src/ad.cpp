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

#include "gpssm/ad.hpp"

#include <stdexcept>

namespace gpssm::ad {

namespace {
thread_local Tape* g_active = nullptr;
}

Tape* active_tape() {
  if (g_active == nullptr) {
    throw std::logic_error("ad: operation on a tracked Var without an active tape");
  }
  return g_active;
}

ScopedTape::ScopedTape(Tape& tape) : previous_(g_active) { g_active = &tape; }
ScopedTape::~ScopedTape() { g_active = previous_; }

Tape::Tape() { offsets_.push_back(0); }

void Tape::clear() {
  offsets_.assign(1, 0);
  parents_.clear();
  partials_.clear();
}

Var Tape::variable(double value) {
  offsets_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return Var::node(value, static_cast<std::int32_t>(size() - 1));
}

std::int32_t Tape::push(double, std::span<const std::int32_t> parents,
                        std::span<const double> partials) {
  parents_.insert(parents_.end(), parents.begin(), parents.end());
  partials_.insert(partials_.end(), partials.begin(), partials.end());
  offsets_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return static_cast<std::int32_t>(size() - 1);
}

std::int32_t Tape::push1(std::int32_t p, double d) {
  parents_.push_back(p);
  partials_.push_back(d);
  offsets_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return static_cast<std::int32_t>(size() - 1);
}

std::int32_t Tape::push2(std::int32_t p0, double d0, std::int32_t p1, double d1) {
  parents_.push_back(p0);
  parents_.push_back(p1);
  partials_.push_back(d0);
  partials_.push_back(d1);
  offsets_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return static_cast<std::int32_t>(size() - 1);
}

std::vector<double> Tape::adjoints(const Var& output) const {
  std::vector<double> adj(size(), 0.0);
  if (output.is_constant()) return adj;
  adj[static_cast<std::size_t>(output.index())] = 1.0;
  sweep(adj, static_cast<std::size_t>(output.index()) + 1);
  return adj;
}

void Tape::propagate(std::vector<double>& adj) const {
  adj.resize(size(), 0.0);
  sweep(adj, size());
}

void Tape::sweep(std::vector<double>& adj, std::size_t end) const {
  for (std::size_t i = end; i-- > 0;) {
    const double a = adj[i];
    if (a == 0.0) continue;
    for (std::uint32_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      adj[static_cast<std::size_t>(parents_[k])] += partials_[k] * a;
    }
  }
}

Var dot_sub(const Var& a, std::span<const Var> x, std::span<const Var> y) {
  double value = a.value();
  for (std::size_t k = 0; k < x.size(); ++k) value -= x[k].value() * y[k].value();

  thread_local std::vector<std::int32_t> parents;
  thread_local std::vector<double> partials;
  parents.clear();
  partials.clear();
  if (!a.is_constant()) {
    parents.push_back(a.index());
    partials.push_back(1.0);
  }
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!x[k].is_constant()) {
      parents.push_back(x[k].index());
      partials.push_back(-y[k].value());
    }
    if (!y[k].is_constant()) {
      parents.push_back(y[k].index());
      partials.push_back(-x[k].value());
    }
  }
  if (parents.empty()) return Var(value);
  return Var::node(value, active_tape()->push(value, parents, partials));
}

Var sum_squares(std::span<const Var> x) {
  double value = 0.0;
  thread_local std::vector<std::int32_t> parents;
  thread_local std::vector<double> partials;
  parents.clear();
  partials.clear();
  for (const Var& v : x) {
    value += v.value() * v.value();
    if (!v.is_constant()) {
      parents.push_back(v.index());
      partials.push_back(2.0 * v.value());
    }
  }
  if (parents.empty()) return Var(value);
  return Var::node(value, active_tape()->push(value, parents, partials));
}

}  // namespace gpssm::ad
