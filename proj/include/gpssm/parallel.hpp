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

#ifndef GPSSM_PARALLEL_HPP
#define GPSSM_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <vector>

namespace gpssm {

/// Serial is the reference path; Parallel distributes indices over OpenMP
/// threads. Both write results into per-index slots, so reductions done by
/// the caller in index order are identical between the two.
enum class Execution { Serial, Parallel };

template <class Body>
void for_each_index(std::size_t n, Execution execution, Body&& body) {
  if (execution == Execution::Serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Caps the OpenMP thread count; 0 leaves the runtime default.
void set_thread_limit(int threads);
int thread_limit();

}  // namespace gpssm

#endif  // GPSSM_PARALLEL_HPP
