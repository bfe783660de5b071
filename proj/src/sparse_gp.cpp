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

#include "gpssm/sparse_gp.hpp"

namespace gpssm {

MatrixD separate_duplicates(MatrixD z) {
  for (Eigen::Index i = 1; i < z.rows(); ++i) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (Eigen::Index j = 0; j < i; ++j) {
        if ((z.row(i) - z.row(j)).cwiseAbs().maxCoeff() < kMinInducingSeparation) {
          z(i, 0) += 2.0 * kMinInducingSeparation;
          moved = true;
        }
      }
    }
  }
  return z;
}

}  // namespace gpssm
