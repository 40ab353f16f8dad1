// Copyright 2026 The cystseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>

namespace cystseg::nn {

/// C[M x N] (+)= A[M x K] * B[K x N], all row-major and densely packed.
/// Each C element accumulates its K products in increasing k, so a result
/// never depends on M, N, or blocking.
template <typename T>
void gemm(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C, bool accumulate) {
  if (!accumulate) std::fill(C, C + M * N, T{0});
  constexpr std::size_t kColBlock = 512;
  for (std::size_t j0 = 0; j0 < N; j0 += kColBlock) {
    const std::size_t jn = std::min(N, j0 + kColBlock) - j0;
    std::size_t i = 0;
    for (; i + 4 <= M; i += 4) {
      T* __restrict c0 = C + (i + 0) * N + j0;
      T* __restrict c1 = C + (i + 1) * N + j0;
      T* __restrict c2 = C + (i + 2) * N + j0;
      T* __restrict c3 = C + (i + 3) * N + j0;
      for (std::size_t k = 0; k < K; ++k) {
        const T a0 = A[(i + 0) * K + k], a1 = A[(i + 1) * K + k];
        const T a2 = A[(i + 2) * K + k], a3 = A[(i + 3) * K + k];
        const T* __restrict b = B + k * N + j0;
        for (std::size_t j = 0; j < jn; ++j) {
          const T bj = b[j];
          c0[j] += a0 * bj;
          c1[j] += a1 * bj;
          c2[j] += a2 * bj;
          c3[j] += a3 * bj;
        }
      }
    }
    for (; i < M; ++i) {
      T* c = C + i * N + j0;
      for (std::size_t k = 0; k < K; ++k) {
        const T a = A[i * K + k];
        const T* b = B + k * N + j0;
        for (std::size_t j = 0; j < jn; ++j) c[j] += a * b[j];
      }
    }
  }
}

/// out[cols x rows] = in[rows x cols]^T
template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* in, T* out) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile)
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile)
      for (std::size_t r = r0; r < std::min(rows, r0 + kTile); ++r)
        for (std::size_t c = c0; c < std::min(cols, c0 + kTile); ++c) out[c * rows + r] = in[r * cols + c];
}

}  // namespace cystseg::nn
