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

#include <cmath>
#include <cstdint>
#include <vector>

#include "cystseg/error.hpp"
#include "cystseg/nn/tensor.hpp"

namespace cystseg::nn {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::vector<std::vector<T>> m, v;
  std::int64_t t = 0;
};

/// One bias-corrected Adam update of every parameter from its grad buffer.
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, AdamState<T>& state) {
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->numel(), T{0});
      state.v.emplace_back(p->numel(), T{0});
    }
  }
  if (state.m.size() != params.size()) fail(Errc::ShapeError, "Adam state does not match parameter list");
  ++state.t;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    if (state.m[i].size() != p.numel() || !p.has_grad()) fail(Errc::ShapeError, "Adam buffer/gradient shape mismatch");
    auto g = p.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < p.numel(); ++k) {
      m[k] = static_cast<T>(c.beta1 * m[k] + (1.0 - c.beta1) * g[k]);
      v[k] = static_cast<T>(c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k]);
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] = static_cast<T>(p[k] - c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon));
    }
  }
}

}  // namespace cystseg::nn
