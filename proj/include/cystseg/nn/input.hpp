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

#include <cstdint>

#include "cystseg/image.hpp"

namespace cystseg::nn {

/// Network input scaling for 8-bit intensities.
template <typename T>
constexpr T scale_intensity(std::uint8_t v) noexcept {
  return static_cast<T>(v) / T{255};
}

template <typename T>
void write_patch(const Image<std::uint8_t>& patch, T* dst) {
  for (std::size_t i = 0; i < patch.size(); ++i) dst[i] = scale_intensity<T>(patch.pixels()[i]);
}

}  // namespace cystseg::nn
