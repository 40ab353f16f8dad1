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
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cystseg/error.hpp"

namespace cystseg::nn {

/// Dense row-major array with a value buffer and an optional gradient buffer.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape, T fill = T{0}) : shape_(std::move(shape)) {
    value_.assign(count(shape_), fill);
  }
  Tensor(std::vector<int> shape, std::vector<T> values) : shape_(std::move(shape)), value_(std::move(values)) {
    if (value_.size() != count(shape_)) fail(Errc::ShapeError, "tensor value count does not match shape");
  }

  const std::vector<int>& shape() const noexcept { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return value_.size(); }
  bool empty() const noexcept { return value_.empty(); }

  T* data() noexcept { return value_.data(); }
  const T* data() const noexcept { return value_.data(); }
  std::span<T> values() noexcept { return value_; }
  std::span<const T> values() const noexcept { return value_; }
  T& operator[](std::size_t i) noexcept { return value_[i]; }
  const T& operator[](std::size_t i) const noexcept { return value_[i]; }

  bool has_grad() const noexcept { return grad_.size() == value_.size() && !value_.empty(); }
  void ensure_grad() {
    if (grad_.size() != value_.size()) grad_.assign(value_.size(), T{0});
  }
  void zero_grad() { std::fill(grad_.begin(), grad_.end(), T{0}); }
  std::span<T> grad() noexcept { return grad_; }
  std::span<const T> grad() const noexcept { return grad_; }

  void reshape(std::vector<int> shape) {
    if (count(shape) != value_.size()) fail(Errc::ShapeError, "reshape changes element count");
    shape_ = std::move(shape);
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.value_ == b.value_; }

  static std::size_t count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      if (d < 0) fail(Errc::ShapeError, "negative tensor dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

 private:
  std::vector<int> shape_;
  std::vector<T> value_;
  std::vector<T> grad_;
};

inline std::string shape_string(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + ")";
}

template <typename U, typename T>
Tensor<U> cast(const Tensor<T>& t) {
  std::vector<U> v(t.values().begin(), t.values().end());
  return Tensor<U>(t.shape(), std::move(v));
}

}  // namespace cystseg::nn
