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
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cystseg/error.hpp"
#include "cystseg/nn/ops.hpp"
#include "cystseg/nn/tensor.hpp"

namespace cystseg::nn {

/// Residual patch classifier layout: 3x3 stem, stages of basic blocks, global
/// average pool, fully connected head. Stages after the first open with a
/// stride-2 block whose shortcut is a 1x1 projection.
struct ModelSpec {
  int in_channels = 1;
  int input_size = 11;
  int stem_width = 16;
  std::vector<int> widths = {16, 32, 64, 128};
  int blocks_per_stage = 2;
  int num_classes = 2;

  void validate() const {
    if (in_channels < 1 || input_size < 1 || stem_width < 1 || blocks_per_stage < 1 || num_classes < 2 ||
        widths.empty())
      fail(Errc::InvalidConfig, "invalid model spec");
    for (int w : widths)
      if (w < 1) fail(Errc::InvalidConfig, "stage widths must be positive");
  }
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

inline void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = {{"in_channels", s.in_channels}, {"input_size", s.input_size},          {"stem_width", s.stem_width},
       {"widths", s.widths},           {"blocks_per_stage", s.blocks_per_stage}, {"num_classes", s.num_classes}};
}

inline void from_json(const nlohmann::json& j, ModelSpec& s) {
  s.in_channels = j.value("in_channels", s.in_channels);
  s.input_size = j.value("input_size", s.input_size);
  s.stem_width = j.value("stem_width", s.stem_width);
  s.widths = j.value("widths", s.widths);
  s.blocks_per_stage = j.value("blocks_per_stage", s.blocks_per_stage);
  s.num_classes = j.value("num_classes", s.num_classes);
  s.validate();
}

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T>* tensor;
  bool trainable;  // false for batch-norm running statistics
};

template <typename T>
using TensorVisitor = std::function<void(const std::string&, Tensor<T>&, bool trainable)>;

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in, int out, int kernel, int stride, int pad) : weight({out, in, kernel, kernel}), stride_(stride), pad_(pad) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    if (mode == Mode::Train) input_ = x;
    return conv2d_forward(x, weight, bias_, stride_, pad_);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (!input_) fail(Errc::NotForwarded, "conv backward without a train-mode forward");
    weight.ensure_grad();
    Tensor<T> dx = conv2d_backward(*input_, weight, dy, stride_, pad_, weight.grad(), std::span<T>{});
    input_.reset();
    return dx;
  }

  void he_init(std::mt19937_64& rng) {
    const double fan_in = static_cast<double>(weight.dim(1)) * weight.dim(2) * weight.dim(3);
    std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / fan_in));
    for (auto& v : weight.values()) v = static_cast<T>(nd(rng));
  }

  void visit(const std::string& prefix, const TensorVisitor<T>& fn) { fn(prefix + ".weight", weight, true); }

  int stride() const { return stride_; }
  int pad() const { return pad_; }

  Tensor<T> weight;

 private:
  Tensor<T> bias_;
  int stride_ = 1;
  int pad_ = 0;
  std::optional<Tensor<T>> input_;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels) : params(channels) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    if (mode == Mode::Eval) return batchnorm_forward(x, params, mode);
    cache_.emplace();
    return batchnorm_forward(x, params, mode, &*cache_);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (!cache_) fail(Errc::NotForwarded, "batchnorm backward without a train-mode forward");
    Tensor<T> dx = batchnorm_backward(dy, params, *cache_);
    cache_.reset();
    return dx;
  }

  void visit(const std::string& prefix, const TensorVisitor<T>& fn) {
    fn(prefix + ".gamma", params.gamma, true);
    fn(prefix + ".beta", params.beta, true);
    fn(prefix + ".running_mean", params.running_mean, false);
    fn(prefix + ".running_var", params.running_var, false);
  }

  BatchNormParams<T> params;

 private:
  std::optional<BatchNormCache<T>> cache_;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out) : weight({out, in}), bias({out}) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    if (mode == Mode::Train) input_ = x;
    return linear_forward(x, weight, bias);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (!input_) fail(Errc::NotForwarded, "linear backward without a train-mode forward");
    weight.ensure_grad();
    bias.ensure_grad();
    Tensor<T> dx = linear_backward(*input_, weight, dy, weight.grad(), bias.grad());
    input_.reset();
    return dx;
  }

  void init(std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, std::sqrt(1.0 / weight.dim(1)));
    for (auto& v : weight.values()) v = static_cast<T>(nd(rng));
  }

  void visit(const std::string& prefix, const TensorVisitor<T>& fn) {
    fn(prefix + ".weight", weight, true);
    fn(prefix + ".bias", bias, true);
  }

  Tensor<T> weight, bias;

 private:
  std::optional<Tensor<T>> input_;
};

/// y = relu(shortcut(x) + f(x)), f = conv-bn-relu-conv-bn.
template <typename T>
class BasicBlock {
 public:
  BasicBlock() = default;
  BasicBlock(int in, int out, int stride)
      : conv1(in, out, 3, stride, 1), bn1(out), conv2(out, out, 3, 1, 1), bn2(out) {
    if (stride != 1 || in != out) {
      proj.emplace(in, out, 1, stride, 0);
      proj_bn.emplace(out);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    Tensor<T> h = relu_forward(bn1.forward(conv1.forward(x, mode), mode));
    Tensor<T> f = bn2.forward(conv2.forward(h, mode), mode);
    Tensor<T> s = proj ? proj_bn->forward(proj->forward(x, mode), mode) : x;
    Tensor<T> y = relu_forward(add(s, f));
    if (mode == Mode::Train) {
      hidden_ = std::move(h);
      output_ = y;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (!output_) fail(Errc::NotForwarded, "residual block backward without a train-mode forward");
    const Tensor<T> dsum = relu_backward(*output_, dy);
    Tensor<T> dh = relu_backward(*hidden_, conv2.backward(bn2.backward(dsum)));
    Tensor<T> dx = conv1.backward(bn1.backward(dh));
    const Tensor<T> dshort = proj ? proj->backward(proj_bn->backward(dsum)) : dsum;
    for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += dshort[i];
    hidden_.reset();
    output_.reset();
    return dx;
  }

  void init(std::mt19937_64& rng) {
    conv1.he_init(rng);
    conv2.he_init(rng);
    if (proj) proj->he_init(rng);
  }

  void visit(const std::string& prefix, const TensorVisitor<T>& fn) {
    conv1.visit(prefix + ".conv1", fn);
    bn1.visit(prefix + ".bn1", fn);
    conv2.visit(prefix + ".conv2", fn);
    bn2.visit(prefix + ".bn2", fn);
    if (proj) {
      proj->visit(prefix + ".proj", fn);
      proj_bn->visit(prefix + ".proj_bn", fn);
    }
  }

  Conv2d<T> conv1;
  BatchNorm2d<T> bn1;
  Conv2d<T> conv2;
  BatchNorm2d<T> bn2;
  std::optional<Conv2d<T>> proj;
  std::optional<BatchNorm2d<T>> proj_bn;

 private:
  std::optional<Tensor<T>> hidden_;
  std::optional<Tensor<T>> output_;
};

template <typename T>
class ResNet {
 public:
  explicit ResNet(ModelSpec spec = {}) : spec_(std::move(spec)) {
    spec_.validate();
    stem_ = Conv2d<T>(spec_.in_channels, spec_.stem_width, 3, 1, 1);
    stem_bn_ = BatchNorm2d<T>(spec_.stem_width);
    int in = spec_.stem_width;
    for (std::size_t s = 0; s < spec_.widths.size(); ++s) {
      for (int b = 0; b < spec_.blocks_per_stage; ++b) {
        const int stride = (s > 0 && b == 0) ? 2 : 1;
        blocks_.emplace_back(in, spec_.widths[s], stride);
        in = spec_.widths[s];
      }
    }
    fc_ = Linear<T>(in, spec_.num_classes);
  }

  /// He-normal convolutions, unit-gamma/zero-beta batch norms, seeded.
  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    stem_.he_init(rng);
    for (auto& b : blocks_) b.init(rng);
    fc_.init(rng);
  }

  /// x: N x C x S x S patches; returns N x num_classes logits.
  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    if (x.rank() != 4 || x.dim(1) != spec_.in_channels)
      fail(Errc::ShapeError, "model input must be N x " + std::to_string(spec_.in_channels) + " x H x W, got " +
                                 shape_string(x.shape()));
    Tensor<T> h = relu_forward(stem_bn_.forward(stem_.forward(x, mode), mode));
    if (mode == Mode::Train) stem_out_ = h;
    for (auto& b : blocks_) h = b.forward(h, mode);
    if (mode == Mode::Train) pooled_shape_ = h.shape();
    Tensor<T> logits = fc_.forward(global_avg_pool_forward(h), mode);
    if (mode == Mode::Train) forwarded_ = true;
    return logits;
  }

  /// Reverse-mode pass from d loss / d logits; parameter gradients accumulate.
  Tensor<T> backward(const Tensor<T>& dlogits) {
    if (!forwarded_) fail(Errc::NotForwarded, "backward called without a train-mode forward");
    Tensor<T> d = global_avg_pool_backward(pooled_shape_, fc_.backward(dlogits));
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d = it->backward(d);
    d = relu_backward(*stem_out_, d);
    d = stem_.backward(stem_bn_.backward(d));
    stem_out_.reset();
    forwarded_ = false;
    return d;
  }

  void visit(const TensorVisitor<T>& fn) {
    stem_.visit("stem", fn);
    stem_bn_.visit("stem_bn", fn);
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit("block" + std::to_string(i), fn);
    fc_.visit("fc", fn);
  }

  std::vector<NamedTensor<T>> tensors() {
    std::vector<NamedTensor<T>> out;
    visit([&](const std::string& name, Tensor<T>& t, bool trainable) { out.push_back({name, &t, trainable}); });
    return out;
  }

  std::vector<Tensor<T>*> parameters() {
    std::vector<Tensor<T>*> out;
    visit([&](const std::string&, Tensor<T>& t, bool trainable) {
      if (trainable) out.push_back(&t);
    });
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) {
      p->ensure_grad();
      p->zero_grad();
    }
  }

  const ModelSpec& spec() const { return spec_; }
  std::vector<BasicBlock<T>>& blocks() { return blocks_; }
  Linear<T>& head() { return fc_; }
  Conv2d<T>& stem() { return stem_; }
  BatchNorm2d<T>& stem_bn() { return stem_bn_; }

 private:
  ModelSpec spec_;
  Conv2d<T> stem_;
  BatchNorm2d<T> stem_bn_;
  std::vector<BasicBlock<T>> blocks_;
  Linear<T> fc_;
  std::optional<Tensor<T>> stem_out_;
  std::vector<int> pooled_shape_;
  bool forwarded_ = false;
};

/// Copies values (parameters and running statistics) between precisions.
template <typename U, typename T>
ResNet<U> convert(ResNet<T>& src) {
  ResNet<U> dst(src.spec());
  auto from = src.tensors();
  auto to = dst.tensors();
  for (std::size_t i = 0; i < from.size(); ++i)
    for (std::size_t k = 0; k < from[i].tensor->numel(); ++k)
      (*to[i].tensor)[k] = static_cast<U>((*from[i].tensor)[k]);
  return dst;
}

}  // namespace cystseg::nn
