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

// Forward/backward kernels for the layer types of the patch classifier.
// Activations are NCHW tensors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "cystseg/error.hpp"
#include "cystseg/nn/gemm.hpp"
#include "cystseg/nn/tensor.hpp"

namespace cystseg::nn {

enum class Mode { Train, Eval };

struct ConvGeometry {
  int batch, in_channels, in_h, in_w;
  int out_channels, kernel, stride, pad;
  int out_h, out_w;

  std::size_t patch_len() const { return static_cast<std::size_t>(in_channels) * kernel * kernel; }
  std::size_t positions() const { return static_cast<std::size_t>(out_h) * out_w; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad) {
  if (x.rank() != 4 || w.rank() != 4) fail(Errc::ShapeError, "conv2d expects NCHW input and OCkk weights");
  if (w.dim(1) != x.dim(1))
    fail(Errc::ShapeError, "conv2d channel mismatch: input " + shape_string(x.shape()) + ", weight " +
                               shape_string(w.shape()));
  if (w.dim(2) != w.dim(3)) fail(Errc::ShapeError, "conv2d expects square kernels");
  if (stride < 1 || pad < 0) fail(Errc::ShapeError, "conv2d stride must be >= 1 and pad >= 0");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), stride, pad, 0, 0};
  const int span_h = g.in_h + 2 * pad - g.kernel, span_w = g.in_w + 2 * pad - g.kernel;
  if (span_h < 0 || span_w < 0) fail(Errc::ShapeError, "conv2d kernel larger than padded input");
  g.out_h = span_h / stride + 1;
  g.out_w = span_w / stride + 1;
  return g;
}

namespace detail {

inline constexpr int kConvChunk = 256;

/// col[patch_len x (count * positions)] for samples [n0, n0 + count).
template <typename T>
void im2col(const ConvGeometry& g, const T* x, int n0, int count, std::vector<T>& col) {
  const std::size_t P = g.positions();
  const std::size_t cols = static_cast<std::size_t>(count) * P;
  col.assign(g.patch_len() * cols, T{0});
  for (int c = 0; c < g.in_channels; ++c)
    for (int ky = 0; ky < g.kernel; ++ky)
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* row = col.data() + ((static_cast<std::size_t>(c) * g.kernel + ky) * g.kernel + kx) * cols;
        for (int n = 0; n < count; ++n) {
          const T* plane = x + ((static_cast<std::size_t>(n0 + n) * g.in_channels + c) * g.in_h) * g.in_w;
          T* dst = row + static_cast<std::size_t>(n) * P;
          for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < g.in_w) dst[oy * g.out_w + ox] = plane[iy * g.in_w + ix];
            }
          }
        }
      }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const std::vector<T>& col, int n0, int count, T* dx) {
  const std::size_t P = g.positions();
  const std::size_t cols = static_cast<std::size_t>(count) * P;
  for (int c = 0; c < g.in_channels; ++c)
    for (int ky = 0; ky < g.kernel; ++ky)
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* row = col.data() + ((static_cast<std::size_t>(c) * g.kernel + ky) * g.kernel + kx) * cols;
        for (int n = 0; n < count; ++n) {
          T* plane = dx + ((static_cast<std::size_t>(n0 + n) * g.in_channels + c) * g.in_h) * g.in_w;
          const T* src = row + static_cast<std::size_t>(n) * P;
          for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < g.in_w) plane[iy * g.in_w + ix] += src[oy * g.out_w + ox];
            }
          }
        }
      }
}

}  // namespace detail

/// Cross-correlation. `bias` may be empty.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, int stride, int pad) {
  const ConvGeometry g = conv_geometry(x, w, stride, pad);
  if (!bias.empty() && bias.numel() != static_cast<std::size_t>(g.out_channels))
    fail(Errc::ShapeError, "conv2d bias length must equal output channels");
  Tensor<T> y({g.batch, g.out_channels, g.out_h, g.out_w});
  const std::size_t P = g.positions();
  std::vector<T> col, out;
  for (int n0 = 0; n0 < g.batch; n0 += detail::kConvChunk) {
    const int count = std::min(detail::kConvChunk, g.batch - n0);
    const std::size_t cols = static_cast<std::size_t>(count) * P;
    detail::im2col(g, x.data(), n0, count, col);
    out.resize(static_cast<std::size_t>(g.out_channels) * cols);
    gemm<T>(g.out_channels, cols, g.patch_len(), w.data(), col.data(), out.data(), false);
    for (int o = 0; o < g.out_channels; ++o) {
      const T b = bias.empty() ? T{0} : bias[o];
      for (int n = 0; n < count; ++n) {
        const T* src = out.data() + static_cast<std::size_t>(o) * cols + static_cast<std::size_t>(n) * P;
        T* dst = y.data() + (static_cast<std::size_t>(n0 + n) * g.out_channels + o) * P;
        for (std::size_t p = 0; p < P; ++p) dst[p] = src[p] + b;
      }
    }
  }
  return y;
}

/// Accumulates dW (and dBias when non-null) and returns dX.
template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, int stride, int pad,
                          std::span<T> dw, std::span<T> dbias) {
  const ConvGeometry g = conv_geometry(x, w, stride, pad);
  if (dy.shape() != std::vector<int>{g.batch, g.out_channels, g.out_h, g.out_w})
    fail(Errc::ShapeError, "conv2d_backward: upstream gradient shape mismatch");
  if (dw.size() != w.numel()) fail(Errc::ShapeError, "conv2d_backward: weight gradient buffer size mismatch");
  Tensor<T> dx(x.shape());
  const std::size_t P = g.positions();
  const std::size_t L = g.patch_len();
  std::vector<T> wt(L * g.out_channels);
  transpose<T>(g.out_channels, L, w.data(), wt.data());
  std::vector<T> col, colt, dmat, dcol;
  for (int n0 = 0; n0 < g.batch; n0 += detail::kConvChunk) {
    const int count = std::min(detail::kConvChunk, g.batch - n0);
    const std::size_t cols = static_cast<std::size_t>(count) * P;
    dmat.resize(static_cast<std::size_t>(g.out_channels) * cols);
    for (int o = 0; o < g.out_channels; ++o)
      for (int n = 0; n < count; ++n) {
        const T* src = dy.data() + (static_cast<std::size_t>(n0 + n) * g.out_channels + o) * P;
        std::copy(src, src + P, dmat.data() + static_cast<std::size_t>(o) * cols + static_cast<std::size_t>(n) * P);
      }
    if (!dbias.empty())
      for (int o = 0; o < g.out_channels; ++o) {
        T s{0};
        const T* row = dmat.data() + static_cast<std::size_t>(o) * cols;
        for (std::size_t j = 0; j < cols; ++j) s += row[j];
        dbias[o] += s;
      }
    detail::im2col(g, x.data(), n0, count, col);
    colt.resize(col.size());
    transpose<T>(L, cols, col.data(), colt.data());
    gemm<T>(g.out_channels, L, cols, dmat.data(), colt.data(), dw.data(), true);
    dcol.resize(L * cols);
    gemm<T>(L, cols, g.out_channels, wt.data(), dmat.data(), dcol.data(), false);
    detail::col2im_add(g, dcol, n0, count, dx.data());
  }
  return dx;
}

template <typename T>
struct BatchNormParams {
  Tensor<T> gamma, beta, running_mean, running_var;
  T momentum = T(0.1);
  T epsilon = T(1e-5);

  explicit BatchNormParams(int channels = 0)
      : gamma({channels}, T{1}), beta({channels}, T{0}), running_mean({channels}, T{0}), running_var({channels}, T{1}) {}
  int channels() const { return static_cast<int>(gamma.numel()); }
};

/// Per-channel statistics kept from a train-mode forward for the backward pass.
template <typename T>
struct BatchNormCache {
  Tensor<T> xhat;
  std::vector<T> inv_std;
};

/// Train mode normalizes with biased batch statistics and updates the running
/// statistics; eval mode uses the running statistics.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, BatchNormParams<T>& p, Mode mode, BatchNormCache<T>* cache = nullptr) {
  if (x.rank() != 4 || x.dim(1) != p.channels()) fail(Errc::ShapeError, "batchnorm channel mismatch");
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t S = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const std::size_t M = static_cast<std::size_t>(N) * S;
  if (M == 0) fail(Errc::ShapeError, "batchnorm on empty batch");
  Tensor<T> y(x.shape());
  if (cache) {
    cache->xhat = Tensor<T>(x.shape());
    cache->inv_std.assign(C, T{0});
  }
  for (int c = 0; c < C; ++c) {
    T mean, var;
    if (mode == Mode::Train) {
      T s{0};
      for (int n = 0; n < N; ++n) {
        const T* src = x.data() + (static_cast<std::size_t>(n) * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) s += src[i];
      }
      mean = s / static_cast<T>(M);
      T ss{0};
      for (int n = 0; n < N; ++n) {
        const T* src = x.data() + (static_cast<std::size_t>(n) * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) ss += (src[i] - mean) * (src[i] - mean);
      }
      var = ss / static_cast<T>(M);
      p.running_mean[c] = (T{1} - p.momentum) * p.running_mean[c] + p.momentum * mean;
      p.running_var[c] = (T{1} - p.momentum) * p.running_var[c] + p.momentum * var;
    } else {
      mean = p.running_mean[c];
      var = p.running_var[c];
    }
    const T inv_std = T{1} / std::sqrt(var + p.epsilon);
    const T g = p.gamma[c], b = p.beta[c];
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        const T xh = (x[off + i] - mean) * inv_std;
        if (cache) cache->xhat[off + i] = xh;
        y[off + i] = g * xh + b;
      }
    }
    if (cache) cache->inv_std[c] = inv_std;
  }
  return y;
}

/// Accumulates dGamma/dBeta into the parameter gradients and returns dX (train-mode statistics).
template <typename T>
Tensor<T> batchnorm_backward(const Tensor<T>& dy, BatchNormParams<T>& p, const BatchNormCache<T>& cache) {
  if (dy.shape() != cache.xhat.shape()) fail(Errc::ShapeError, "batchnorm_backward shape mismatch");
  const int N = dy.dim(0), C = dy.dim(1);
  const std::size_t S = static_cast<std::size_t>(dy.dim(2)) * dy.dim(3);
  const T M = static_cast<T>(static_cast<std::size_t>(N) * S);
  p.gamma.ensure_grad();
  p.beta.ensure_grad();
  Tensor<T> dx(dy.shape());
  for (int c = 0; c < C; ++c) {
    T dgamma{0}, dbeta{0};
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        dgamma += dy[off + i] * cache.xhat[off + i];
        dbeta += dy[off + i];
      }
    }
    p.gamma.grad()[c] += dgamma;
    p.beta.grad()[c] += dbeta;
    const T scale = p.gamma[c] * cache.inv_std[c] / M;
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * S;
      for (std::size_t i = 0; i < S; ++i)
        dx[off + i] = scale * (M * dy[off + i] - dbeta - cache.xhat[off + i] * dgamma);
    }
  }
  return dx;
}

namespace detail {
/// When set, relu_forward appends its activation pattern here (used by the
/// finite-difference checks to detect kink crossings).
inline thread_local std::vector<std::uint8_t>* relu_trace = nullptr;
}  // namespace detail

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  if (auto* trace = detail::relu_trace)
    for (std::size_t i = 0; i < x.numel(); ++i) trace->push_back(x[i] > T{0});
  return y;
}

/// `y` is the forward output.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = y[i] > T{0} ? dy[i] : T{0};
  return dx;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    fail(Errc::ShapeError, "add shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) y[i] = a[i] + b[i];
  return y;
}

template <typename T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x) {
  if (x.rank() != 4) fail(Errc::ShapeError, "global average pool expects NCHW");
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t S = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> y({N, C});
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(N) * C; ++nc) {
    T s{0};
    for (std::size_t i = 0; i < S; ++i) s += x[nc * S + i];
    y[nc] = s / static_cast<T>(S);
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const std::vector<int>& input_shape, const Tensor<T>& dy) {
  Tensor<T> dx(input_shape);
  const std::size_t S = static_cast<std::size_t>(input_shape[2]) * input_shape[3];
  for (std::size_t nc = 0; nc < dy.numel(); ++nc)
    for (std::size_t i = 0; i < S; ++i) dx[nc * S + i] = dy[nc] / static_cast<T>(S);
  return dx;
}

/// y[N x out] = x[N x in] W^T + b with W stored [out x in].
template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1) || b.numel() != static_cast<std::size_t>(w.dim(0)))
    fail(Errc::ShapeError, "linear shape mismatch");
  const std::size_t N = x.dim(0), in = w.dim(1), out = w.dim(0);
  std::vector<T> wt(in * out);
  transpose<T>(out, in, w.data(), wt.data());
  Tensor<T> y({static_cast<int>(N), static_cast<int>(out)});
  gemm<T>(N, out, in, x.data(), wt.data(), y.data(), false);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < out; ++o) y[n * out + o] += b[o];
  return y;
}

template <typename T>
Tensor<T> linear_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, std::span<T> dw,
                          std::span<T> db) {
  const std::size_t N = x.dim(0), in = w.dim(1), out = w.dim(0);
  if (dy.shape() != std::vector<int>{static_cast<int>(N), static_cast<int>(out)})
    fail(Errc::ShapeError, "linear_backward shape mismatch");
  std::vector<T> dyt(out * N);
  transpose<T>(N, out, dy.data(), dyt.data());
  gemm<T>(out, in, N, dyt.data(), x.data(), dw.data(), true);
  for (std::size_t o = 0; o < out; ++o) {
    T s{0};
    for (std::size_t n = 0; n < N; ++n) s += dyt[o * N + n];
    db[o] += s;
  }
  Tensor<T> dx(x.shape());
  gemm<T>(N, in, out, dy.data(), w.data(), dx.data(), false);
  return dx;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2) fail(Errc::ShapeError, "softmax expects N x K logits");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  Tensor<T> p(logits.shape());
  for (std::size_t n = 0; n < N; ++n) {
    const T* z = logits.data() + n * K;
    const T zmax = *std::max_element(z, z + K);
    T s{0};
    for (std::size_t k = 0; k < K; ++k) s += std::exp(z[k] - zmax);
    for (std::size_t k = 0; k < K; ++k) p[n * K + k] = std::exp(z[k] - zmax) / s;
  }
  return p;
}

template <typename T>
Tensor<T> one_hot(std::span<const int> labels, int classes) {
  Tensor<T> t({static_cast<int>(labels.size()), classes});
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] < 0 || labels[n] >= classes) fail(Errc::ShapeError, "label out of range for one-hot encoding");
    t[n * classes + labels[n]] = T{1};
  }
  return t;
}

template <typename T>
struct LossResult {
  T loss;
  Tensor<T> grad;  // d loss / d logits
};

/// Mean categorical cross-entropy of softmax(logits) against one-hot rows.
template <typename T>
LossResult<T> softmax_xent(const Tensor<T>& logits, const Tensor<T>& targets) {
  if (logits.shape() != targets.shape() || logits.rank() != 2)
    fail(Errc::ShapeError, "softmax_xent: logits and targets must both be N x K");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  if (N == 0) fail(Errc::ShapeError, "softmax_xent on empty batch");
  LossResult<T> r{T{0}, Tensor<T>(logits.shape())};
  for (std::size_t n = 0; n < N; ++n) {
    const T* z = logits.data() + n * K;
    const T zmax = *std::max_element(z, z + K);
    T s{0};
    for (std::size_t k = 0; k < K; ++k) s += std::exp(z[k] - zmax);
    const T log_s = std::log(s);
    for (std::size_t k = 0; k < K; ++k) {
      const T t = targets[n * K + k];
      const T log_p = z[k] - zmax - log_s;
      if (t != T{0}) r.loss -= t * log_p;
      r.grad[n * K + k] = (std::exp(log_p) - t) / static_cast<T>(N);
    }
  }
  r.loss /= static_cast<T>(N);
  return r;
}

}  // namespace cystseg::nn
