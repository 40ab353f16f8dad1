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

// Naive reference implementations used by the tests and `selfcheck`. They
// favour obviousness over speed and share no code with the kernels they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cystseg/image.hpp"
#include "cystseg/nn/tensor.hpp"

namespace cystseg::oracle {

inline int clamp_to(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

inline std::uint16_t round_u8(double v) {
  v = std::round(v);
  if (v < 0) v = 0;
  if (v > 255) v = 255;
  return static_cast<std::uint16_t>(v);
}

/// Brute-force non-local means: for every pixel, every search offset, and
/// every patch element, in raster order.
inline Image<std::uint16_t> nlm(const Image<std::uint16_t>& img, int search, int patch, double h) {
  const int H = img.height(), W = img.width();
  const int rs = search / 2, rp = patch / 2;
  auto at = [&](int r, int c) { return static_cast<long long>(img(clamp_to(r, H), clamp_to(c, W))); };
  Image<std::uint16_t> out(H, W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double num = 0.0, den = 0.0;
      for (int dy = -rs; dy <= rs; ++dy) {
        for (int dx = -rs; dx <= rs; ++dx) {
          long long ssd = 0;
          for (int py = -rp; py <= rp; ++py)
            for (int px = -rp; px <= rp; ++px) {
              const long long d = at(y + py, x + px) - at(y + dy + py, x + dx + px);
              ssd += d * d;
            }
          const double d2 = static_cast<double>(ssd) / (static_cast<double>(patch) * patch);
          const double w = std::exp(-std::max(d2, 0.0) / (h * h));
          num += w * static_cast<double>(at(y + dy, x + dx));
          den += w;
        }
      }
      out(y, x) = round_u8(num / den);
    }
  }
  return out;
}

/// Plain global histogram equalization: v -> round(255 * cdf(v) / n).
inline Image<std::uint16_t> equalize(const Image<std::uint16_t>& img) {
  std::array<long long, 256> hist{};
  for (auto v : img.pixels()) ++hist[std::min<int>(v, 255)];
  std::array<long long, 256> cdf{};
  long long run = 0;
  for (int v = 0; v < 256; ++v) cdf[v] = run += hist[v];
  const double n = static_cast<double>(img.size());
  Image<std::uint16_t> out(img.height(), img.width());
  for (std::size_t i = 0; i < img.size(); ++i) out.pixels()[i] = round_u8(255.0 * cdf[std::min<int>(img.pixels()[i], 255)] / n);
  return out;
}

/// Tile-mapping CLAHE: the clipped, redistributed equalization of each tile is
/// evaluated on demand and blended bilinearly between the nearest tile centers.
inline Image<std::uint16_t> clahe(const Image<std::uint16_t>& img, int tiles_y, int tiles_x, double clip_limit) {
  const int H = img.height(), W = img.width();
  auto lo = [](int i, int n, int parts) { return static_cast<int>(static_cast<long long>(i) * n / parts); };
  auto tile_map = [&](int ty, int tx, int v) {
    const int r0 = lo(ty, H, tiles_y), r1 = lo(ty + 1, H, tiles_y);
    const int c0 = lo(tx, W, tiles_x), c1 = lo(tx + 1, W, tiles_x);
    std::vector<double> hist(256, 0.0);
    for (int r = r0; r < r1; ++r)
      for (int c = c0; c < c1; ++c) hist[std::min<int>(img(r, c), 255)] += 1;
    const double n = static_cast<double>(r1 - r0) * (c1 - c0);
    const double clip = clip_limit * n / 256.0;
    double excess = 0.0;
    for (double& b : hist)
      if (b > clip) excess += b - clip, b = clip;
    double cdf = 0.0;
    for (int k = 0; k <= v; ++k) cdf += hist[k] + excess / 256.0;
    return 255.0 * cdf / n;
  };
  // Returns the two neighbouring tiles along one axis and the weight of the second.
  auto neighbours = [&](int pos, int n, int parts, int& a, int& b, double& w) {
    std::vector<double> centers;
    for (int t = 0; t < parts; ++t) centers.push_back((lo(t, n, parts) + lo(t + 1, n, parts) - 1) * 0.5);
    a = b = 0;
    w = 0.0;
    if (pos <= centers.front()) return;
    if (pos >= centers.back()) {
      a = b = parts - 1;
      return;
    }
    for (int t = 0; t + 1 < parts; ++t)
      if (pos >= centers[t] && pos < centers[t + 1]) {
        a = t;
        b = t + 1;
        w = (pos - centers[t]) / (centers[t + 1] - centers[t]);
      }
  };
  Image<std::uint16_t> out(H, W);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      int ya, yb, xa, xb;
      double wy, wx;
      neighbours(r, H, tiles_y, ya, yb, wy);
      neighbours(c, W, tiles_x, xa, xb, wx);
      const int v = std::min<int>(img(r, c), 255);
      const double val = (1 - wy) * ((1 - wx) * tile_map(ya, xa, v) + wx * tile_map(ya, xb, v)) +
                         wy * ((1 - wx) * tile_map(yb, xa, v) + wx * tile_map(yb, xb, v));
      out(r, c) = round_u8(val);
    }
  return out;
}

/// Per-pixel closed-form bilinear resize, half-pixel centers, edge clamp.
inline Image<std::uint16_t> bilinear(const Image<std::uint16_t>& img, int out_h, int out_w) {
  const int H = img.height(), W = img.width();
  Image<std::uint16_t> out(out_h, out_w);
  for (int i = 0; i < out_h; ++i)
    for (int j = 0; j < out_w; ++j) {
      double y = (i + 0.5) * H / out_h - 0.5;
      double x = (j + 0.5) * W / out_w - 0.5;
      y = std::clamp(y, 0.0, H - 1.0);
      x = std::clamp(x, 0.0, W - 1.0);
      const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
      const int y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
      const double fy = y - y0, fx = x - x0;
      const double v = img(y0, x0) * (1 - fy) * (1 - fx) + img(y0, x1) * (1 - fy) * fx +
                       img(y1, x0) * fy * (1 - fx) + img(y1, x1) * fy * fx;
      out(i, j) = static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, 65535.0));
    }
  return out;
}

/// Reflect-101 padding by walking the mirror explicitly.
inline Image<std::uint16_t> reflect_pad(const Image<std::uint16_t>& img, int pad) {
  const int H = img.height(), W = img.width();
  auto mirror = [](int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  Image<std::uint16_t> out(H + 2 * pad, W + 2 * pad);
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c) out(r, c) = img(mirror(r - pad, H), mirror(c - pad, W));
  return out;
}

/// Direct-summation convolution (cross-correlation) over NCHW / OIHW tensors.
template <typename T>
nn::Tensor<T> conv2d(const nn::Tensor<T>& x, const nn::Tensor<T>& w, const std::vector<T>& bias, int stride, int pad) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(0), K = w.dim(2);
  const int OH = (H + 2 * pad - K) / stride + 1, OW = (W + 2 * pad - K) / stride + 1;
  nn::Tensor<T> y({N, O, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o)
      for (int i = 0; i < OH; ++i)
        for (int j = 0; j < OW; ++j) {
          double s = bias.empty() ? 0.0 : static_cast<double>(bias[o]);
          for (int c = 0; c < C; ++c)
            for (int ki = 0; ki < K; ++ki)
              for (int kj = 0; kj < K; ++kj) {
                const int r = i * stride - pad + ki, q = j * stride - pad + kj;
                if (r < 0 || r >= H || q < 0 || q >= W) continue;
                s += static_cast<double>(x[((static_cast<std::size_t>(n) * C + c) * H + r) * W + q]) *
                     static_cast<double>(w[((static_cast<std::size_t>(o) * C + c) * K + ki) * K + kj]);
              }
          y[((static_cast<std::size_t>(n) * O + o) * OH + i) * OW + j] = static_cast<T>(s);
        }
  return y;
}

}  // namespace cystseg::oracle
