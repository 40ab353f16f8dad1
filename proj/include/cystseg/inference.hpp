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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cystseg/error.hpp"
#include "cystseg/image.hpp"
#include "cystseg/image_codec.hpp"
#include "cystseg/manifest.hpp"
#include "cystseg/nn/input.hpp"
#include "cystseg/nn/ops.hpp"
#include "cystseg/nn/resnet.hpp"
#include "cystseg/patchset.hpp"

namespace cystseg {

struct PredictionMap {
  Image<float> prob;  // cyst probability per pixel
  Mask mask;          // 1 iff prob > 0.5
  std::string volume_id;
  std::uint32_t frame_index = 0;
};

struct PredictOptions {
  int stride = 1;
  int batch_size = 1024;
  int patch_size = kPatchSize;
};

/// Reflect-101 padding; values are clamped to 8 bits.
inline Image<std::uint8_t> reflect_pad(const Image<std::uint16_t>& img, int pad) {
  Image<std::uint8_t> out(img.height() + 2 * pad, img.width() + 2 * pad);
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c)
      out(r, c) = static_cast<std::uint8_t>(
          std::min<int>(img(reflect_index(r - pad, img.height()), reflect_index(c - pad, img.width())), 255));
  return out;
}

/// Cyst probability of a single patch (eval mode).
inline float classify_patch(nn::ResNet<float>& model, const Image<std::uint8_t>& patch) {
  nn::Tensor<float> x({1, 1, patch.height(), patch.width()});
  nn::write_patch(patch, x.data());
  const auto p = nn::softmax(model.forward(x, nn::Mode::Eval));
  return p[1];
}

/// Dense classification: every pixel (stride 1) or one pixel per stride x
/// stride block is the center of a patch cut from the reflect-padded frame.
inline PredictionMap predict_frame(nn::ResNet<float>& model, const Frame& frame, const PredictOptions& opts = {}) {
  if (frame.height() < 1 || frame.width() < 1) fail(Errc::ShapeError, "cannot predict on an empty frame");
  if (opts.stride < 1 || opts.batch_size < 1) fail(Errc::InvalidConfig, "stride and batch_size must be >= 1");
  if (model.spec().input_size != opts.patch_size) fail(Errc::ShapeError, "model input size differs from patch size");
  const int H = frame.height(), W = frame.width(), s = opts.stride, n = opts.patch_size, half = n / 2;
  const Image<std::uint8_t> padded = reflect_pad(frame.pixels, half);

  struct Center {
    int row, col;
  };
  std::vector<Center> centers;
  for (int r0 = 0; r0 < H; r0 += s)
    for (int c0 = 0; c0 < W; c0 += s) centers.push_back({std::min(r0 + s / 2, H - 1), std::min(c0 + s / 2, W - 1)});

  std::vector<float> probs(centers.size());
  const std::size_t area = static_cast<std::size_t>(n) * n;
  for (std::size_t b = 0; b < centers.size(); b += opts.batch_size) {
    const std::size_t count = std::min<std::size_t>(opts.batch_size, centers.size() - b);
    nn::Tensor<float> x({static_cast<int>(count), 1, n, n});
    for (std::size_t i = 0; i < count; ++i) {
      float* dst = x.data() + i * area;
      const auto& c = centers[b + i];
      for (int r = 0; r < n; ++r)
        for (int q = 0; q < n; ++q) dst[r * n + q] = nn::scale_intensity<float>(padded(c.row + r, c.col + q));
    }
    const auto p = nn::softmax(model.forward(x, nn::Mode::Eval));
    for (std::size_t i = 0; i < count; ++i) probs[b + i] = p[i * 2 + 1];
  }

  PredictionMap out{Image<float>(H, W), Mask(H, W), {}, 0};
  std::size_t k = 0;
  for (int r0 = 0; r0 < H; r0 += s)
    for (int c0 = 0; c0 < W; c0 += s, ++k) {
      const float p = probs[k];
      const std::uint8_t label = p > 0.5f ? 1 : 0;
      for (int r = r0; r < std::min(H, r0 + s); ++r)
        for (int c = c0; c < std::min(W, c0 + s); ++c) {
          out.prob(r, c) = p;
          out.mask(r, c) = label;
        }
    }
  return out;
}

struct FrameSpacing {
  double pixel_size_x = 0.0;  // mm
  double pixel_size_y = 0.0;  // mm
};

struct VolumeQuantity {
  double volume_mm3 = 0.0;
  std::vector<double> areas_mm2;
};

/// area = cyst pixel count * pixel area; volume = sum(area * slice spacing).
inline VolumeQuantity quantify_volume(std::span<const Mask> masks, std::span<const FrameSpacing> spacings,
                                      double slice_spacing) {
  if (spacings.size() != masks.size()) fail(Errc::MissingSpacing, "one pixel spacing per frame is required");
  if (!(slice_spacing > 0.0)) fail(Errc::MissingSpacing, "slice spacing must be positive");
  VolumeQuantity q;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (!(spacings[i].pixel_size_x > 0.0) || !(spacings[i].pixel_size_y > 0.0))
      fail(Errc::MissingSpacing, "pixel spacing missing for frame " + std::to_string(i));
    const double area = static_cast<double>(count_ones(masks[i])) * spacings[i].pixel_size_x * spacings[i].pixel_size_y;
    q.areas_mm2.push_back(area);
    q.volume_mm3 += area * slice_spacing;
  }
  return q;
}

inline Image<std::uint8_t> probability_image(const Image<float>& prob) {
  Image<std::uint8_t> out(prob.height(), prob.width());
  for (std::size_t i = 0; i < prob.size(); ++i)
    out.pixels()[i] = static_cast<std::uint8_t>(std::clamp(std::round(prob.pixels()[i] * 255.0f), 0.0f, 255.0f));
  return out;
}

/// Gray pixels stay (v, v, v); cyst pixels become (255, v/2, v/2).
inline RgbImage render_overlay(const Image<std::uint16_t>& frame, const Mask& mask) {
  if (!frame.same_shape(Image<std::uint16_t>(mask.height(), mask.width())))
    fail(Errc::ShapeMismatch, "overlay frame and mask shapes differ");
  RgbImage img{frame.height(), frame.width(), std::vector<std::uint8_t>(frame.size() * 3)};
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const auto v = static_cast<std::uint8_t>(std::min<int>(frame.pixels()[i], 255));
    std::uint8_t* px = img.rgb.data() + 3 * i;
    if (mask.pixels()[i]) {
      px[0] = 255;
      px[1] = px[2] = static_cast<std::uint8_t>(v / 2);
    } else {
      px[0] = px[1] = px[2] = v;
    }
  }
  return img;
}

inline std::size_t count_highlighted(const RgbImage& img) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < img.rgb.size(); i += 3)
    n += !(img.rgb[i] == img.rgb[i + 1] && img.rgb[i] == img.rgb[i + 2]);
  return n;
}

inline void export_overlay(const Frame& frame, const PredictionMap& prediction, const std::filesystem::path& path) {
  write_rgb_png(render_overlay(frame.pixels, prediction.mask), path);
}

}  // namespace cystseg
