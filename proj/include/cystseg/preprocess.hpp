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
#include <map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cystseg/error.hpp"
#include "cystseg/image.hpp"
#include "cystseg/manifest.hpp"
#include "cystseg/parallel.hpp"

namespace cystseg {

struct NlmParams {
  int search_window = 21;
  int patch_window = 7;
  double h = 10.0;
};

struct ClaheParams {
  int tile_rows = 8;
  int tile_cols = 8;
  double clip_limit = 2.0;
};

struct PreprocessConfig {
  std::map<Vendor, NlmParams> nlm = {
      {Vendor::Cirrus, {21, 7, 10.0}},
      {Vendor::Spectralis, {21, 7, 10.0}},
      {Vendor::Topcon, {21, 7, 15.0}},
      {Vendor::Nidek, {21, 7, 15.0}},
  };
  ClaheParams clahe;
  int target_height = 256;
  int target_width = 512;

  const NlmParams& nlm_for(Vendor v) const {
    const auto it = nlm.find(v);
    if (it == nlm.end()) fail(Errc::InvalidConfig, "no NLM parameters for vendor " + std::string(to_string(v)));
    return it->second;
  }

  void validate() const {
    for (const auto& [vendor, p] : nlm) {
      if (p.search_window < 1 || p.search_window % 2 == 0 || p.patch_window < 1 || p.patch_window % 2 == 0)
        fail(Errc::InvalidConfig, "NLM windows must be odd and >= 1");
      if (!(p.h > 0.0)) fail(Errc::InvalidConfig, "NLM filter strength must be positive");
    }
    if (clahe.tile_rows < 1 || clahe.tile_cols < 1) fail(Errc::InvalidConfig, "CLAHE tile grid must be >= 1x1");
    if (!(clahe.clip_limit >= 1.0)) fail(Errc::InvalidConfig, "CLAHE clip_limit must be >= 1");
    if (target_height <= 0 || target_width <= 0) fail(Errc::InvalidConfig, "resize targets must be positive");
  }
};

inline void to_json(nlohmann::json& j, const PreprocessConfig& c) {
  nlohmann::json nlm = nlohmann::json::object();
  for (const auto& [vendor, p] : c.nlm)
    nlm[std::string(to_string(vendor))] = {{"search_window", p.search_window}, {"patch_window", p.patch_window}, {"h", p.h}};
  j = {{"nlm", nlm},
       {"clahe", {{"tile_rows", c.clahe.tile_rows}, {"tile_cols", c.clahe.tile_cols}, {"clip_limit", c.clahe.clip_limit}}},
       {"target_height", c.target_height},
       {"target_width", c.target_width}};
}

inline void from_json(const nlohmann::json& j, PreprocessConfig& c) {
  if (j.contains("nlm")) {
    for (const auto& [name, p] : j.at("nlm").items()) {
      NlmParams& dst = c.nlm[parse_vendor(name)];
      dst.search_window = p.value("search_window", dst.search_window);
      dst.patch_window = p.value("patch_window", dst.patch_window);
      dst.h = p.value("h", dst.h);
    }
  }
  if (j.contains("clahe")) {
    const auto& cl = j.at("clahe");
    c.clahe.tile_rows = cl.value("tile_rows", c.clahe.tile_rows);
    c.clahe.tile_cols = cl.value("tile_cols", c.clahe.tile_cols);
    c.clahe.clip_limit = cl.value("clip_limit", c.clahe.clip_limit);
  }
  c.target_height = j.value("target_height", c.target_height);
  c.target_width = j.value("target_width", c.target_width);
  c.validate();
}

namespace detail {
inline std::uint16_t round_to_u8(double v) { return static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, 255.0)); }
}  // namespace detail

/// 16-bit frames are mapped linearly onto [0, 255]; 8-bit frames pass through.
inline Frame to_8bit(const Frame& frame) {
  if (frame.bit_depth == 8) return frame;
  Frame out = frame;
  out.bit_depth = 8;
  for (auto& v : out.pixels.pixels())
    v = static_cast<std::uint16_t>((static_cast<std::uint32_t>(v) * 255u + 32767u) / 65535u);
  return out;
}

template <typename T>
Image<T> crop_rows(const Image<T>& img, int top, int bottom) {
  Image<T> out(bottom - top, img.width());
  for (int r = top; r < bottom; ++r) std::copy(img.row(r).begin(), img.row(r).end(), out.row(r - top).begin());
  return out;
}

inline void check_band(int top, int bottom, int height) {
  if (top < 0 || top >= bottom || bottom > height)
    fail(Errc::InvalidBand, "band [" + std::to_string(top) + ", " + std::to_string(bottom) + ") invalid for height " +
                                std::to_string(height));
}

inline Frame crop_band(const Frame& frame) {
  check_band(frame.band_top, frame.band_bottom, frame.height());
  Frame out = frame;
  out.pixels = crop_rows(frame.pixels, frame.band_top, frame.band_bottom);
  out.band_top = 0;
  out.band_bottom = out.height();
  return out;
}

/// Non-local means on an 8-bit frame with edge-clamped indexing. Patch
/// distances are accumulated through per-offset integral images, which keeps
/// them exact integers; per-pixel weights are summed in raster offset order.
inline Frame nlm_denoise(const Frame& frame, const NlmParams& params) {
  const int H = frame.height(), W = frame.width();
  if (H == 0 || W == 0) return frame;
  const int rs = params.search_window / 2;
  const int rp = params.patch_window / 2;
  const double patch_area = static_cast<double>(params.patch_window) * params.patch_window;
  const double h2 = params.h * params.h;
  const auto& src = frame.pixels;
  auto px = [&](int r, int c) -> std::int64_t { return src(clamp_index(r, H), clamp_index(c, W)); };

  Frame out = frame;
  constexpr int kRowsPerChunk = 16;
  const int chunks = (H + kRowsPerChunk - 1) / kRowsPerChunk;
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t chunk) {
    const int r0 = static_cast<int>(chunk) * kRowsPerChunk;
    const int r1 = std::min(H, r0 + kRowsPerChunk);
    const int rows = r1 - r0;
    // Integral image over rows [r0 - rp, r1 + rp) and cols [-rp, W + rp).
    const int ih = rows + 2 * rp, iw = W + 2 * rp;
    std::vector<std::int64_t> integral(static_cast<std::size_t>(ih + 1) * (iw + 1));
    std::vector<double> acc(static_cast<std::size_t>(rows) * W, 0.0), wsum(acc.size(), 0.0);
    auto I = [&](int r, int c) -> std::int64_t& { return integral[static_cast<std::size_t>(r) * (iw + 1) + c]; };
    for (int dy = -rs; dy <= rs; ++dy) {
      for (int dx = -rs; dx <= rs; ++dx) {
        for (int r = 0; r < ih; ++r) {
          const int y = r0 - rp + r;
          std::int64_t run = 0;
          for (int c = 0; c < iw; ++c) {
            const int x = c - rp;
            const std::int64_t d = px(y, x) - px(y + dy, x + dx);
            run += d * d;
            I(r + 1, c + 1) = I(r, c + 1) + run;
          }
        }
        for (int r = 0; r < rows; ++r) {
          const int y = r0 + r;
          for (int x = 0; x < W; ++x) {
            // Patch rows [r, r + 2rp], cols [x, x + 2rp] in integral coordinates.
            const std::int64_t ssd = I(r + 2 * rp + 1, x + 2 * rp + 1) - I(r, x + 2 * rp + 1) -
                                     I(r + 2 * rp + 1, x) + I(r, x);
            const double d2 = static_cast<double>(ssd) / patch_area;
            const double w = std::exp(-std::max(d2, 0.0) / h2);
            const std::size_t k = static_cast<std::size_t>(r) * W + x;
            acc[k] += w * static_cast<double>(px(y + dy, x + dx));
            wsum[k] += w;
          }
        }
      }
    }
    for (int r = 0; r < rows; ++r)
      for (int x = 0; x < W; ++x) {
        const std::size_t k = static_cast<std::size_t>(r) * W + x;
        out.pixels(r0 + r, x) = detail::round_to_u8(acc[k] / wsum[k]);
      }
  });
  return out;
}

namespace detail {

/// Splits n into `parts` contiguous ranges; boundary i is i*n/parts.
inline std::vector<int> partition_bounds(int n, int parts) {
  std::vector<int> b(static_cast<std::size_t>(parts) + 1);
  for (int i = 0; i <= parts; ++i) b[i] = static_cast<int>(static_cast<long long>(i) * n / parts);
  return b;
}

/// Locates the pair of tile centers bracketing `pos` with interpolation weight of the second.
inline void bracket(const std::vector<double>& centers, double pos, int& lo, int& hi, double& w) {
  const int n = static_cast<int>(centers.size());
  if (pos <= centers.front()) {
    lo = hi = 0;
    w = 0.0;
    return;
  }
  if (pos >= centers.back()) {
    lo = hi = n - 1;
    w = 0.0;
    return;
  }
  lo = 0;
  while (centers[lo + 1] <= pos) ++lo;
  hi = lo + 1;
  w = (pos - centers[lo]) / (centers[hi] - centers[lo]);
}

}  // namespace detail

/// Contrast limited adaptive histogram equalization on an 8-bit frame.
inline Frame clahe(const Frame& frame, const ClaheParams& params) {
  const int H = frame.height(), W = frame.width();
  const int R = params.tile_rows, C = params.tile_cols;
  if (R < 1 || C < 1 || H < R || W < C) fail(Errc::TileTooSmall, "CLAHE tile grid leaves empty tiles");
  const auto rb = detail::partition_bounds(H, R);
  const auto cb = detail::partition_bounds(W, C);

  std::vector<std::array<double, 256>> lut(static_cast<std::size_t>(R) * C);
  for (int tr = 0; tr < R; ++tr) {
    for (int tc = 0; tc < C; ++tc) {
      std::array<double, 256> hist{};
      for (int r = rb[tr]; r < rb[tr + 1]; ++r)
        for (int c = cb[tc]; c < cb[tc + 1]; ++c) hist[std::min<int>(frame.pixels(r, c), 255)] += 1.0;
      const double n = static_cast<double>(rb[tr + 1] - rb[tr]) * (cb[tc + 1] - cb[tc]);
      const double clip = params.clip_limit * n / 256.0;
      double excess = 0.0;
      for (auto& h : hist) {
        if (h > clip) {
          excess += h - clip;
          h = clip;
        }
      }
      const double share = excess / 256.0;
      auto& map = lut[static_cast<std::size_t>(tr) * C + tc];
      double cdf = 0.0;
      for (int v = 0; v < 256; ++v) {
        cdf += hist[v] + share;
        map[v] = 255.0 * cdf / n;
      }
    }
  }

  std::vector<double> cy(R), cx(C);
  for (int i = 0; i < R; ++i) cy[i] = (rb[i] + rb[i + 1] - 1) / 2.0;
  for (int j = 0; j < C; ++j) cx[j] = (cb[j] + cb[j + 1] - 1) / 2.0;

  Frame out = frame;
  for (int r = 0; r < H; ++r) {
    int t0, t1;
    double wy;
    detail::bracket(cy, r, t0, t1, wy);
    for (int c = 0; c < W; ++c) {
      int u0, u1;
      double wx;
      detail::bracket(cx, c, u0, u1, wx);
      const int v = std::min<int>(frame.pixels(r, c), 255);
      auto L = [&](int tr, int tc) { return lut[static_cast<std::size_t>(tr) * C + tc][v]; };
      const double top = (1.0 - wx) * L(t0, u0) + wx * L(t0, u1);
      const double bottom = (1.0 - wx) * L(t1, u0) + wx * L(t1, u1);
      out.pixels(r, c) = detail::round_to_u8((1.0 - wy) * top + wy * bottom);
    }
  }
  return out;
}

namespace detail {
struct Tap {
  int i0, i1;
  double w;
};

/// Align-corners-false source taps with edge clamping.
inline std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    const double s = std::max((i + 0.5) * scale - 0.5, 0.0);
    int i0 = static_cast<int>(std::floor(s));
    i0 = std::min(i0, in - 1);
    const int i1 = std::min(i0 + 1, in - 1);
    taps[i] = {i0, i1, i1 == i0 ? 0.0 : s - i0};
  }
  return taps;
}
}  // namespace detail

inline Image<std::uint16_t> resize_bilinear(const Image<std::uint16_t>& img, int target_height, int target_width,
                                            int max_value = 255) {
  if (target_height <= 0 || target_width <= 0) fail(Errc::InvalidConfig, "resize targets must be positive");
  if (img.empty()) fail(Errc::ShapeError, "cannot resize an empty image");
  const auto ty = detail::bilinear_taps(img.height(), target_height);
  const auto tx = detail::bilinear_taps(img.width(), target_width);
  Image<std::uint16_t> out(target_height, target_width);
  for (int r = 0; r < target_height; ++r) {
    const auto& y = ty[r];
    for (int c = 0; c < target_width; ++c) {
      const auto& x = tx[c];
      const double top = (1.0 - x.w) * img(y.i0, x.i0) + x.w * img(y.i0, x.i1);
      const double bottom = (1.0 - x.w) * img(y.i1, x.i0) + x.w * img(y.i1, x.i1);
      const double v = (1.0 - y.w) * top + y.w * bottom;
      out(r, c) = static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, static_cast<double>(max_value)));
    }
  }
  return out;
}

inline Frame resize_bilinear(const Frame& frame, int target_height, int target_width) {
  Frame out = frame;
  out.pixels = resize_bilinear(frame.pixels, target_height, target_width, frame.bit_depth == 16 ? 65535 : 255);
  out.band_top = 0;
  out.band_bottom = target_height;
  out.pixel_size_x = frame.pixel_size_x * frame.width() / target_width;
  out.pixel_size_y = frame.pixel_size_y * frame.height() / target_height;
  return out;
}

template <typename T>
Image<T> resize_nearest(const Image<T>& img, int target_height, int target_width) {
  if (target_height <= 0 || target_width <= 0) fail(Errc::InvalidConfig, "resize targets must be positive");
  std::vector<int> sy(target_height), sx(target_width);
  for (int r = 0; r < target_height; ++r)
    sy[r] = std::min(static_cast<int>(std::floor((r + 0.5) * img.height() / target_height)), img.height() - 1);
  for (int c = 0; c < target_width; ++c)
    sx[c] = std::min(static_cast<int>(std::floor((c + 0.5) * img.width() / target_width)), img.width() - 1);
  Image<T> out(target_height, target_width);
  for (int r = 0; r < target_height; ++r)
    for (int c = 0; c < target_width; ++c) out(r, c) = img(sy[r], sx[c]);
  return out;
}

/// Masks follow the frame's geometry (band crop, nearest-neighbor resize) only.
inline Mask transform_mask(const Mask& mask, int band_top, int band_bottom, int target_height, int target_width) {
  check_band(band_top, band_bottom, mask.height());
  return resize_nearest(crop_rows(mask, band_top, band_bottom), target_height, target_width);
}

inline std::pair<Frame, MaskSet> preprocess_frame(const Frame& frame, const MaskSet& masks,
                                                  const PreprocessConfig& config) {
  for (const auto& [grader, m] : masks.graders)
    if (m.height() != frame.height() || m.width() != frame.width())
      fail(Errc::ShapeMismatch, "mask '" + grader + "' shape differs from frame");

  Frame f = to_8bit(frame);
  f = crop_band(f);
  f = nlm_denoise(f, config.nlm_for(frame.vendor));
  f = clahe(f, config.clahe);
  f = resize_bilinear(f, config.target_height, config.target_width);

  MaskSet out;
  out.fusion_rule = masks.fusion_rule;
  for (const auto& [grader, m] : masks.graders)
    out.graders.emplace(grader, transform_mask(m, frame.band_top, frame.band_bottom, config.target_height,
                                               config.target_width));
  if (masks.fusion)
    out.fusion = transform_mask(*masks.fusion, frame.band_top, frame.band_bottom, config.target_height,
                                config.target_width);
  return {std::move(f), std::move(out)};
}

}  // namespace cystseg
