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

// OCT-like synthetic volumes with known ground truth: layered horizontal
// band texture, darker elliptical cysts, multiplicative speckle, and two
// simulated graders (truth dilated / eroded by one pixel).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cystseg/error.hpp"
#include "cystseg/image.hpp"
#include "cystseg/image_codec.hpp"
#include "cystseg/manifest.hpp"
#include "cystseg/parallel.hpp"
#include "cystseg/rng.hpp"

namespace cystseg {

struct SynthSpec {
  int n_volumes = 4;
  int frames_per_volume = 8;
  int height = 160;
  int width = 256;
  std::array<double, 2> band_top_fraction = {0.12, 0.22};
  std::array<double, 2> band_bottom_fraction = {0.72, 0.88};
  int layer_count = 6;
  double layer_min = 150.0;
  double layer_max = 230.0;
  double layer_wobble = 2.0;  // pixels
  double background = 25.0;
  double speckle_strength = 0.15;
  std::array<int, 2> cysts_per_frame = {1, 4};
  std::array<double, 2> cyst_axis_y = {3.0, 8.0};   // semi-axis, pixels
  std::array<double, 2> cyst_axis_x = {6.0, 16.0};  // semi-axis, pixels
  double contrast = 100.0;
  std::uint64_t rng_seed = 1;
  std::map<Vendor, double> vendor_noise = {
      {Vendor::Cirrus, 1.0}, {Vendor::Spectralis, 0.8}, {Vendor::Topcon, 1.5}, {Vendor::Nidek, 1.3}};
  std::vector<Vendor> vendors = {Vendor::Cirrus, Vendor::Spectralis, Vendor::Topcon, Vendor::Nidek};
  double pixel_size_x = 6.0 / 512;
  double pixel_size_y = 2.0 / 496;
  double slice_spacing = 6.0 / 49;

  void validate() const {
    if (n_volumes < 0 || frames_per_volume < 1) fail(Errc::InvalidConfig, "synthetic volume/frame counts invalid");
    if (height < 11 || width < 11) fail(Errc::InvalidConfig, "synthetic frames must be at least 11x11");
    if (layer_count < 1 || vendors.empty()) fail(Errc::InvalidConfig, "synthetic layer/vendor lists invalid");
    if (cysts_per_frame[0] < 0 || cysts_per_frame[1] < cysts_per_frame[0])
      fail(Errc::InvalidConfig, "cysts_per_frame must be [min, max] with 0 <= min <= max");
    if (cyst_axis_y[0] < 1 || cyst_axis_x[0] < 1 || cyst_axis_y[1] < cyst_axis_y[0] || cyst_axis_x[1] < cyst_axis_x[0])
      fail(Errc::InvalidConfig, "cyst axis ranges must be [min, max] with min >= 1");
    if (!(band_top_fraction[0] >= 0 && band_top_fraction[1] >= band_top_fraction[0] &&
          band_bottom_fraction[0] > band_top_fraction[1] && band_bottom_fraction[1] <= 1.0 &&
          band_bottom_fraction[1] >= band_bottom_fraction[0]))
      fail(Errc::InvalidConfig, "band fractions must be ordered within [0, 1]");
    if (!(contrast > 0) || speckle_strength < 0) fail(Errc::InvalidConfig, "contrast must be positive");
  }

  /// Volumes [0, ceil(n/2)) train; the rest alternate Testing1 / Testing2.
  Split split_of(int volume) const {
    const int n_train = (n_volumes + 1) / 2;
    if (volume < n_train) return Split::Training;
    return (volume - n_train) % 2 == 0 ? Split::Testing1 : Split::Testing2;
  }
  Vendor vendor_of(int volume) const { return vendors[static_cast<std::size_t>(volume) % vendors.size()]; }
};

inline void to_json(nlohmann::json& j, const SynthSpec& s) {
  nlohmann::json noise = nlohmann::json::object();
  for (const auto& [v, n] : s.vendor_noise) noise[std::string(to_string(v))] = n;
  std::vector<std::string> vendors;
  for (auto v : s.vendors) vendors.emplace_back(to_string(v));
  j = {{"n_volumes", s.n_volumes},
       {"frames_per_volume", s.frames_per_volume},
       {"height", s.height},
       {"width", s.width},
       {"band_top_fraction", s.band_top_fraction},
       {"band_bottom_fraction", s.band_bottom_fraction},
       {"layer_count", s.layer_count},
       {"layer_min", s.layer_min},
       {"layer_max", s.layer_max},
       {"layer_wobble", s.layer_wobble},
       {"background", s.background},
       {"speckle_strength", s.speckle_strength},
       {"cysts_per_frame", s.cysts_per_frame},
       {"cyst_axis_y", s.cyst_axis_y},
       {"cyst_axis_x", s.cyst_axis_x},
       {"contrast", s.contrast},
       {"rng_seed", s.rng_seed},
       {"vendor_noise", noise},
       {"vendors", vendors},
       {"pixel_size_x", s.pixel_size_x},
       {"pixel_size_y", s.pixel_size_y},
       {"slice_spacing", s.slice_spacing}};
}

inline void from_json(const nlohmann::json& j, SynthSpec& s) {
  try {
    s.n_volumes = j.value("n_volumes", s.n_volumes);
    s.frames_per_volume = j.value("frames_per_volume", s.frames_per_volume);
    s.height = j.value("height", s.height);
    s.width = j.value("width", s.width);
    s.band_top_fraction = j.value("band_top_fraction", s.band_top_fraction);
    s.band_bottom_fraction = j.value("band_bottom_fraction", s.band_bottom_fraction);
    s.layer_count = j.value("layer_count", s.layer_count);
    s.layer_min = j.value("layer_min", s.layer_min);
    s.layer_max = j.value("layer_max", s.layer_max);
    s.layer_wobble = j.value("layer_wobble", s.layer_wobble);
    s.background = j.value("background", s.background);
    s.speckle_strength = j.value("speckle_strength", s.speckle_strength);
    s.cysts_per_frame = j.value("cysts_per_frame", s.cysts_per_frame);
    s.cyst_axis_y = j.value("cyst_axis_y", s.cyst_axis_y);
    s.cyst_axis_x = j.value("cyst_axis_x", s.cyst_axis_x);
    s.contrast = j.value("contrast", s.contrast);
    s.rng_seed = j.value("rng_seed", s.rng_seed);
    if (j.contains("vendor_noise"))
      for (const auto& [name, n] : j.at("vendor_noise").items()) s.vendor_noise[parse_vendor(name)] = n.get<double>();
    if (j.contains("vendors")) {
      s.vendors.clear();
      for (const auto& v : j.at("vendors")) s.vendors.push_back(parse_vendor(v.get<std::string>()));
    }
    s.pixel_size_x = j.value("pixel_size_x", s.pixel_size_x);
    s.pixel_size_y = j.value("pixel_size_y", s.pixel_size_y);
    s.slice_spacing = j.value("slice_spacing", s.slice_spacing);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidConfig, std::string("synthetic spec: ") + e.what());
  }
  s.validate();
}

struct SynthEllipse {
  double cy, cx, ay, ax;
};

struct SynthFrame {
  Image<std::uint16_t> pixels;  // 8-bit values (16-bit scaled for Spectralis)
  int bit_depth = 8;
  Image<double> clean;          // before noise
  Image<double> band_level;     // layer intensity at each pixel, ignoring cysts
  Mask truth;
  Mask grader1;                 // truth dilated by one pixel
  Mask grader2;                 // truth eroded by one pixel
  int band_top = 0;
  int band_bottom = 0;
  std::vector<SynthEllipse> cysts;
};

/// 3x3 square structuring element; out-of-frame pixels count as 0.
inline Mask dilate3(const Mask& m) {
  Mask out(m.height(), m.width());
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) {
      std::uint8_t v = 0;
      for (int dr = -1; dr <= 1 && !v; ++dr)
        for (int dc = -1; dc <= 1 && !v; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr >= 0 && rr < m.height() && cc >= 0 && cc < m.width()) v = m(rr, cc);
        }
      out(r, c) = v;
    }
  return out;
}

inline Mask erode3(const Mask& m) {
  Mask out(m.height(), m.width());
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) {
      std::uint8_t v = 1;
      for (int dr = -1; dr <= 1 && v; ++dr)
        for (int dc = -1; dc <= 1 && v; ++dc) {
          const int rr = r + dr, cc = c + dc;
          v = (rr >= 0 && rr < m.height() && cc >= 0 && cc < m.width()) ? m(rr, cc) : 0;
        }
      out(r, c) = v;
    }
  return out;
}

inline SynthFrame generate_frame(const SynthSpec& spec, int volume, int frame) {
  auto rng = stream_rng(spec.rng_seed, static_cast<std::uint64_t>(volume) + 1, static_cast<std::uint64_t>(frame) + 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const int H = spec.height, W = spec.width;

  SynthFrame f;
  f.band_top = static_cast<int>(std::floor(H * uniform(spec.band_top_fraction[0], spec.band_top_fraction[1])));
  f.band_bottom = static_cast<int>(std::ceil(H * uniform(spec.band_bottom_fraction[0], spec.band_bottom_fraction[1])));
  f.band_top = std::clamp(f.band_top, 0, H - 2);
  f.band_bottom = std::clamp(f.band_bottom, f.band_top + 1, H);

  std::vector<double> levels(spec.layer_count);
  for (auto& l : levels) l = uniform(spec.layer_min, spec.layer_max);
  const double phase = uniform(0.0, 6.283185307179586);
  const double period = uniform(0.5, 1.5) * W;

  f.band_level = Image<double>(H, W, spec.background);
  const double band_h = f.band_bottom - f.band_top;
  for (int c = 0; c < W; ++c) {
    const double wobble = spec.layer_wobble * std::sin(6.283185307179586 * c / period + phase);
    for (int r = f.band_top; r < f.band_bottom; ++r) {
      const double depth = std::clamp((r - f.band_top - wobble) / band_h, 0.0, 0.999999);
      f.band_level(r, c) = levels[static_cast<std::size_t>(depth * spec.layer_count)];
    }
  }
  f.clean = f.band_level;
  f.truth = Mask(H, W);

  const int n_cysts = static_cast<int>(std::floor(uniform(spec.cysts_per_frame[0], spec.cysts_per_frame[1] + 1.0 - 1e-9)));
  for (int k = 0; k < n_cysts; ++k) {
    SynthEllipse e;
    e.ay = uniform(spec.cyst_axis_y[0], spec.cyst_axis_y[1]);
    e.ax = uniform(spec.cyst_axis_x[0], spec.cyst_axis_x[1]);
    const double lo_y = f.band_top + e.ay + 1, hi_y = f.band_bottom - e.ay - 2;
    const double lo_x = e.ax + 1, hi_x = W - e.ax - 2;
    e.cy = hi_y > lo_y ? uniform(lo_y, hi_y) : (f.band_top + f.band_bottom) / 2.0;
    e.cx = hi_x > lo_x ? uniform(lo_x, hi_x) : W / 2.0;
    f.cysts.push_back(e);
    for (int r = std::max(f.band_top, static_cast<int>(e.cy - e.ay) - 1);
         r <= std::min(f.band_bottom - 1, static_cast<int>(e.cy + e.ay) + 1); ++r)
      for (int c = std::max(0, static_cast<int>(e.cx - e.ax) - 1);
           c <= std::min(W - 1, static_cast<int>(e.cx + e.ax) + 1); ++c) {
        const double dy = (r - e.cy) / e.ay, dx = (c - e.cx) / e.ax;
        if (dy * dy + dx * dx <= 1.0) {
          f.truth(r, c) = 1;
          f.clean(r, c) = std::max(f.band_level(r, c) - spec.contrast, 0.0);
        }
      }
  }

  const Vendor vendor = spec.vendor_of(volume);
  const auto noise_it = spec.vendor_noise.find(vendor);
  const double sigma = spec.speckle_strength * (noise_it == spec.vendor_noise.end() ? 1.0 : noise_it->second);
  std::normal_distribution<double> gauss(0.0, 1.0);
  f.bit_depth = vendor == Vendor::Spectralis ? 16 : 8;
  f.pixels = Image<std::uint16_t>(H, W);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) {
    const double v = std::clamp(std::round(f.clean.pixels()[i] * (1.0 + sigma * gauss(rng))), 0.0, 255.0);
    f.pixels.pixels()[i] = static_cast<std::uint16_t>(f.bit_depth == 16 ? v * 257.0 : v);
  }
  f.grader1 = dilate3(f.truth);
  f.grader2 = erode3(f.truth);
  return f;
}

inline std::string frame_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03d", index);
  return buf;
}

/// Writes images, grader masks, and manifest.json under `out_dir`.
inline Manifest generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir);
  Manifest m;
  m.root = out_dir;
  for (int v = 0; v < spec.n_volumes; ++v) {
    VolumeEntry vol;
    vol.vendor = spec.vendor_of(v);
    vol.volume_id = std::string(to_string(vol.vendor)) + "_" + std::to_string(v + 1);
    vol.split = spec.split_of(v);
    vol.pixel_size_x = spec.pixel_size_x;
    vol.pixel_size_y = spec.pixel_size_y;
    vol.slice_spacing = spec.slice_spacing;
    vol.frames.resize(spec.frames_per_volume);
    parallel_for(static_cast<std::size_t>(spec.frames_per_volume), [&](std::size_t fi) {
      const SynthFrame f = generate_frame(spec, v, static_cast<int>(fi));
      const std::string stem = frame_stem(static_cast<int>(fi));
      const std::filesystem::path dir = vol.volume_id;
      FrameEntry e;
      e.image = dir / ("frame_" + stem + ".png");
      e.band_top = f.band_top;
      e.band_bottom = f.band_bottom;
      e.masks["grader1"] = dir / ("grader1_" + stem + ".png");
      e.masks["grader2"] = dir / ("grader2_" + stem + ".png");
      write_gray_png(f.pixels, f.bit_depth, out_dir / e.image);
      write_mask(f.grader1, out_dir / e.masks["grader1"]);
      write_mask(f.grader2, out_dir / e.masks["grader2"]);
      vol.frames[fi] = std::move(e);
    });
    m.volumes.push_back(std::move(vol));
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace cystseg
