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
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <tuple>
#include <string>
#include <vector>

#include <json.hpp>

#include "cystseg/error.hpp"
#include "cystseg/image.hpp"
#include "cystseg/manifest.hpp"

namespace cystseg {

inline constexpr int kPatchSize = 11;

/// Pointwise OR (Union), AND (Intersection), or one grader's mask (Single;
/// first grader id in sort order unless `grader` names one).
inline Mask fuse_graders(const MaskSet& masks, FusionRule rule, const std::optional<std::string>& grader = {}) {
  if (masks.graders.empty()) fail(Errc::NotEnoughGraders, "no grader masks present");
  if (rule == FusionRule::Single) {
    if (!grader) return masks.graders.begin()->second;
    const auto it = masks.graders.find(*grader);
    if (it == masks.graders.end()) fail(Errc::NotEnoughGraders, "grader '" + *grader + "' not present");
    return it->second;
  }
  if (masks.graders.size() < 2) fail(Errc::NotEnoughGraders, "union/intersection need at least two graders");
  Mask out = masks.graders.begin()->second;
  for (const auto& [id, m] : masks.graders) {
    if (!m.same_shape(out)) fail(Errc::ShapeMismatch, "grader masks differ in shape");
    for (std::size_t i = 0; i < out.size(); ++i)
      out.pixels()[i] = rule == FusionRule::Union ? (out.pixels()[i] | m.pixels()[i]) : (out.pixels()[i] & m.pixels()[i]);
  }
  return out;
}

/// Non-overlapping square patch grid anchored at the top-left corner.
struct GridSpec {
  int patch = kPatchSize;
  int rows = 0;
  int cols = 0;
  int central_rows = 5;
  int central_cols = 10;

  static GridSpec for_frame(int height, int width, int patch = kPatchSize, int central_rows = 5, int central_cols = 10) {
    if (patch < 1 || patch % 2 == 0) fail(Errc::InvalidConfig, "patch size must be odd");
    if (height < patch || width < patch)
      fail(Errc::FrameTooSmall, "frame " + std::to_string(height) + "x" + std::to_string(width) +
                                    " is smaller than one patch");
    return {patch, height / patch, width / patch, std::min(central_rows, height / patch),
            std::min(central_cols, width / patch)};
  }

  int central_row0() const { return (rows - central_rows) / 2; }
  int central_col0() const { return (cols - central_cols) / 2; }
  bool is_central(int r, int c) const {
    return r >= central_row0() && r < central_row0() + central_rows && c >= central_col0() &&
           c < central_col0() + central_cols;
  }
  int center_row(int grid_row) const { return grid_row * patch + patch / 2; }
  int center_col(int grid_col) const { return grid_col * patch + patch / 2; }
};

struct GridPosition {
  int grid_row = 0;
  int grid_col = 0;
  bool is_central = false;

  friend bool operator==(const GridPosition&, const GridPosition&) = default;
};

inline std::vector<GridPosition> extract_grid(const GridSpec& grid) {
  std::vector<GridPosition> out;
  out.reserve(static_cast<std::size_t>(grid.rows) * grid.cols);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) out.push_back({r, c, grid.is_central(r, c)});
  return out;
}

inline std::vector<GridPosition> extract_grid(int height, int width, int patch = kPatchSize) {
  return extract_grid(GridSpec::for_frame(height, width, patch));
}

inline std::uint8_t label_patch(const GridPosition& pos, const Mask& mask, int patch = kPatchSize) {
  return mask(pos.grid_row * patch + patch / 2, pos.grid_col * patch + patch / 2);
}

struct PatchSource {
  std::uint32_t volume_index = 0;
  std::uint32_t frame_index = 0;
  std::uint32_t grid_row = 0;
  std::uint32_t grid_col = 0;

  friend bool operator==(const PatchSource&, const PatchSource&) = default;
};

struct PatchRecord {
  Image<std::uint8_t> pixels;
  std::uint8_t label = 0;
  PatchSource source;
  bool is_central = false;

  friend bool operator==(const PatchRecord&, const PatchRecord&) = default;
};

template <typename Pixel>
Image<std::uint8_t> cut_patch(const Image<Pixel>& img, int top, int left, int patch) {
  Image<std::uint8_t> out(patch, patch);
  for (int r = 0; r < patch; ++r)
    for (int c = 0; c < patch; ++c) out(r, c) = static_cast<std::uint8_t>(std::min<int>(img(top + r, left + c), 255));
  return out;
}

/// A preprocessed frame with its fused ground truth.
struct LabeledFrame {
  std::uint32_t volume_index = 0;
  std::uint32_t frame_index = 0;
  Vendor vendor = Vendor::Cirrus;
  Image<std::uint16_t> pixels;
  Mask truth;
};

struct PatchConfig {
  int patch_size = kPatchSize;
  int central_rows = 5;
  int central_cols = 10;
  FusionRule fusion = FusionRule::Union;
  /// Exhaust central negatives before drawing peripheral ones.
  bool central_priority = true;
};

inline void to_json(nlohmann::json& j, const PatchConfig& c) {
  j = {{"patch_size", c.patch_size},
       {"central_rows", c.central_rows},
       {"central_cols", c.central_cols},
       {"fusion", std::string(to_string(c.fusion))},
       {"central_priority", c.central_priority}};
}

inline void from_json(const nlohmann::json& j, PatchConfig& c) {
  c.patch_size = j.value("patch_size", c.patch_size);
  c.central_rows = j.value("central_rows", c.central_rows);
  c.central_cols = j.value("central_cols", c.central_cols);
  if (j.contains("fusion")) c.fusion = parse_fusion_rule(j.at("fusion").get<std::string>());
  c.central_priority = j.value("central_priority", c.central_priority);
  if (c.patch_size < 1 || c.patch_size % 2 == 0) fail(Errc::InvalidConfig, "patch_size must be odd");
}

struct ClassCounts {
  std::size_t positive = 0;
  std::size_t negative = 0;
};

struct BalancedSet {
  std::vector<PatchRecord> records;
  std::map<Vendor, ClassCounts> per_vendor;
  std::size_t available_positives = 0;
  std::size_t available_negatives = 0;
};

/// Every cyst patch plus an equal number of non-cyst patches drawn without
/// replacement. If negatives run short, positives are subsampled instead so
/// the classes stay exactly balanced.
inline BalancedSet build_balanced_set(std::span<const LabeledFrame> frames, const PatchConfig& config,
                                      std::uint64_t seed) {
  struct Candidate {
    std::size_t frame;
    GridPosition pos;
  };
  std::vector<Candidate> positives, central_neg, peripheral_neg;
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const auto& f = frames[fi];
    if (!f.truth.same_shape(Mask(f.pixels.height(), f.pixels.width())))
      fail(Errc::ShapeMismatch, "ground truth shape differs from frame");
    const auto grid = GridSpec::for_frame(f.pixels.height(), f.pixels.width(), config.patch_size, config.central_rows,
                                          config.central_cols);
    for (const auto& pos : extract_grid(grid)) {
      if (label_patch(pos, f.truth, grid.patch))
        positives.push_back({fi, pos});
      else if (pos.is_central && config.central_priority)
        central_neg.push_back({fi, pos});
      else
        peripheral_neg.push_back({fi, pos});
    }
  }
  if (positives.empty()) fail(Errc::NoPositives, "split contains no cyst patches");

  std::mt19937_64 rng(seed);
  std::shuffle(central_neg.begin(), central_neg.end(), rng);
  std::shuffle(peripheral_neg.begin(), peripheral_neg.end(), rng);
  std::vector<Candidate> negatives = std::move(central_neg);
  negatives.insert(negatives.end(), peripheral_neg.begin(), peripheral_neg.end());

  BalancedSet out;
  out.available_positives = positives.size();
  out.available_negatives = negatives.size();
  if (negatives.size() < positives.size()) {
    std::shuffle(positives.begin(), positives.end(), rng);
    positives.resize(negatives.size());
    std::stable_sort(positives.begin(), positives.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(a.frame, a.pos.grid_row, a.pos.grid_col) < std::tie(b.frame, b.pos.grid_row, b.pos.grid_col);
    });
  }
  negatives.resize(positives.size());

  auto emit = [&](const Candidate& c, std::uint8_t label) {
    const auto& f = frames[c.frame];
    PatchRecord rec;
    rec.pixels = cut_patch(f.pixels, c.pos.grid_row * config.patch_size, c.pos.grid_col * config.patch_size,
                           config.patch_size);
    rec.label = label;
    rec.source = {f.volume_index, f.frame_index, static_cast<std::uint32_t>(c.pos.grid_row),
                  static_cast<std::uint32_t>(c.pos.grid_col)};
    rec.is_central = c.pos.is_central;
    auto& counts = out.per_vendor[f.vendor];
    (label ? counts.positive : counts.negative) += 1;
    out.records.push_back(std::move(rec));
  };
  out.records.reserve(positives.size() * 2);
  for (const auto& c : positives) emit(c, 1);
  for (const auto& c : negatives) emit(c, 0);
  std::shuffle(out.records.begin(), out.records.end(), rng);
  return out;
}

struct AugmentPolicy {
  double horizontal_flip_prob = 0.5;
  double rotation_range = 15.0;  // degrees, symmetric
  double height_shift = 0.1;     // fraction of patch height
  double width_shift = 0.1;      // fraction of patch width
  double zoom_range = 0.1;       // scale drawn from [1 - z, 1 + z]
  std::uint64_t rng_seed = 0;

  static AugmentPolicy none() { return {0.0, 0.0, 0.0, 0.0, 0.0, 0}; }

  void validate() const {
    if (!(horizontal_flip_prob >= 0.0 && horizontal_flip_prob <= 1.0))
      fail(Errc::InvalidConfig, "horizontal_flip_prob must lie in [0, 1]");
    if (rotation_range < 0 || height_shift < 0 || width_shift < 0 || zoom_range < 0 || zoom_range >= 1.0)
      fail(Errc::InvalidConfig, "augmentation ranges must be non-negative (zoom < 1)");
  }
};

inline void to_json(nlohmann::json& j, const AugmentPolicy& p) {
  j = {{"horizontal_flip_prob", p.horizontal_flip_prob}, {"rotation_range", p.rotation_range},
       {"height_shift", p.height_shift},                 {"width_shift", p.width_shift},
       {"zoom_range", p.zoom_range},                     {"rng_seed", p.rng_seed}};
}

inline void from_json(const nlohmann::json& j, AugmentPolicy& p) {
  p.horizontal_flip_prob = j.value("horizontal_flip_prob", p.horizontal_flip_prob);
  p.rotation_range = j.value("rotation_range", p.rotation_range);
  p.height_shift = j.value("height_shift", p.height_shift);
  p.width_shift = j.value("width_shift", p.width_shift);
  p.zoom_range = j.value("zoom_range", p.zoom_range);
  p.rng_seed = j.value("rng_seed", p.rng_seed);
  p.validate();
}

/// One concrete draw from an AugmentPolicy.
struct AugmentDraw {
  bool flip = false;
  double angle_deg = 0.0;
  double shift_y = 0.0;  // pixels
  double shift_x = 0.0;  // pixels
  double zoom = 1.0;
};

template <typename Rng>
AugmentDraw sample_augment(const AugmentPolicy& policy, int patch, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto symmetric = [&](double range) { return (2.0 * unit(rng) - 1.0) * range; };
  AugmentDraw d;
  // Always consume five draws so the stream position does not depend on outcomes.
  d.flip = unit(rng) < policy.horizontal_flip_prob;
  d.angle_deg = symmetric(policy.rotation_range);
  d.shift_y = symmetric(policy.height_shift) * patch;
  d.shift_x = symmetric(policy.width_shift) * patch;
  d.zoom = 1.0 + symmetric(policy.zoom_range);
  return d;
}

/// Applies flip, then rotation/zoom about the patch center, then shift, by
/// inverse-mapping output pixels and sampling bilinearly with edge clamping.
inline Image<std::uint8_t> apply_augment(const Image<std::uint8_t>& src, const AugmentDraw& d) {
  const int n = src.height(), m = src.width();
  const double cy = (n - 1) / 2.0, cx = (m - 1) / 2.0;
  const double theta = d.angle_deg * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  Image<std::uint8_t> out(n, m);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < m; ++x) {
      const double uy = (y - cy - d.shift_y) / d.zoom;
      const double ux = (x - cx - d.shift_x) / d.zoom;
      double sy = cs * uy - sn * ux + cy;
      double sx = sn * uy + cs * ux + cx;
      if (d.flip) sx = (m - 1) - sx;
      sy = std::clamp(sy, 0.0, static_cast<double>(n - 1));
      sx = std::clamp(sx, 0.0, static_cast<double>(m - 1));
      const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
      const int y1 = std::min(y0 + 1, n - 1), x1 = std::min(x0 + 1, m - 1);
      const double wy = sy - y0, wx = sx - x0;
      const double top = (1 - wx) * src(y0, x0) + wx * src(y0, x1);
      const double bottom = (1 - wx) * src(y1, x0) + wx * src(y1, x1);
      out(y, x) = static_cast<std::uint8_t>(std::clamp(std::round((1 - wy) * top + wy * bottom), 0.0, 255.0));
    }
  }
  return out;
}

template <typename Rng>
PatchRecord augment(const PatchRecord& patch, const AugmentPolicy& policy, Rng& rng) {
  PatchRecord out = patch;
  out.pixels = apply_augment(patch.pixels, sample_augment(policy, patch.pixels.height(), rng));
  return out;
}

// Binary patch cache: "CYSTPATCH1", u64 record count, then per record
// 121 pixel bytes, 1 label byte, 4 x u32 source indices. Little-endian.
inline constexpr char kPatchMagic[] = "CYSTPATCH1";

namespace detail {
inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
}  // namespace detail

inline std::vector<std::uint8_t> encode_patch_cache(std::span<const PatchRecord> records) {
  std::vector<std::uint8_t> b(kPatchMagic, kPatchMagic + 10);
  const std::uint64_t n = records.size();
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  for (const auto& r : records) {
    if (r.pixels.height() != kPatchSize || r.pixels.width() != kPatchSize)
      fail(Errc::ShapeError, "patch cache stores 11x11 patches only");
    b.insert(b.end(), r.pixels.pixels().begin(), r.pixels.pixels().end());
    b.push_back(r.label);
    detail::put_u32(b, r.source.volume_index);
    detail::put_u32(b, r.source.frame_index);
    detail::put_u32(b, r.source.grid_row);
    detail::put_u32(b, r.source.grid_col);
  }
  return b;
}

inline void write_patch_cache(std::span<const PatchRecord> records, const std::filesystem::path& path) {
  detail::write_bytes(path, encode_patch_cache(records));
}

/// is_central is not stored in the cache and reads back as false.
inline std::vector<PatchRecord> read_patch_cache(const std::filesystem::path& path) {
  const auto b = detail::read_bytes(path);
  if (b.size() < 18 || std::memcmp(b.data(), kPatchMagic, 10) != 0)
    fail(Errc::SchemaError, path.string() + ": not a patch cache");
  std::uint64_t n = 0;
  for (int i = 0; i < 8; ++i) n |= static_cast<std::uint64_t>(b[10 + i]) << (8 * i);
  constexpr std::size_t kRecord = kPatchSize * kPatchSize + 1 + 16;
  if ((b.size() - 18) != n * kRecord) fail(Errc::SchemaError, path.string() + ": record count does not match size");
  std::vector<PatchRecord> out(n);
  const std::uint8_t* p = b.data() + 18;
  for (auto& r : out) {
    r.pixels = Image<std::uint8_t>(kPatchSize, kPatchSize,
                                   std::vector<std::uint8_t>(p, p + kPatchSize * kPatchSize));
    p += kPatchSize * kPatchSize;
    r.label = *p++;
    if (r.label > 1) fail(Errc::SchemaError, path.string() + ": label out of range");
    r.source = {detail::get_u32(p), detail::get_u32(p + 4), detail::get_u32(p + 8), detail::get_u32(p + 12)};
    p += 16;
  }
  return out;
}

}  // namespace cystseg
