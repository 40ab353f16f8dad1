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

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cystseg/error.hpp"
#include "cystseg/image.hpp"
#include "cystseg/image_codec.hpp"

namespace cystseg {

enum class Vendor { Cirrus, Nidek, Spectralis, Topcon };
enum class Split { Training, Testing1, Testing2 };
enum class FusionRule { Union, Intersection, Single };

inline constexpr std::array<Vendor, 4> kAllVendors = {Vendor::Cirrus, Vendor::Nidek, Vendor::Spectralis,
                                                      Vendor::Topcon};

constexpr std::string_view to_string(Vendor v) noexcept {
  switch (v) {
    case Vendor::Cirrus: return "Cirrus";
    case Vendor::Nidek: return "Nidek";
    case Vendor::Spectralis: return "Spectralis";
    case Vendor::Topcon: return "Topcon";
  }
  return "?";
}

constexpr std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::Training: return "Training";
    case Split::Testing1: return "Testing1";
    case Split::Testing2: return "Testing2";
  }
  return "?";
}

constexpr std::string_view to_string(FusionRule r) noexcept {
  switch (r) {
    case FusionRule::Union: return "union";
    case FusionRule::Intersection: return "intersection";
    case FusionRule::Single: return "single";
  }
  return "?";
}

inline Vendor parse_vendor(std::string_view s) {
  for (auto v : kAllVendors)
    if (s == to_string(v)) return v;
  fail(Errc::SchemaError, "unknown vendor '" + std::string(s) + "'");
}

inline Split parse_split(std::string_view s) {
  for (auto sp : {Split::Training, Split::Testing1, Split::Testing2})
    if (s == to_string(sp)) return sp;
  fail(Errc::SchemaError, "unknown split '" + std::string(s) + "'");
}

inline FusionRule parse_fusion_rule(std::string_view s) {
  for (auto r : {FusionRule::Union, FusionRule::Intersection, FusionRule::Single})
    if (s == to_string(r)) return r;
  fail(Errc::InvalidConfig, "unknown fusion rule '" + std::string(s) + "'");
}

/// One grayscale B-scan with acquisition metadata. Band rows are [band_top, band_bottom).
struct Frame {
  Image<std::uint16_t> pixels;
  int bit_depth = 8;
  Vendor vendor = Vendor::Cirrus;
  int band_top = 0;
  int band_bottom = 0;
  double pixel_size_x = 0.0;  // mm / pixel
  double pixel_size_y = 0.0;  // mm / pixel
  double slice_spacing = 0.0; // mm

  int height() const noexcept { return pixels.height(); }
  int width() const noexcept { return pixels.width(); }

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct MaskSet {
  std::map<std::string, Mask> graders;
  std::optional<Mask> fusion;
  FusionRule fusion_rule = FusionRule::Single;
};

struct FrameEntry {
  std::filesystem::path image;
  int band_top = 0;
  int band_bottom = 0;
  std::map<std::string, std::filesystem::path> masks;
  std::optional<double> pixel_size_x;
  std::optional<double> pixel_size_y;

  friend bool operator==(const FrameEntry&, const FrameEntry&) = default;
};

struct VolumeEntry {
  std::string volume_id;
  Vendor vendor = Vendor::Cirrus;
  Split split = Split::Training;
  double pixel_size_x = 0.0;
  double pixel_size_y = 0.0;
  double slice_spacing = 0.0;
  std::vector<FrameEntry> frames;

  friend bool operator==(const VolumeEntry&, const VolumeEntry&) = default;
};

/// Dataset index. Paths inside entries are relative to `root`.
struct Manifest {
  std::filesystem::path root;
  std::vector<VolumeEntry> volumes;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : root / p; }

  std::size_t count(Split split) const {
    std::size_t n = 0;
    for (const auto& v : volumes) n += v.split == split;
    return n;
  }

  const VolumeEntry* find(std::string_view volume_id) const {
    for (const auto& v : volumes)
      if (v.volume_id == volume_id) return &v;
    return nullptr;
  }

  friend bool operator==(const Manifest& a, const Manifest& b) { return a.volumes == b.volumes; }
};

/// Reads a grayscale file. Band defaults to the full height; acquisition
/// metadata is left for the caller (normally filled from a manifest entry).
inline Frame read_frame(const std::filesystem::path& path) {
  GrayImage img = read_gray_image(path);
  Frame f;
  f.bit_depth = img.bit_depth;
  f.pixels = std::move(img.pixels);
  f.band_bottom = f.height();
  return f;
}

/// Masks are stored as 8-bit images with 0 -> 0 and 1 -> 255.
inline void write_mask(const Mask& mask, const std::filesystem::path& path) {
  if (!is_binary(mask)) fail(Errc::IoError, "mask values must be 0 or 1: " + path.string());
  Image<std::uint8_t> out(mask.height(), mask.width());
  for (std::size_t i = 0; i < mask.size(); ++i) out.pixels()[i] = mask.pixels()[i] ? 255 : 0;
  write_gray_png(out, path);
}

inline Mask read_mask(const std::filesystem::path& path) {
  const GrayImage img = read_gray_image(path);
  Mask m(img.pixels.height(), img.pixels.width());
  const auto src = img.pixels.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] != 0 && src[i] != 255) fail(Errc::CorruptImage, path.string() + ": mask values must be 0 or 255");
    m.pixels()[i] = src[i] ? 1 : 0;
  }
  return m;
}

namespace detail {

using nlohmann::json;

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(Errc::SchemaError, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(Errc::SchemaError, where + ": field '" + key + "' has the wrong type");
  }
}

inline std::optional<double> optional_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  if (!j.at(key).is_number()) fail(Errc::SchemaError, where + ": field '" + key + "' must be a number");
  return j.at(key).get<double>();
}

}  // namespace detail

struct ManifestLoadOptions {
  /// Decode every image to check it is loadable and that mask shapes match.
  bool validate_images = true;
};

inline Manifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& root) {
  using detail::require;
  if (!doc.is_object()) fail(Errc::SchemaError, "manifest must be a JSON object");
  if (!doc.contains("volumes") || !doc.at("volumes").is_array()) fail(Errc::SchemaError, "manifest needs a 'volumes' array");
  Manifest m;
  m.root = root;
  std::set<std::string> ids;
  for (const auto& jv : doc.at("volumes")) {
    VolumeEntry v;
    v.volume_id = require<std::string>(jv, "volume_id", "volume");
    const std::string where = "volume " + v.volume_id;
    if (!ids.insert(v.volume_id).second) fail(Errc::SchemaError, "duplicate volume_id " + v.volume_id);
    v.vendor = parse_vendor(require<std::string>(jv, "vendor", where));
    v.split = parse_split(require<std::string>(jv, "split", where));
    v.pixel_size_x = require<double>(jv, "pixel_size_x", where);
    v.pixel_size_y = require<double>(jv, "pixel_size_y", where);
    v.slice_spacing = require<double>(jv, "slice_spacing", where);
    if (!jv.contains("frames") || !jv.at("frames").is_array() || jv.at("frames").empty())
      fail(Errc::SchemaError, where + ": needs a non-empty 'frames' array");
    for (const auto& jf : jv.at("frames")) {
      FrameEntry f;
      f.image = require<std::string>(jf, "image", where);
      const auto band = require<std::vector<int>>(jf, "band", where + " frame " + f.image.string());
      if (band.size() != 2) fail(Errc::SchemaError, where + ": 'band' must be [top, bottom]");
      f.band_top = band[0];
      f.band_bottom = band[1];
      if (jf.contains("masks")) {
        if (!jf.at("masks").is_object()) fail(Errc::SchemaError, where + ": 'masks' must map grader id to path");
        for (const auto& [grader, p] : jf.at("masks").items()) {
          if (!p.is_string()) fail(Errc::SchemaError, where + ": mask path must be a string");
          f.masks.emplace(grader, p.get<std::string>());
        }
      }
      f.pixel_size_x = detail::optional_number(jf, "pixel_size_x", where);
      f.pixel_size_y = detail::optional_number(jf, "pixel_size_y", where);
      v.frames.push_back(std::move(f));
    }
    m.volumes.push_back(std::move(v));
  }
  return m;
}

inline void validate_manifest_files(const Manifest& m, const ManifestLoadOptions& opts) {
  for (const auto& v : m.volumes) {
    int height = -1, width = -1;
    for (const auto& f : v.frames) {
      const auto image_path = m.resolve(f.image);
      if (!std::filesystem::exists(image_path)) fail(Errc::MissingFile, "missing frame file " + image_path.string());
      for (const auto& [grader, p] : f.masks)
        if (!std::filesystem::exists(m.resolve(p)))
          fail(Errc::MissingFile, "missing mask file " + m.resolve(p).string());
      if (!opts.validate_images) continue;
      const Frame frame = read_frame(image_path);
      if (height < 0) {
        height = frame.height();
        width = frame.width();
      } else if (frame.height() != height || frame.width() != width) {
        fail(Errc::ShapeMismatch, "volume " + v.volume_id + ": frames differ in size");
      }
      if (f.band_top < 0 || f.band_top >= f.band_bottom || f.band_bottom > frame.height())
        fail(Errc::InvalidBand, image_path.string() + ": band outside frame");
      for (const auto& [grader, p] : f.masks) {
        const Mask mask = read_mask(m.resolve(p));
        if (mask.height() != frame.height() || mask.width() != frame.width())
          fail(Errc::ShapeMismatch, m.resolve(p).string() + ": mask shape differs from frame");
      }
    }
  }
}

inline Manifest load_manifest(const std::filesystem::path& path, const ManifestLoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) fail(Errc::MissingFile, "cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::SchemaError, path.string() + ": " + e.what());
  }
  Manifest m = parse_manifest(doc, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
  validate_manifest_files(m, opts);
  return m;
}

inline nlohmann::json to_json(const Manifest& m) {
  nlohmann::json vols = nlohmann::json::array();
  for (const auto& v : m.volumes) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : v.frames) {
      nlohmann::json jf;
      jf["image"] = f.image.generic_string();
      jf["band"] = {f.band_top, f.band_bottom};
      nlohmann::json masks = nlohmann::json::object();
      for (const auto& [grader, p] : f.masks) masks[grader] = p.generic_string();
      jf["masks"] = masks;
      if (f.pixel_size_x) jf["pixel_size_x"] = *f.pixel_size_x;
      if (f.pixel_size_y) jf["pixel_size_y"] = *f.pixel_size_y;
      frames.push_back(std::move(jf));
    }
    nlohmann::json jv;
    jv["volume_id"] = v.volume_id;
    jv["vendor"] = std::string(to_string(v.vendor));
    jv["split"] = std::string(to_string(v.split));
    jv["pixel_size_x"] = v.pixel_size_x;
    jv["pixel_size_y"] = v.pixel_size_y;
    jv["slice_spacing"] = v.slice_spacing;
    jv["frames"] = std::move(frames);
    vols.push_back(std::move(jv));
  }
  return nlohmann::json{{"volumes", std::move(vols)}};
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write manifest " + path.string());
  out << to_json(m).dump(2) << "\n";
}

/// Frame pixels plus metadata from the manifest entry.
inline Frame load_frame(const Manifest& m, const VolumeEntry& v, const FrameEntry& f) {
  Frame frame = read_frame(m.resolve(f.image));
  frame.vendor = v.vendor;
  frame.band_top = f.band_top;
  frame.band_bottom = f.band_bottom;
  frame.pixel_size_x = f.pixel_size_x.value_or(v.pixel_size_x);
  frame.pixel_size_y = f.pixel_size_y.value_or(v.pixel_size_y);
  frame.slice_spacing = v.slice_spacing;
  return frame;
}

inline MaskSet load_masks(const Manifest& m, const FrameEntry& f) {
  MaskSet set;
  for (const auto& [grader, p] : f.masks) set.graders.emplace(grader, read_mask(m.resolve(p)));
  return set;
}

}  // namespace cystseg
