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

// Grayscale PNG (8/16-bit) and binary PGM (P5) codecs.

#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "cystseg/error.hpp"
#include "cystseg/image.hpp"

namespace cystseg {

struct GrayImage {
  Image<std::uint16_t> pixels;
  int bit_depth = 8;
};

namespace detail {

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::MissingFile, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::IoError, "short write to " + path.string());
}

struct PngReadState {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset;
};

inline void png_read_callback(png_structp png, png_bytep out, png_size_t count) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + count > state->bytes->size()) png_error(png, "unexpected end of data");
  std::memcpy(out, state->bytes->data() + state->offset, count);
  state->offset += count;
}

inline void png_write_callback(png_structp png, png_bytep data, png_size_t count) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + count);
}

inline void png_flush_callback(png_structp) {}

inline void png_silent_warning(png_structp, png_const_charp) {}

// No objects with non-trivial destructors live in this frame across setjmp.
inline bool decode_png_raw(const std::vector<std::uint8_t>* bytes, std::vector<std::uint8_t>* raw, png_uint_32* width,
                           png_uint_32* height, int* depth, const char** why) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_silent_warning);
  if (png == nullptr) {
    *why = "cannot allocate png reader";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    *why = "cannot allocate png info";
    return false;
  }
  PngReadState state{bytes, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    *why = "corrupt or truncated png";
    return false;
  }
  png_set_read_fn(png, &state, png_read_callback);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    *why = "png is not single-channel grayscale";
    return false;
  }
  if (bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    bit_depth = 8;
  }
  if (bit_depth == 16) png_set_swap(png);  // native little-endian order below
  png_read_update_info(png, info);
  *width = png_get_image_width(png, info);
  *height = png_get_image_height(png, info);
  *depth = bit_depth;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raw->resize(rowbytes * (*height));
  for (png_uint_32 r = 0; r < *height; ++r) png_read_row(png, raw->data() + r * rowbytes, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline bool encode_png_raw(const std::vector<std::uint8_t>* raw, png_uint_32 width, png_uint_32 height, int depth,
                           std::vector<std::uint8_t>* out) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_silent_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, out, png_write_callback, png_flush_callback);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) png_set_swap(png);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * (depth == 16 ? 2 : 1);
  for (png_uint_32 r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(raw->data() + r * rowbytes));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

// 8-bit RGB, interleaved.
inline bool encode_rgb_png_raw(const std::vector<std::uint8_t>* raw, png_uint_32 width, png_uint_32 height,
                               std::vector<std::uint8_t>* out) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_silent_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, out, png_write_callback, png_flush_callback);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (png_uint_32 r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(raw->data() + static_cast<std::size_t>(r) * width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

inline bool decode_rgb_png_raw(const std::vector<std::uint8_t>* bytes, std::vector<std::uint8_t>* raw,
                               png_uint_32* width, png_uint_32* height) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_silent_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  PngReadState state{bytes, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &state, png_read_callback);
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  *width = png_get_image_width(png, info);
  *height = png_get_image_height(png, info);
  raw->resize(static_cast<std::size_t>(*width) * (*height) * 3);
  for (png_uint_32 r = 0; r < *height; ++r)
    png_read_row(png, raw->data() + static_cast<std::size_t>(r) * (*width) * 3, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline GrayImage decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::vector<std::uint8_t> raw;
  png_uint_32 width = 0, height = 0;
  int depth = 8;
  const char* why = "";
  if (!decode_png_raw(&bytes, &raw, &width, &height, &depth, &why)) {
    const std::string reason = why;
    fail(reason.find("grayscale") != std::string::npos ? Errc::UnsupportedFormat : Errc::CorruptImage,
         name + ": " + reason);
  }
  GrayImage img{Image<std::uint16_t>(static_cast<int>(height), static_cast<int>(width)), depth};
  auto px = img.pixels.pixels();
  if (depth == 16) {
    for (std::size_t i = 0; i < px.size(); ++i)
      px[i] = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
  } else {
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = raw[i];
  }
  return img;
}

inline void skip_pgm_space(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  for (;;) {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    return;
  }
}

inline long read_pgm_int(const std::vector<std::uint8_t>& b, std::size_t& pos, const std::string& name) {
  skip_pgm_space(b, pos);
  if (pos >= b.size() || !std::isdigit(b[pos])) fail(Errc::CorruptImage, name + ": malformed pgm header");
  long v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos] - '0');
    if (v > 1'000'000) fail(Errc::CorruptImage, name + ": pgm header value out of range");
    ++pos;
  }
  return v;
}

inline GrayImage decode_pgm(const std::vector<std::uint8_t>& b, const std::string& name) {
  std::size_t pos = 2;
  const long width = read_pgm_int(b, pos, name);
  const long height = read_pgm_int(b, pos, name);
  const long maxval = read_pgm_int(b, pos, name);
  if (maxval <= 0 || maxval > 65535) fail(Errc::CorruptImage, name + ": invalid pgm maxval");
  if (pos >= b.size() || !std::isspace(b[pos])) fail(Errc::CorruptImage, name + ": malformed pgm header");
  ++pos;
  const int depth = maxval > 255 ? 16 : 8;
  const std::size_t bpp = depth == 16 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * bpp;
  if (b.size() - pos < need) fail(Errc::CorruptImage, name + ": truncated pgm data");
  GrayImage img{Image<std::uint16_t>(static_cast<int>(height), static_cast<int>(width)), depth};
  auto px = img.pixels.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = bpp == 2 ? static_cast<std::uint16_t>((b[pos + 2 * i] << 8) | b[pos + 2 * i + 1]) : b[pos + i];
    if (px[i] > maxval) fail(Errc::CorruptImage, name + ": pixel exceeds pgm maxval");
  }
  return img;
}

}  // namespace detail

/// Reads an 8- or 16-bit single-channel PNG or a binary PGM (P5).
inline GrayImage read_gray_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(Errc::MissingFile, "missing file " + path.string());
  const auto bytes = detail::read_bytes(path);
  static constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngMagic, 8) == 0) return detail::decode_png(bytes, path.string());
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return detail::decode_pgm(bytes, path.string());
  if (bytes.size() < 8 && bytes.size() > 0 && bytes[0] == 0x89) fail(Errc::CorruptImage, path.string() + ": truncated png");
  fail(Errc::UnsupportedFormat, path.string() + ": not a grayscale PNG or binary PGM");
}

inline std::vector<std::uint8_t> encode_png(const Image<std::uint16_t>& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) fail(Errc::UnsupportedFormat, "png bit depth must be 8 or 16");
  std::vector<std::uint8_t> raw;
  const auto px = img.pixels();
  raw.reserve(px.size() * (bit_depth == 16 ? 2 : 1));
  for (const auto v : px) {
    if (bit_depth == 16) {
      raw.push_back(static_cast<std::uint8_t>(v & 0xff));
      raw.push_back(static_cast<std::uint8_t>(v >> 8));
    } else {
      if (v > 255) fail(Errc::UnsupportedFormat, "pixel value exceeds 8-bit range");
      raw.push_back(static_cast<std::uint8_t>(v));
    }
  }
  std::vector<std::uint8_t> out;
  if (!detail::encode_png_raw(&raw, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()),
                              bit_depth, &out))
    fail(Errc::IoError, "png encoding failed");
  return out;
}

inline void write_gray_png(const Image<std::uint16_t>& img, int bit_depth, const std::filesystem::path& path) {
  detail::write_bytes(path, encode_png(img, bit_depth));
}

inline void write_gray_png(const Image<std::uint8_t>& img, const std::filesystem::path& path) {
  Image<std::uint16_t> wide(img.height(), img.width());
  std::copy(img.pixels().begin(), img.pixels().end(), wide.pixels().begin());
  write_gray_png(wide, 8, path);
}

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // interleaved, row-major
};

inline void write_rgb_png(const RgbImage& img, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out;
  if (img.rgb.size() != static_cast<std::size_t>(img.height) * img.width * 3 ||
      !detail::encode_rgb_png_raw(&img.rgb, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                                  &out))
    fail(Errc::IoError, "rgb png encoding failed for " + path.string());
  detail::write_bytes(path, out);
}

inline RgbImage read_rgb_png(const std::filesystem::path& path) {
  const auto bytes = detail::read_bytes(path);
  RgbImage img;
  png_uint_32 w = 0, h = 0;
  if (!detail::decode_rgb_png_raw(&bytes, &img.rgb, &w, &h))
    fail(Errc::CorruptImage, path.string() + ": not a readable 8-bit RGB png");
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  return img;
}

inline void write_gray_pgm(const Image<std::uint16_t>& img, int bit_depth, const std::filesystem::path& path) {
  const std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n" +
                             (bit_depth == 16 ? "65535" : "255") + "\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (const auto v : img.pixels()) {
    if (bit_depth == 16) bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  detail::write_bytes(path, bytes);
}

}  // namespace cystseg
