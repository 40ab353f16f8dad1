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

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "cystseg/image.hpp"
#include "cystseg/manifest.hpp"

namespace cystseg::test {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cystseg-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Frame make_frame(Image<std::uint16_t> px, int bit_depth = 8, Vendor vendor = Vendor::Cirrus) {
  Frame f;
  f.pixels = std::move(px);
  f.bit_depth = bit_depth;
  f.vendor = vendor;
  f.band_top = 0;
  f.band_bottom = f.pixels.height();
  f.pixel_size_x = 0.01;
  f.pixel_size_y = 0.01;
  return f;
}

template <typename T>
Image<T> filled(int h, int w, T v) {
  Image<T> img(h, w);
  for (auto& p : img.pixels()) p = v;
  return img;
}

}  // namespace cystseg::test

#define EXPECT_ERRC(stmt, errc)                                   \
  do {                                                            \
    try {                                                         \
      stmt;                                                       \
      ADD_FAILURE() << "expected " << ::cystseg::to_string(errc); \
    } catch (const ::cystseg::Error& e) {                         \
      EXPECT_EQ(e.code(), errc) << e.what();                      \
    }                                                             \
  } while (0)
