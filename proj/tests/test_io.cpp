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

#include <gtest/gtest.h>

#include "cystseg/image_codec.hpp"
#include "cystseg/manifest.hpp"
#include "cystseg/testing/selfcheck.hpp"
#include "support.hpp"

namespace cystseg {
namespace {

using nlohmann::json;

TEST(Png, EightAndSixteenBitRoundTrip) {
  test::TempDir dir;
  const auto img8 = selfcheck::random_image(7, 9, 1);
  write_gray_png(img8, 8, dir / "a.png");
  auto back = read_gray_image(dir / "a.png");
  EXPECT_EQ(back.bit_depth, 8);
  EXPECT_EQ(back.pixels, img8);
  const auto img16 = selfcheck::random_image(5, 4, 2, 65535);
  write_gray_png(img16, 16, dir / "b.png");
  back = read_gray_image(dir / "b.png");
  EXPECT_EQ(back.bit_depth, 16);
  EXPECT_EQ(back.pixels, img16);
}

TEST(Png, RejectsOutOfRangeAndBadInput) {
  test::TempDir dir;
  EXPECT_ERRC(write_gray_png(Image<std::uint16_t>(2, 2, 300), 8, dir / "x.png"), Errc::UnsupportedFormat);
  EXPECT_ERRC(read_gray_image(dir / "missing.png"), Errc::MissingFile);
  auto bytes = encode_png(selfcheck::random_image(8, 8, 3), 8);
  bytes.resize(bytes.size() / 2);
  detail::write_bytes(dir / "cut.png", bytes);
  EXPECT_ERRC(read_gray_image(dir / "cut.png"), Errc::CorruptImage);
  write_rgb_png(RgbImage{2, 2, std::vector<std::uint8_t>(12, 9)}, dir / "rgb.png");
  EXPECT_ERRC(read_gray_image(dir / "rgb.png"), Errc::UnsupportedFormat);
  detail::write_bytes(dir / "t.txt", {'h', 'e', 'l', 'l', 'o', '!', '!', '!', '!'});
  EXPECT_ERRC(read_gray_image(dir / "t.txt"), Errc::UnsupportedFormat);
}

TEST(Pgm, ReadsBinaryGraymaps) {
  test::TempDir dir;
  const auto img = selfcheck::random_image(3, 5, 4, 1000);
  write_gray_pgm(img, 16, dir / "a.pgm");
  const auto back = read_gray_image(dir / "a.pgm");
  EXPECT_EQ(back.bit_depth, 16);
  EXPECT_EQ(back.pixels, img);
  const std::string text = "P5\n# comment\n2 1\n255\n";
  std::vector<std::uint8_t> b(text.begin(), text.end());
  b.push_back(7);
  b.push_back(200);
  detail::write_bytes(dir / "c.pgm", b);
  const auto c = read_gray_image(dir / "c.pgm");
  EXPECT_EQ(c.pixels(0, 1), 200);
  b.pop_back();
  detail::write_bytes(dir / "d.pgm", b);
  EXPECT_ERRC(read_gray_image(dir / "d.pgm"), Errc::CorruptImage);
}

TEST(Mask, StoredAsZeroAnd255) {
  test::TempDir dir;
  Mask m(3, 4);
  m(1, 2) = 1;
  write_mask(m, dir / "m.png");
  EXPECT_EQ(read_gray_image(dir / "m.png").pixels(1, 2), 255);
  EXPECT_EQ(read_mask(dir / "m.png"), m);
  write_gray_png(Image<std::uint16_t>(2, 2, 7), 8, dir / "g.png");
  EXPECT_ERRC(read_mask(dir / "g.png"), Errc::CorruptImage);
  m(0, 0) = 3;
  EXPECT_ERRC(write_mask(m, dir / "bad.png"), Errc::IoError);
}

json one_volume_manifest() {
  return {{"volumes",
           {{{"volume_id", "Cirrus_1"},
             {"vendor", "Cirrus"},
             {"split", "Testing1"},
             {"pixel_size_x", 0.01},
             {"pixel_size_y", 0.002},
             {"slice_spacing", 0.1},
             {"frames",
              {{{"image", "v/f0.png"}, {"band", {1, 5}}, {"masks", {{"grader1", "v/g0.png"}}}},
               {{"image", "v/f1.png"}, {"band", {0, 6}}, {"pixel_size_x", 0.02}}}}}}}};
}

void write_fixture(const std::filesystem::path& root) {
  std::filesystem::create_directories(root / "v");
  write_gray_png(selfcheck::random_image(6, 8, 1), 8, root / "v/f0.png");
  write_gray_png(selfcheck::random_image(6, 8, 2), 8, root / "v/f1.png");
  write_mask(Mask(6, 8), root / "v/g0.png");
}

TEST(Manifest, EmptyVolumeListIsValid) {
  const auto m = parse_manifest(json{{"volumes", json::array()}}, ".");
  EXPECT_TRUE(m.volumes.empty());
  EXPECT_EQ(m.count(Split::Training), 0u);
}

TEST(Manifest, CountsEveryListedVolume) {
  json doc = {{"volumes", json::array()}};
  for (const char* vendor : {"Cirrus", "Spectralis", "Topcon", "Nidek"})
    for (int i = 1; i <= 4; ++i)
      doc["volumes"].push_back({{"volume_id", std::string(vendor) + "_" + std::to_string(i)},
                                {"vendor", vendor},
                                {"split", "Training"},
                                {"pixel_size_x", 0.01},
                                {"pixel_size_y", 0.01},
                                {"slice_spacing", 0.1},
                                {"frames", {{{"image", "x.png"}, {"band", {0, 1}}}}}});
  EXPECT_EQ(parse_manifest(doc, ".").count(Split::Training), 16u);
}

TEST(Png, SinglePixelAndCheckerboardMask) {
  test::TempDir dir;
  write_gray_png(Image<std::uint16_t>(1, 1, 0), 8, dir / "one.png");
  const auto f = read_frame(dir / "one.png");
  EXPECT_EQ(f.height(), 1);
  EXPECT_EQ(f.pixels(0, 0), 0);
  EXPECT_EQ(f.band_bottom, 1);
  Mask m(6, 7);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 7; ++c) m(r, c) = (r + c) % 2;
  write_mask(m, dir / "cb.png");
  EXPECT_EQ(read_mask(dir / "cb.png"), m);
}

TEST(Manifest, ParsesAndResolvesFrames) {
  test::TempDir dir;
  write_fixture(dir.path());
  write_text(one_volume_manifest().dump(), dir / "manifest.json");
  const auto m = load_manifest(dir / "manifest.json");
  ASSERT_EQ(m.volumes.size(), 1u);
  EXPECT_EQ(m.count(Split::Testing1), 1u);
  ASSERT_NE(m.find("Cirrus_1"), nullptr);
  EXPECT_EQ(m.find("Nidek_2"), nullptr);
  const auto& v = m.volumes[0];
  const auto f0 = load_frame(m, v, v.frames[0]);
  EXPECT_EQ(f0.band_top, 1);
  EXPECT_EQ(f0.band_bottom, 5);
  EXPECT_EQ(f0.pixel_size_x, 0.01);
  EXPECT_EQ(load_frame(m, v, v.frames[1]).pixel_size_x, 0.02);
  EXPECT_EQ(load_masks(m, v.frames[0]).graders.size(), 1u);
  EXPECT_EQ(f0.pixels, selfcheck::random_image(6, 8, 1));
}

TEST(Manifest, SaveLoadRoundTrip) {
  test::TempDir dir;
  write_fixture(dir.path());
  const auto m = parse_manifest(one_volume_manifest(), dir.path());
  save_manifest(m, dir / "out.json");
  EXPECT_EQ(load_manifest(dir / "out.json"), m);
}

TEST(Manifest, SchemaErrors) {
  auto doc = one_volume_manifest();
  doc["volumes"][0].erase("vendor");
  EXPECT_ERRC(parse_manifest(doc, "."), Errc::SchemaError);
  doc = one_volume_manifest();
  doc["volumes"][0]["vendor"] = "Zeiss";
  EXPECT_ERRC(parse_manifest(doc, "."), Errc::SchemaError);
  doc = one_volume_manifest();
  doc["volumes"].push_back(doc["volumes"][0]);
  EXPECT_ERRC(parse_manifest(doc, "."), Errc::SchemaError);
  doc = one_volume_manifest();
  doc["volumes"][0]["frames"][0]["band"] = {1};
  EXPECT_ERRC(parse_manifest(doc, "."), Errc::SchemaError);
  doc = one_volume_manifest();
  doc["volumes"][0]["pixel_size_x"] = "wide";
  EXPECT_ERRC(parse_manifest(doc, "."), Errc::SchemaError);
  EXPECT_ERRC(parse_manifest(json::array(), "."), Errc::SchemaError);
}

TEST(Manifest, FileErrors) {
  test::TempDir dir;
  EXPECT_ERRC(load_manifest(dir / "none.json"), Errc::MissingFile);
  write_text("{not json", dir / "bad.json");
  EXPECT_ERRC(load_manifest(dir / "bad.json"), Errc::SchemaError);
  write_text(one_volume_manifest().dump(), dir / "m.json");
  EXPECT_ERRC(load_manifest(dir / "m.json"), Errc::MissingFile);
  write_fixture(dir.path());
  auto doc = one_volume_manifest();
  doc["volumes"][0]["frames"][0]["band"] = {3, 9};
  write_text(doc.dump(), dir / "band.json");
  EXPECT_ERRC(load_manifest(dir / "band.json"), Errc::InvalidBand);
  write_mask(Mask(5, 8), dir / "v/g0.png");
  EXPECT_ERRC(load_manifest(dir / "m.json"), Errc::ShapeMismatch);
}

}  // namespace
}  // namespace cystseg
