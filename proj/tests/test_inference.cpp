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

#include "cystseg/inference.hpp"
#include "cystseg/testing/oracles.hpp"
#include "cystseg/testing/selfcheck.hpp"
#include "support.hpp"

namespace cystseg {
namespace {

nn::ResNet<float> tiny_model(std::uint64_t seed) {
  nn::ModelSpec spec;
  spec.stem_width = 4;
  spec.widths = {4, 4, 8, 8};
  nn::ResNet<float> m(spec);
  m.init(seed);
  return m;
}

TEST(ReflectPad, MatchesMirrorWalk) {
  for (int pad : {1, 5, 7}) {
    const auto img = selfcheck::random_image(6, 9, 40 + pad);
    const auto ref = oracle::reflect_pad(img, pad);
    const auto out = reflect_pad(img, pad);
    ASSERT_EQ(out.height(), ref.height());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_EQ(out.pixels()[i], ref.pixels()[i]);
  }
}

TEST(ReflectPad, ExcludesEdgePixel) {
  Image<std::uint16_t> img(1, 4, std::vector<std::uint16_t>{1, 2, 3, 4});
  const auto out = reflect_pad(img, 2);
  EXPECT_EQ(out(2, 0), 3);
  EXPECT_EQ(out(2, 1), 2);
  EXPECT_EQ(out(2, 6), 3);
  EXPECT_EQ(out(2, 7), 2);
}

TEST(Predict, StrideOneCoversEveryPixel) {
  auto model = tiny_model(1);
  const auto frame = test::make_frame(selfcheck::random_image(20, 27, 2));
  const auto p = predict_frame(model, frame);
  EXPECT_EQ(p.prob.height(), 20);
  EXPECT_EQ(p.prob.width(), 27);
  EXPECT_EQ(p.mask.height(), 20);
  for (std::size_t i = 0; i < p.prob.size(); ++i) {
    EXPECT_GE(p.prob.pixels()[i], 0.0f);
    EXPECT_LE(p.prob.pixels()[i], 1.0f);
    EXPECT_EQ(p.mask.pixels()[i], p.prob.pixels()[i] > 0.5f ? 1 : 0);
  }
}

TEST(Predict, StrideOneEqualsBruteForce) {
  const auto r = selfcheck::sliding_window(32, 3);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Predict, BatchSizeDoesNotChangeOutput) {
  auto model = tiny_model(4);
  const auto frame = test::make_frame(selfcheck::random_image(15, 18, 5));
  PredictOptions a, b;
  a.batch_size = 1;
  b.batch_size = 1000;
  EXPECT_EQ(predict_frame(model, frame, a).prob, predict_frame(model, frame, b).prob);
}

TEST(Predict, StrideFillsBlocksFromTheirCenter) {
  auto model = tiny_model(6);
  const auto frame = test::make_frame(selfcheck::random_image(14, 13, 7));
  PredictOptions s4;
  s4.stride = 4;
  const auto coarse = predict_frame(model, frame, s4);
  const auto fine = predict_frame(model, frame);
  for (int r = 0; r < 14; ++r)
    for (int c = 0; c < 13; ++c) {
      const int r0 = r / 4 * 4, c0 = c / 4 * 4;
      EXPECT_EQ(coarse.prob(r, c), fine.prob(std::min(r0 + 2, 13), std::min(c0 + 2, 12))) << r << "," << c;
    }
}

TEST(Predict, RejectsBadOptions) {
  auto model = tiny_model(1);
  const auto frame = test::make_frame(selfcheck::random_image(12, 12, 1));
  PredictOptions o;
  o.stride = 0;
  EXPECT_ERRC(predict_frame(model, frame, o), Errc::InvalidConfig);
  o.stride = 1;
  o.patch_size = 9;
  EXPECT_ERRC(predict_frame(model, frame, o), Errc::ShapeError);
}

TEST(Quantify, AreaTimesSpacing) {
  Mask m(20, 20);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) m(r, c) = 1;
  const std::vector<Mask> masks{m, Mask(20, 20)};
  const std::vector<FrameSpacing> sp{{0.01, 0.01}, {0.01, 0.01}};
  const auto q = quantify_volume(masks, sp, 0.12);
  EXPECT_NEAR(q.areas_mm2[0], 0.01, 1e-15);
  EXPECT_EQ(q.areas_mm2[1], 0.0);
  EXPECT_NEAR(q.volume_mm3, 0.0012, 1e-15);
}

TEST(Quantify, MissingSpacing) {
  const std::vector<Mask> masks{Mask(2, 2)};
  EXPECT_ERRC(quantify_volume(masks, std::vector<FrameSpacing>{{0.0, 0.01}}, 0.1), Errc::MissingSpacing);
  EXPECT_ERRC(quantify_volume(masks, std::vector<FrameSpacing>{{0.01, 0.01}}, 0.0), Errc::MissingSpacing);
  EXPECT_ERRC(quantify_volume(masks, std::vector<FrameSpacing>{}, 0.1), Errc::MissingSpacing);
}

TEST(Overlay, HighlightsExactlyTheMask) {
  const auto img = selfcheck::random_image(9, 7, 8);
  Mask m(9, 7);
  m(1, 1) = m(4, 6) = m(8, 0) = 1;
  const auto o = render_overlay(img, m);
  EXPECT_EQ(count_highlighted(o), 3u);
  EXPECT_EQ(o.rgb[3 * (1 * 7 + 1)], 255);
  EXPECT_EQ(o.rgb[3 * (1 * 7 + 1) + 1], img(1, 1) / 2);
  EXPECT_EQ(o.rgb[0], img(0, 0));
  EXPECT_ERRC(render_overlay(img, Mask(3, 3)), Errc::ShapeMismatch);
}

TEST(Overlay, PngRoundTrip) {
  test::TempDir dir;
  Mask m(5, 6);
  m(2, 3) = 1;
  const auto o = render_overlay(selfcheck::random_image(5, 6, 9), m);
  write_rgb_png(o, dir / "o.png");
  const auto back = read_rgb_png(dir / "o.png");
  EXPECT_EQ(back.rgb, o.rgb);
  EXPECT_EQ(count_highlighted(back), 1u);
}

TEST(Probability, ScaledTo8Bit) {
  Image<float> p(1, 3, std::vector<float>{0.0f, 0.5f, 1.0f});
  const auto q = probability_image(p);
  EXPECT_EQ(q(0, 0), 0);
  EXPECT_EQ(q(0, 1), 128);
  EXPECT_EQ(q(0, 2), 255);
}

}  // namespace
}  // namespace cystseg
