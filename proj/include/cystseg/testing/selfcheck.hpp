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

// Property checks shared by `cystseg selfcheck` and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cystseg/evaluation.hpp"
#include "cystseg/inference.hpp"
#include "cystseg/nn/ops.hpp"
#include "cystseg/nn/resnet.hpp"
#include "cystseg/patchset.hpp"
#include "cystseg/preprocess.hpp"
#include "cystseg/testing/gradcheck.hpp"
#include "cystseg/testing/oracles.hpp"
#include "cystseg/testing/published.hpp"

namespace cystseg::selfcheck {

struct Outcome {
  std::string name;
  bool ok = false;
  std::string detail;
};

inline Image<std::uint16_t> random_image(int h, int w, std::uint64_t seed, int max_value = 255) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, max_value);
  Image<std::uint16_t> img(h, w);
  for (auto& v : img.pixels()) v = static_cast<std::uint16_t>(d(rng));
  return img;
}

inline Frame as_frame(Image<std::uint16_t> img) {
  Frame f;
  f.pixels = std::move(img);
  f.bit_depth = 8;
  f.band_top = 0;
  f.band_bottom = f.pixels.height();
  return f;
}

/// 2PR/(P+R) against every published per-volume Dice.
inline Outcome metric_identity(double tol = 5e-4) {
  double worst = 0.0;
  std::string where;
  for (const auto& row : published::kGrader1) {
    const double err = std::abs(harmonic_dice(row.precision, row.recall) - row.dice);
    if (err > worst) worst = err, where = std::string(row.volume);
  }
  return {"dice equals harmonic mean of precision and recall (15 volumes)", worst <= tol,
          "max |error| " + detail::fmt_short(worst) + " at " + where};
}

inline Outcome cirrus_aggregation(double tol = 5e-4) {
  std::vector<double> dice;
  for (const auto& row : published::kGrader1)
    if (row.volume.starts_with("Cirrus")) dice.push_back(row.dice);
  const Summary s = summarize(dice);
  double ss = 0.0;
  for (double d : dice) ss += (d - s.mean) * (d - s.mean);
  const double population_std = std::sqrt(ss / dice.size());
  const bool mean_ok = std::abs(s.mean - published::kGrader1CirrusMeanDice) <= tol;
  const bool std_ok = std::abs(s.std - published::kGrader1CirrusStdDice) <= tol;
  const bool population_rejected = std::abs(population_std - published::kGrader1CirrusStdDice) > tol;
  return {"cirrus mean and sample std reproduce the published summary", mean_ok && std_ok && population_rejected,
          "mean " + detail::fmt_short(s.mean) + ", sample std " + detail::fmt_short(s.std) + ", population std " +
              detail::fmt_short(population_std)};
}

inline Outcome gradients(int seeds, double tol = 1e-4) {
  double worst = 0.0;
  std::string where = "none";
  bool ok = true;
  std::size_t checked = 0;
  for (int s = 1; s <= seeds; ++s)
    for (const auto& r : gradcheck::run_all(static_cast<std::uint64_t>(s))) {
      ok = ok && r.ok(tol);
      checked += r.checked;
      if (r.max_rel_error >= worst) worst = r.max_rel_error, where = r.name + " seed " + std::to_string(s);
    }
  return {"finite-difference gradients for every layer and a 2-block model (" + std::to_string(seeds) + " seeds)", ok,
          std::to_string(checked) + " entries, max rel error " + detail::fmt_short(worst) + " (" + where + ")"};
}

inline Outcome nlm_oracle(int fixtures) {
  const NlmParams p{5, 3, 10.0};
  int mismatches = 0;
  for (int s = 0; s < fixtures; ++s) {
    const auto img = random_image(7, 7, 1000 + s);
    if (!(nlm_denoise(as_frame(img), p).pixels == oracle::nlm(img, p.search_window, p.patch_window, p.h)))
      ++mismatches;
  }
  return {"non-local means equals brute force bit-exactly (" + std::to_string(fixtures) + " 7x7 fixtures)",
          mismatches == 0, std::to_string(mismatches) + " mismatching fixtures"};
}

/// Largest absolute deviation relative to the largest oracle magnitude.
inline Outcome conv_oracle(int seeds, double tol = 1e-5) {
  double worst = 0.0;
  for (int s = 0; s < seeds; ++s) {
    std::mt19937_64 rng(500 + s);
    std::normal_distribution<float> nd(0.0f, 1.0f);
    const int stride = 1 + s % 2;
    nn::Tensor<float> x({1 + s % 2, 2, 5 + s % 3, 5}), w({3, 2, 3, 3}), b({3});
    for (auto& v : x.values()) v = nd(rng);
    for (auto& v : w.values()) v = nd(rng);
    for (auto& v : b.values()) v = nd(rng);
    const auto y = nn::conv2d_forward(x, w, b, stride, 1);
    const auto ref = oracle::conv2d(x, w, std::vector<float>(b.values().begin(), b.values().end()), stride, 1);
    double scale = 0.0, err = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) {
      scale = std::max(scale, std::abs(static_cast<double>(ref[i])));
      err = std::max(err, std::abs(static_cast<double>(y[i]) - ref[i]));
    }
    worst = std::max(worst, err / scale);
  }
  return {"conv2d equals direct summation within 1e-5 relative", worst <= tol,
          "max rel error " + detail::fmt_short(worst)};
}

inline Outcome clahe_single_tile(int seeds) {
  const ClaheParams p{1, 1, 1e9};
  int worst = 0;
  std::vector<Image<std::uint16_t>> fixtures;
  Image<std::uint16_t> ramp(16, 16);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) ramp(r, c) = static_cast<std::uint16_t>(r * 16 + c);
  fixtures.push_back(ramp);
  for (int s = 0; s < seeds; ++s) fixtures.push_back(random_image(16 + s, 20, 700 + s, 80 + 7 * s));
  for (const auto& img : fixtures) {
    const auto a = clahe(as_frame(img), p).pixels;
    const auto b = oracle::equalize(img);
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(int(a.pixels()[i]) - int(b.pixels()[i])));
  }
  return {"single-tile unclipped CLAHE equals histogram equalization within 1 level", worst <= 1,
          "max deviation " + std::to_string(worst)};
}

/// Blocks whose last batch norm has gamma = beta = 0 reduce to relu(shortcut).
inline Outcome residual_identity(int seeds = 5) {
  std::size_t mismatches = 0, checked = 0;
  for (int s = 0; s < seeds; ++s)
    for (bool projection : {false, true}) {
      nn::BasicBlock<float> b = projection ? nn::BasicBlock<float>(3, 5, 2) : nn::BasicBlock<float>(4, 4, 1);
      std::mt19937_64 rng(static_cast<std::uint64_t>(s) + 1);
      b.init(rng);
      for (auto& g : b.bn2.params.gamma.values()) g = 0.0f;
      for (auto& v : b.bn2.params.beta.values()) v = 0.0f;
      const int c = projection ? 3 : 4;
      nn::Tensor<float> x({2, c, 6, 6});
      std::normal_distribution<float> nd(0.0f, 1.0f);
      for (auto& v : x.values()) v = nd(rng);
      for (nn::Mode mode : {nn::Mode::Train, nn::Mode::Eval}) {
        const auto y = b.forward(x, mode);
        nn::Tensor<float> shortcut = x;
        if (projection) shortcut = b.proj_bn->forward(b.proj->forward(x, nn::Mode::Eval), mode);
        const auto ref = nn::relu_forward(shortcut);
        ++checked;
        mismatches += !(y == ref);
      }
    }
  return {"zero residual branch gives relu(shortcut) exactly", mismatches == 0,
          std::to_string(checked - mismatches) + "/" + std::to_string(checked) + " exact"};
}

inline Outcome grid_arithmetic() {
  const auto grid = extract_grid(256, 512);
  const auto central = std::count_if(grid.begin(), grid.end(), [](const GridPosition& p) { return p.is_central; });
  return {"256x512 frame gives 1058 positions, 50 central", grid.size() == 1058 && central == 50,
          std::to_string(grid.size()) + " positions, " + std::to_string(central) + " central"};
}

/// Stride-1 dense prediction against classifying every padded crop alone.
inline Outcome sliding_window(int size = 32, std::uint64_t seed = 7) {
  nn::ModelSpec spec;
  spec.stem_width = 4;
  spec.widths = {4, 8, 8, 8};
  nn::ResNet<float> model(spec);
  model.init(seed);
  const Frame frame = as_frame(random_image(size, size, seed));
  PredictOptions opts;
  opts.stride = 1;
  opts.batch_size = 97;
  const PredictionMap fast = predict_frame(model, frame, opts);
  const int half = kPatchSize / 2;
  const auto padded = oracle::reflect_pad(frame.pixels, half);
  std::size_t prob_diff = 0, mask_diff = 0;
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      Image<std::uint8_t> patch(kPatchSize, kPatchSize);
      for (int i = 0; i < kPatchSize; ++i)
        for (int j = 0; j < kPatchSize; ++j) patch(i, j) = static_cast<std::uint8_t>(padded(r + i, c + j));
      const float p = classify_patch(model, patch);
      prob_diff += p != fast.prob(r, c);
      mask_diff += (p > 0.5f ? 1 : 0) != fast.mask(r, c);
    }
  return {"stride-1 dense prediction equals per-pixel classification", prob_diff == 0 && mask_diff == 0,
          std::to_string(mask_diff) + " mask and " + std::to_string(prob_diff) + " probability mismatches over " +
              std::to_string(size * size) + " pixels"};
}

inline std::vector<Outcome> run_all(int grad_seeds = 10, int nlm_fixtures = 100) {
  return {metric_identity(), cirrus_aggregation(), gradients(grad_seeds), nlm_oracle(nlm_fixtures),
          conv_oracle(20),   clahe_single_tile(10), residual_identity(),
          grid_arithmetic(), sliding_window()};
}

}  // namespace cystseg::selfcheck
