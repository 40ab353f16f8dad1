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

// Dataset-level steps shared by the command-line tool and the tests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cystseg/config.hpp"
#include "cystseg/error.hpp"
#include "cystseg/evaluation.hpp"
#include "cystseg/inference.hpp"
#include "cystseg/manifest.hpp"
#include "cystseg/nn/resnet.hpp"
#include "cystseg/parallel.hpp"
#include "cystseg/patchset.hpp"
#include "cystseg/preprocess.hpp"
#include "cystseg/synthetic.hpp"

namespace cystseg {

/// Preprocesses every frame and co-transforms its masks; writes a new
/// manifest (band = full frame, rescaled pixel sizes) under `out_dir`.
inline Manifest preprocess_dataset(const Manifest& in, const PreprocessConfig& config,
                                   const std::filesystem::path& out_dir) {
  config.validate();
  Manifest out;
  out.root = out_dir;
  for (const auto& v : in.volumes) {
    VolumeEntry ov = v;
    ov.frames.assign(v.frames.size(), FrameEntry{});
    parallel_for(v.frames.size(), [&](std::size_t fi) {
      const FrameEntry& f = v.frames[fi];
      const Frame frame = load_frame(in, v, f);
      const auto [pf, pm] = preprocess_frame(frame, load_masks(in, f), config);
      const std::string stem = frame_stem(static_cast<int>(fi));
      const std::filesystem::path dir = v.volume_id;
      FrameEntry e;
      e.image = dir / ("frame_" + stem + ".png");
      e.band_top = 0;
      e.band_bottom = pf.height();
      e.pixel_size_x = pf.pixel_size_x;
      e.pixel_size_y = pf.pixel_size_y;
      write_gray_png(pf.pixels, 8, out_dir / e.image);
      for (const auto& [grader, m] : pm.graders) {
        e.masks[grader] = dir / (grader + "_" + stem + ".png");
        write_mask(m, out_dir / e.masks[grader]);
      }
      ov.frames[fi] = std::move(e);
    });
    out.volumes.push_back(std::move(ov));
  }
  save_manifest(out, out_dir / "manifest.json");
  return out;
}

/// Loads the frames of one split with their fused ground truth.
inline std::vector<LabeledFrame> load_labeled_frames(const Manifest& m, Split split, FusionRule fusion) {
  std::vector<LabeledFrame> frames;
  for (std::size_t vi = 0; vi < m.volumes.size(); ++vi) {
    const auto& v = m.volumes[vi];
    if (v.split != split) continue;
    for (std::size_t fi = 0; fi < v.frames.size(); ++fi) {
      const Frame frame = load_frame(m, v, v.frames[fi]);
      if (frame.bit_depth != 8) fail(Errc::SchemaError, "patch extraction expects preprocessed 8-bit frames");
      frames.push_back({static_cast<std::uint32_t>(vi), static_cast<std::uint32_t>(fi), v.vendor, frame.pixels,
                        fuse_graders(load_masks(m, v.frames[fi]), fusion)});
    }
  }
  return frames;
}

inline BalancedSet build_patch_dataset(const Manifest& m, const PatchConfig& config, std::uint64_t seed,
                                       Split split = Split::Training) {
  const auto frames = load_labeled_frames(m, split, config.fusion);
  return build_balanced_set(frames, config, seed);
}

inline std::filesystem::path prediction_mask_path(const std::filesystem::path& dir, const std::string& volume_id,
                                                  std::size_t frame) {
  return dir / volume_id / ("mask_" + frame_stem(static_cast<int>(frame)) + ".png");
}

/// Predicts every frame of every non-training volume; writes masks,
/// probability maps, and overlays under `out_dir/<volume_id>/`.
inline std::size_t predict_dataset(nn::ResNet<float>& model, const Manifest& m, const std::filesystem::path& out_dir,
                                   const PredictOptions& opts) {
  struct Job {
    const VolumeEntry* volume;
    std::size_t frame;
  };
  std::vector<Job> jobs;
  for (const auto& v : m.volumes)
    if (v.split != Split::Training)
      for (std::size_t fi = 0; fi < v.frames.size(); ++fi) jobs.push_back({&v, fi});
  parallel_for(jobs.size(), [&](std::size_t j) {
    const auto& job = jobs[j];
    const Frame frame = to_8bit(load_frame(m, *job.volume, job.volume->frames[job.frame]));
    const PredictionMap pred = predict_frame(model, frame, opts);
    const std::string stem = frame_stem(static_cast<int>(job.frame));
    const auto dir = out_dir / job.volume->volume_id;
    write_mask(pred.mask, prediction_mask_path(out_dir, job.volume->volume_id, job.frame));
    write_gray_png(probability_image(pred.prob), dir / ("prob_" + stem + ".png"));
    export_overlay(frame, pred, dir / ("overlay_" + stem + ".png"));
  });
  return jobs.size();
}

/// Scores the predictions of every non-training volume against each rule.
inline std::vector<MetricsRow> evaluate_predictions(const std::filesystem::path& pred_dir, const Manifest& m,
                                                    std::span<const GraderRule> rules) {
  std::vector<VolumeEvalInput> inputs;
  for (const auto& v : m.volumes) {
    if (v.split == Split::Training) continue;
    VolumeEvalInput in{v.volume_id, v.vendor, {}, {}, 0.0};
    std::vector<FrameSpacing> spacings;
    for (std::size_t fi = 0; fi < v.frames.size(); ++fi) {
      const auto path = prediction_mask_path(pred_dir, v.volume_id, fi);
      if (!std::filesystem::exists(path))
        fail(Errc::MissingPrediction, "volume " + v.volume_id + ": missing prediction " + path.string());
      in.predictions.push_back(read_mask(path));
      in.truth.push_back(load_masks(m, v.frames[fi]));
      spacings.push_back({v.frames[fi].pixel_size_x.value_or(v.pixel_size_x),
                          v.frames[fi].pixel_size_y.value_or(v.pixel_size_y)});
    }
    in.cyst_volume_mm3 = quantify_volume(in.predictions, spacings, v.slice_spacing).volume_mm3;
    inputs.push_back(std::move(in));
  }
  return evaluate_split(inputs, rules);
}

}  // namespace cystseg
