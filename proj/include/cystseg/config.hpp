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

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "cystseg/error.hpp"
#include "cystseg/inference.hpp"
#include "cystseg/nn/resnet.hpp"
#include "cystseg/nn/trainer.hpp"
#include "cystseg/patchset.hpp"
#include "cystseg/preprocess.hpp"

namespace cystseg {

/// The shared run configuration: one JSON document with sections
/// "preprocess", "patches", "model", "train", "predict". Missing sections or
/// keys keep their defaults.
struct RunConfig {
  PreprocessConfig preprocess;
  PatchConfig patches;
  nn::ModelSpec model;
  nn::TrainConfig train;
  PredictOptions predict;
};

inline void to_json(nlohmann::json& j, const PredictOptions& p) {
  j = {{"stride", p.stride}, {"batch_size", p.batch_size}, {"patch_size", p.patch_size}};
}

inline void from_json(const nlohmann::json& j, PredictOptions& p) {
  p.stride = j.value("stride", p.stride);
  p.batch_size = j.value("batch_size", p.batch_size);
  p.patch_size = j.value("patch_size", p.patch_size);
  if (p.stride < 1 || p.batch_size < 1) fail(Errc::InvalidConfig, "predict stride and batch_size must be >= 1");
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"preprocess", c.preprocess}, {"patches", c.patches}, {"model", c.model}, {"train", c.train},
       {"predict", c.predict}};
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (!j.is_object()) fail(Errc::InvalidConfig, "run configuration must be a JSON object");
    if (j.contains("preprocess")) c.preprocess = j.at("preprocess").get<PreprocessConfig>();
    if (j.contains("patches")) c.patches = j.at("patches").get<PatchConfig>();
    if (j.contains("model")) c.model = j.at("model").get<nn::ModelSpec>();
    if (j.contains("train")) c.train = j.at("train").get<nn::TrainConfig>();
    if (j.contains("predict")) c.predict = j.at("predict").get<PredictOptions>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidConfig, std::string("run configuration: ") + e.what());
  }
  if (c.model.input_size != c.patches.patch_size)
    fail(Errc::InvalidConfig, "model.input_size must equal patches.patch_size");
  return c;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::MissingFile, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_json_file(path)); }

}  // namespace cystseg
