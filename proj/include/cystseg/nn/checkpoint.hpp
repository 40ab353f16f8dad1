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

// Checkpoint layout: "CYSTNET1", u64 little-endian header length, UTF-8 JSON
// header, then every tensor as little-endian float32 in header order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cystseg/error.hpp"
#include "cystseg/image_codec.hpp"
#include "cystseg/nn/resnet.hpp"

namespace cystseg::nn {

inline constexpr char kCheckpointMagic[] = "CYSTNET1";

struct Checkpoint {
  ResNet<float> model;
  nlohmann::json metadata;  // hyperparameters, seed, training summary
};

inline std::vector<std::uint8_t> encode_checkpoint(ResNet<float>& model, const nlohmann::json& metadata) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& t : model.tensors()) layers.push_back({{"name", t.name}, {"shape", t.tensor->shape()}});
  const auto& bn = model.stem_bn().params;
  nlohmann::json header = {{"format", "CYSTNET1"},
                           {"model", model.spec()},
                           {"batchnorm", {{"momentum", bn.momentum}, {"epsilon", bn.epsilon}}},
                           {"tensors", layers},
                           {"metadata", metadata}};
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 8);
  const std::uint64_t len = text.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& t : model.tensors())
    for (const float v : t.tensor->values()) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
  return out;
}

inline void save_checkpoint(ResNet<float>& model, const nlohmann::json& metadata, const std::filesystem::path& path) {
  cystseg::detail::write_bytes(path, encode_checkpoint(model, metadata));
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& b, const std::string& name) {
  if (b.size() < 16 || std::memcmp(b.data(), kCheckpointMagic, 8) != 0)
    fail(Errc::VersionMismatch, name + ": not a CYSTNET1 checkpoint");
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(b[8 + i]) << (8 * i);
  if (len > b.size() - 16) fail(Errc::CorruptCheckpoint, name + ": header length exceeds file size");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(b.begin() + 16, b.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::CorruptCheckpoint, name + ": bad header: " + e.what());
  }
  Checkpoint ck{ResNet<float>(), {}};
  try {
    ck.model = ResNet<float>(header.at("model").get<ModelSpec>());
    ck.metadata = header.value("metadata", nlohmann::json::object());
    const auto& tensors = header.at("tensors");
    auto slots = ck.model.tensors();
    if (tensors.size() != slots.size()) fail(Errc::CorruptCheckpoint, name + ": tensor count mismatch");
    std::size_t offset = 16 + len;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (tensors[i].at("name").get<std::string>() != slots[i].name ||
          tensors[i].at("shape").get<std::vector<int>>() != slots[i].tensor->shape())
        fail(Errc::CorruptCheckpoint, name + ": tensor layout mismatch at " + slots[i].name);
      Tensor<float>& t = *slots[i].tensor;
      if (b.size() - offset < 4 * t.numel()) fail(Errc::CorruptCheckpoint, name + ": truncated tensor data");
      for (std::size_t k = 0; k < t.numel(); ++k, offset += 4) {
        const std::uint32_t bits = b[offset] | (b[offset + 1] << 8) | (b[offset + 2] << 16) |
                                   (static_cast<std::uint32_t>(b[offset + 3]) << 24);
        t[k] = std::bit_cast<float>(bits);
      }
    }
    if (offset != b.size()) fail(Errc::CorruptCheckpoint, name + ": trailing bytes after tensor data");
    if (header.contains("batchnorm")) {
      const float momentum = header["batchnorm"].value("momentum", 0.1f);
      const float epsilon = header["batchnorm"].value("epsilon", 1e-5f);
      auto set = [&](BatchNorm2d<float>& bn) {
        bn.params.momentum = momentum;
        bn.params.epsilon = epsilon;
      };
      set(ck.model.stem_bn());
      for (auto& blk : ck.model.blocks()) {
        set(blk.bn1);
        set(blk.bn2);
        if (blk.proj_bn) set(*blk.proj_bn);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::CorruptCheckpoint, name + ": " + e.what());
  }
  return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(cystseg::detail::read_bytes(path), path.string());
}

}  // namespace cystseg::nn
