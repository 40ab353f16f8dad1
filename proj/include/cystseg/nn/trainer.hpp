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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cystseg/error.hpp"
#include "cystseg/nn/adam.hpp"
#include "cystseg/nn/input.hpp"
#include "cystseg/nn/ops.hpp"
#include "cystseg/nn/resnet.hpp"
#include "cystseg/patchset.hpp"
#include "cystseg/rng.hpp"

namespace cystseg::nn {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 256;
  AdamConfig adam;
  double val_fraction = 0.1;
  bool augment = true;
  AugmentPolicy augment_policy;
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.adam.learning_rate},
       {"beta1", c.adam.beta1},
       {"beta2", c.adam.beta2},
       {"epsilon", c.adam.epsilon},
       {"val_fraction", c.val_fraction},
       {"augment", c.augment},
       {"augment_policy", c.augment_policy}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
  c.adam.beta1 = j.value("beta1", c.adam.beta1);
  c.adam.beta2 = j.value("beta2", c.adam.beta2);
  c.adam.epsilon = j.value("epsilon", c.adam.epsilon);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.augment = j.value("augment", c.augment);
  if (j.contains("augment_policy")) c.augment_policy = j.at("augment_policy").get<AugmentPolicy>();
  if (c.epochs < 0 || c.batch_size < 1) fail(Errc::InvalidConfig, "epochs must be >= 0 and batch_size >= 1");
  if (!(c.val_fraction >= 0.0 && c.val_fraction < 1.0)) fail(Errc::InvalidConfig, "val_fraction must lie in [0, 1)");
  if (!(c.adam.learning_rate >= 0.0) || !(c.adam.epsilon > 0.0)) fail(Errc::InvalidConfig, "invalid Adam settings");
}

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;
};

struct TrainResult {
  ResNet<float> model;  // best epoch
  std::vector<EpochLog> history;
  int best_epoch = 0;
};

template <typename T>
Tensor<T> batch_tensor(std::span<const PatchRecord> records, std::span<const std::size_t> order) {
  if (order.empty()) fail(Errc::ShapeError, "empty batch");
  const int n = records[order[0]].pixels.height();
  Tensor<T> x({static_cast<int>(order.size()), 1, n, n});
  const std::size_t stride = static_cast<std::size_t>(n) * n;
  for (std::size_t i = 0; i < order.size(); ++i) write_patch(records[order[i]].pixels, x.data() + i * stride);
  return x;
}

struct EvalSummary {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline EvalSummary evaluate_patches(ResNet<float>& model, std::span<const PatchRecord> records,
                                    std::span<const std::size_t> indices, int batch_size) {
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < indices.size(); b += batch_size) {
    const auto chunk = indices.subspan(b, std::min<std::size_t>(batch_size, indices.size() - b));
    std::vector<int> labels;
    for (auto i : chunk) labels.push_back(records[i].label);
    const Tensor<float> logits = model.forward(batch_tensor<float>(records, chunk), Mode::Eval);
    const auto r = softmax_xent(logits, one_hot<float>(labels, model.spec().num_classes));
    loss += static_cast<double>(r.loss) * chunk.size();
    const int K = logits.dim(1);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const float* z = logits.data() + i * K;
      correct += static_cast<int>(std::max_element(z, z + K) - z) == labels[i];
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(indices.size(), 1));
  return {loss / n, static_cast<double>(correct) / n};
}

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch Adam training with on-the-fly augmentation. Every random draw
/// derives from `seed`, so identical inputs give identical models.
inline TrainResult train(const ModelSpec& spec, std::span<const PatchRecord> records, const TrainConfig& config,
                         std::uint64_t seed, const EpochCallback& on_epoch = {}) {
  if (records.empty()) fail(Errc::InvalidConfig, "training set is empty");
  TrainResult result{ResNet<float>(spec), {}, 0};
  ResNet<float> model(spec);
  model.init(seed);
  AdamState<float> adam;
  adam.config = config.adam;

  std::vector<std::size_t> all(records.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto split_rng = stream_rng(seed, 0x5e1ec7);
  std::shuffle(all.begin(), all.end(), split_rng);
  const auto n_val = static_cast<std::size_t>(std::floor(config.val_fraction * records.size()));
  std::vector<std::size_t> val(all.begin(), all.begin() + n_val);
  std::vector<std::size_t> train_idx(all.begin() + n_val, all.end());
  if (train_idx.empty()) fail(Errc::InvalidConfig, "validation split leaves no training patches");
  std::sort(val.begin(), val.end());

  std::optional<double> best_score;
  result.model = model;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    auto rng = stream_rng(seed, 1, static_cast<std::uint64_t>(epoch));
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < train_idx.size(); b += config.batch_size) {
      const std::span<const std::size_t> chunk(train_idx.data() + b,
                                               std::min<std::size_t>(config.batch_size, train_idx.size() - b));
      std::vector<int> labels;
      Tensor<float> x = batch_tensor<float>(records, chunk);
      if (config.augment) {
        const int n = x.dim(2);
        for (std::size_t i = 0; i < chunk.size(); ++i) {
          const auto aug = augment(records[chunk[i]], config.augment_policy, rng);
          write_patch(aug.pixels, x.data() + i * static_cast<std::size_t>(n) * n);
        }
      }
      for (auto i : chunk) labels.push_back(records[i].label);
      model.zero_grad();
      const Tensor<float> logits = model.forward(x, Mode::Train);
      const auto r = softmax_xent(logits, one_hot<float>(labels, spec.num_classes));
      if (!std::isfinite(r.loss)) fail(Errc::Diverged, "loss became non-finite at epoch " + std::to_string(epoch));
      model.backward(r.grad);
      adam_step(model.parameters(), adam);
      loss_sum += static_cast<double>(r.loss) * chunk.size();
      const int K = logits.dim(1);
      for (std::size_t i = 0; i < chunk.size(); ++i) {
        const float* z = logits.data() + i * K;
        correct += static_cast<int>(std::max_element(z, z + K) - z) == labels[i];
      }
    }
    EpochLog log{epoch, loss_sum / train_idx.size(), static_cast<double>(correct) / train_idx.size(), {}, {}};
    double score = -log.loss;
    if (!val.empty()) {
      const auto v = evaluate_patches(model, records, val, std::max(config.batch_size, 256));
      log.val_loss = v.loss;
      log.val_accuracy = v.accuracy;
      score = v.accuracy - 1e-9 * v.loss;
    }
    if (!best_score || score > *best_score) {
      best_score = score;
      result.model = model;
      result.best_epoch = epoch;
    }
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  if (config.epochs == 0) result.model = model;
  return result;
}

inline std::string history_csv(const std::vector<EpochLog>& history) {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,loss,accuracy,val_loss,val_accuracy\n";
  for (const auto& h : history) {
    out << h.epoch << "," << h.loss << "," << h.accuracy << ",";
    if (h.val_loss) out << *h.val_loss;
    out << ",";
    if (h.val_accuracy) out << *h.val_accuracy;
    out << "\n";
  }
  return out.str();
}

}  // namespace cystseg::nn
