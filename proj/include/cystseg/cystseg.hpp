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

#include "cystseg/config.hpp"
#include "cystseg/error.hpp"
#include "cystseg/evaluation.hpp"
#include "cystseg/image.hpp"
#include "cystseg/image_codec.hpp"
#include "cystseg/inference.hpp"
#include "cystseg/manifest.hpp"
#include "cystseg/nn/adam.hpp"
#include "cystseg/nn/checkpoint.hpp"
#include "cystseg/nn/gemm.hpp"
#include "cystseg/nn/input.hpp"
#include "cystseg/nn/ops.hpp"
#include "cystseg/nn/resnet.hpp"
#include "cystseg/nn/tensor.hpp"
#include "cystseg/nn/trainer.hpp"
#include "cystseg/parallel.hpp"
#include "cystseg/patchset.hpp"
#include "cystseg/pipeline.hpp"
#include "cystseg/preprocess.hpp"
#include "cystseg/rng.hpp"
#include "cystseg/synthetic.hpp"
