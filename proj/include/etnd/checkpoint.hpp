// Copyright 2026 The ETND Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <map>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "etnd/reid_model.hpp"
#include "etnd/tensor.hpp"

namespace etnd {

inline constexpr const char* kCheckpointFormat = "etnd-checkpoint/1";

/// Container layout: 8-byte magic "ETNDCKPT", u64 header length, JSON header,
/// then every tensor's values as little-endian IEEE-754 doubles in header
/// order. The header lists {name, shape, offset} for each tensor.
void write_checkpoint(const std::filesystem::path& path, nlohmann::ordered_json meta,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors);

struct CheckpointContents {
  nlohmann::ordered_json meta;
  std::map<std::string, Tensor> tensors;
};

CheckpointContents read_checkpoint(const std::filesystem::path& path);

nlohmann::ordered_json model_config_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Copies tensors named like `model.state()` into the model. Throws
/// CheckpointError on a missing tensor or a shape mismatch.
void load_model_state(ReidModel& model, const std::map<std::string, Tensor>& tensors);

/// Writes a model-only checkpoint (no optimizer state).
void save_model(const std::filesystem::path& path, ReidModel& model,
                nlohmann::ordered_json extra = nlohmann::ordered_json::object());
/// Rebuilds a model from any checkpoint written by this library.
ReidModel load_model(const std::filesystem::path& path);

}  // namespace etnd
