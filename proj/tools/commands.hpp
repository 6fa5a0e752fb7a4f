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
#include <optional>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace etnd::cli {

/// Creates the directory and holds `<dir>/.lock` for the lifetime of the
/// object. Throws IoFailure when another process holds the lock.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path lock_;
};

/// Defense combinations in order: B, ED, TD, ND, ED+TD, ED+ND, TD+ND, ED+TD+ND.
struct Combination {
  std::string name;
  bool erase, transform, noise;
};
const std::vector<Combination>& ablation_combinations();
LossWeights combination_weights(const Combination& c, const LossWeights& full);

std::filesystem::path resolve_output_dir(const RunConfig& cfg, const std::string& command);

void cmd_train(RunConfig cfg, const std::optional<std::filesystem::path>& resume);
void cmd_evaluate(RunConfig cfg, const std::filesystem::path& checkpoint);
void cmd_attack(RunConfig cfg, const std::filesystem::path& checkpoint);
void cmd_ablate(RunConfig cfg);
void cmd_heatmap(RunConfig cfg, const std::optional<std::filesystem::path>& checkpoint,
                 const std::vector<std::filesystem::path>& inputs);
void cmd_synth(RunConfig cfg);

}  // namespace etnd::cli
