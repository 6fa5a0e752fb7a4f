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
#include <string>
#include <vector>

#include "etnd/attack_harness.hpp"
#include "etnd/data_pipeline.hpp"
#include "etnd/reid_model.hpp"
#include "etnd/retrieval_eval.hpp"
#include "etnd/trainer.hpp"

namespace etnd::cli {

/// Flat key/value run configuration. Every key has a default; unknown keys
/// are rejected so typos surface as errors.
class RunConfig {
 public:
  RunConfig();

  /// Lines of `key = value`; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  /// Parses "key=value".
  void set_assignment(const std::string& assignment);
  const std::string& get(const std::string& key) const;

  /// `baseline` zeroes every loss weight, `etnd` restores the defaults.
  void apply_mode(const std::string& mode);

  std::string echo() const;
  void write_echo(const std::filesystem::path& path) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  std::uint64_t seed() const;
  std::filesystem::path output_dir() const;
  ModelConfig model(int num_classes) const;
  TrainConfig train() const;
  EvalOptions eval() const;
  AttackSpec attack() const;
  SynthSpec synth() const;
  std::vector<std::uint64_t> ablate_seeds() const;
  int checkpoint_every() const;

  /// Synthetic dataset or a directory, per data.source.
  DatasetIndex load_dataset() const;

 private:
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;
  PerturbationConfig perturbation(const std::string& prefix) const;

  std::map<std::string, std::string> values_;
};

/// Default output root: $ETND_OUTPUT_ROOT, else ./runs.
std::filesystem::path default_output_root();

}  // namespace etnd::cli
