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

#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "commands.hpp"
#include "etnd/errors.hpp"

namespace {

struct Failure {
  const char* type;
  int code;
};

// Exit codes: 2 configuration, 3 data or IO, 4 numerical, 5 other library
// errors, 1 anything else.
Failure classify(const std::exception& e) {
  using namespace etnd;
  if (dynamic_cast<const InvalidConfig*>(&e)) return {"InvalidConfig", 2};
  if (dynamic_cast<const IoFailure*>(&e)) return {"IOFailure", 3};
  if (dynamic_cast<const MalformedFilename*>(&e)) return {"MalformedFilename", 3};
  if (dynamic_cast<const EmptyDataset*>(&e)) return {"EmptyDataset", 3};
  if (dynamic_cast<const TooFewIdentities*>(&e)) return {"TooFewIdentities", 3};
  if (dynamic_cast<const CheckpointError*>(&e)) return {"CheckpointError", 3};
  if (dynamic_cast<const DimensionMismatch*>(&e)) return {"DimensionMismatch", 3};
  if (dynamic_cast<const NoValidGallery*>(&e)) return {"NoValidGallery", 3};
  if (dynamic_cast<const NonFiniteLoss*>(&e)) return {"NonFiniteLoss", 4};
  if (dynamic_cast<const SamplingExhausted*>(&e)) return {"SamplingExhausted", 5};
  if (dynamic_cast<const GridTooSmall*>(&e)) return {"GridTooSmall", 5};
  if (dynamic_cast<const ShapeMismatch*>(&e)) return {"ShapeMismatch", 5};
  if (dynamic_cast<const LabelOutOfRange*>(&e)) return {"LabelOutOfRange", 5};
  if (dynamic_cast<const Error*>(&e)) return {"Error", 5};
  return {"InternalError", 1};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Occlusion-robust person re-identification: training, evaluation and attacks"};
  app.require_subcommand(1);

  std::string config_file, output_dir, mode;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string checkpoint, resume, kind, apply_to;
  std::vector<std::string> inputs;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_file, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", overrides, "override a config key (key=value), repeatable");
    sub->add_option("-o,--output-dir", output_dir,
                    "output directory (default: $ETND_OUTPUT_ROOT/<command> or runs/<command>)");
    sub->add_option("--seed", seed, "master seed");
  };

  CLI::App* train = app.add_subcommand("train", "train a model; writes checkpoint, log and config echo");
  common(train);
  train->add_option("--mode", mode, "baseline (all loss weights 0) or etnd")
      ->check(CLI::IsMember({"baseline", "etnd"}));
  train->add_option("--resume", resume, "training checkpoint to resume from")->check(CLI::ExistingFile);

  CLI::App* evaluate = app.add_subcommand("evaluate", "rank the test split; writes result JSON and CMC plot");
  common(evaluate);
  evaluate->add_option("--checkpoint", checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);

  CLI::App* attack = app.add_subcommand("attack", "evaluate under a feature- or image-level attack");
  common(attack);
  attack->add_option("--checkpoint", checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
  attack->add_option("--kind", kind, "feature_erase | feature_transform | feature_noise | image_erase");
  attack->add_option("--apply-to", apply_to, "query | gallery | both");

  CLI::App* ablate = app.add_subcommand("ablate", "train and evaluate the 8 defense combinations per seed");
  common(ablate);

  CLI::App* heatmap = app.add_subcommand("heatmap", "write activation heatmap overlays");
  common(heatmap);
  heatmap->add_option("--checkpoint", checkpoint, "model checkpoint (default: untrained model)")
      ->check(CLI::ExistingFile);
  heatmap->add_option("-i,--input", inputs, "image files or directories")->required();

  CLI::App* synth = app.add_subcommand("synth", "render the synthetic dataset to disk");
  common(synth);

  CLI11_PARSE(app, argc, argv);

  try {
    etnd::cli::RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    if (!mode.empty()) cfg.apply_mode(mode);
    for (const std::string& o : overrides) cfg.set_assignment(o);
    if (!output_dir.empty()) cfg.set("output_dir", output_dir);
    if (seed) cfg.set("seed", std::to_string(*seed));
    if (!kind.empty()) cfg.set("attack.kind", kind);
    if (!apply_to.empty()) cfg.set("attack.apply_to", apply_to);

    std::optional<std::filesystem::path> ckpt;
    if (!checkpoint.empty()) ckpt = checkpoint;
    if (*train) {
      std::optional<std::filesystem::path> from;
      if (!resume.empty()) from = resume;
      etnd::cli::cmd_train(cfg, from);
    } else if (*evaluate) {
      etnd::cli::cmd_evaluate(cfg, *ckpt);
    } else if (*attack) {
      etnd::cli::cmd_attack(cfg, *ckpt);
    } else if (*ablate) {
      etnd::cli::cmd_ablate(cfg);
    } else if (*heatmap) {
      std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
      etnd::cli::cmd_heatmap(cfg, ckpt, paths);
    } else if (*synth) {
      etnd::cli::cmd_synth(cfg);
    }
  } catch (const std::exception& e) {
    const Failure f = classify(e);
    nlohmann::ordered_json err = {{"error", {{"type", f.type}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return f.code;
  }
  return 0;
}
