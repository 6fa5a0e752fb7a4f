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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "etnd/data_pipeline.hpp"
#include "etnd/feature_perturb.hpp"
#include "etnd/losses.hpp"
#include "etnd/nn.hpp"
#include "etnd/reid_model.hpp"
#include "etnd/region_sampler.hpp"
#include "etnd/rng.hpp"

namespace etnd {

enum class GameMode { full, no_game };
enum class Phase { classifier, extractor };
enum class ForwardMode { shared_forward, fresh_forward };

GameMode parse_game_mode(std::string_view s);
std::string_view to_string(GameMode m);
ForwardMode parse_forward_mode(std::string_view s);
std::string_view to_string(ForwardMode m);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment slots follow the order of the
/// parameter list given to `step`, which must not change between calls.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<nn::Parameter*>& params, double lr);
  std::int64_t steps() const { return steps_; }

  /// Moment tensors named "<prefix><param name>.exp_avg" / ".exp_avg_sq".
  std::vector<std::pair<std::string, const Tensor*>> state(
      const std::vector<nn::Parameter*>& params, const std::string& prefix) const;
  void load_state(const std::vector<nn::Parameter*>& params, const std::string& prefix,
                  const std::map<std::string, Tensor>& tensors, std::int64_t steps);

 private:
  AdamConfig cfg_;
  std::int64_t steps_ = 0;
  std::vector<Tensor> m_, v_;
};

struct TrainConfig {
  int epochs = 120;
  double base_lr = 3e-4;
  double lr_decay_factor = 0.1;
  std::vector<int> lr_decay_epochs = {40, 70};
  int batch_p = 8;
  int batch_k = 8;
  LossWeights loss_weights;
  double epsilon = 0.1;
  PerturbationConfig perturbation;
  std::uint64_t seed = 0;
  GameMode game_mode = GameMode::full;
  TransformMode transform_mode = TransformMode::copy;
  ForwardMode forward_mode = ForwardMode::shared_forward;
  AugmentConfig augment;
  AdamConfig adam;
  /// Forward representations whose weight is zero anyway, so their losses
  /// appear in the log. Does not change the updates.
  bool log_all_terms = true;

  void validate() const;
  double learning_rate(int epoch) const;
  int batch_size() const { return batch_p * batch_k; }
};

struct LabeledBatch {
  Tensor images;  // (B, 3, H, W), normalized
  std::vector<int> labels;
};

/// Per-iteration log record. Loss values are measured before the updates of
/// the iteration; terms that were not computed are absent.
struct StepMetrics {
  std::int64_t iteration = 0;
  int epoch = 0;
  double lr = 0.0;
  double loss_clean = 0.0;
  std::optional<double> loss_e, loss_t, loss_n;
  std::optional<double> classifier_objective;
  double extractor_objective = 0.0;
  int optimizer_updates = 0;

  nlohmann::ordered_json to_json() const;
};

struct TrainState {
  std::unique_ptr<ReidModel> model;
  Adam extractor_opt;
  Adam classifier_opt;
  int epoch = 0;
  std::int64_t iteration = 0;
  std::int64_t optimizer_updates = 0;
  Rng sampler_rng;
  std::uint64_t master_seed = 0;
};

/// Fresh state: model initialized from (seed-derived) init seed.
TrainState make_train_state(const TrainConfig& cfg, ModelConfig model_cfg);

/// Random streams consumed by one iteration.
struct StepStreams {
  Rng perturbation;
  Rng augmentation;
};
StepStreams step_streams(std::uint64_t master_seed, std::int64_t iteration);

/// Called after each optimizer update of a step.
using PhaseObserver = std::function<void(Phase)>;

/// One iteration of alternating training: extract, sample regions, build
/// the adversarial batch, update the classifier (full game only), then the
/// extractor against the updated classifier. Throws NonFiniteLoss.
StepMetrics train_step(TrainState& state, const LabeledBatch& batch, const TrainConfig& cfg,
                       Rng& perturbation_rng, const PhaseObserver& observer = {});

/// Value of one phase objective on `batch` with its gradients left in the
/// live parameters (classifier or extractor); all other gradients are zero.
/// No optimizer update and no running-statistics change in the classifier.
double phase_gradients(ReidModel& model, const LabeledBatch& batch, const TrainConfig& cfg,
                       const Rng& perturbation_rng, Phase phase);

/// Assembles a labeled, augmented PK batch.
LabeledBatch make_batch(const DatasetIndex& data, const std::vector<std::size_t>& indices,
                        const TrainConfig& cfg, RandomSource& aug_rng);

struct TrainHooks {
  std::ostream* log = nullptr;  // JSON-lines sink
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  int checkpoint_every = 0;              // epochs; 0: only the final one
  std::function<void(const StepMetrics&)> on_step;
  PhaseObserver on_phase;
  /// Stop (without error) once this many iterations have run in total.
  std::optional<std::int64_t> stop_at_iteration;
};

/// Runs epochs from `state.epoch` to cfg.epochs. An epoch is
/// ceil(train images / batch size) PK batches.
std::vector<StepMetrics> train(TrainState& state, const DatasetIndex& data, const TrainConfig& cfg,
                               const TrainHooks& hooks = {});

/// Training checkpoint: model, both optimizers, counters, sampler stream.
void save_train_state(const std::filesystem::path& path, TrainState& state,
                      const TrainConfig& cfg);
TrainState load_train_state(const std::filesystem::path& path, const TrainConfig& cfg);

nlohmann::ordered_json train_config_json(const TrainConfig& cfg);

}  // namespace etnd
