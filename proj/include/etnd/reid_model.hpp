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
#include <string>
#include <string_view>
#include <vector>

#include "etnd/feature_perturb.hpp"
#include "etnd/nn.hpp"
#include "etnd/region_sampler.hpp"
#include "etnd/rng.hpp"
#include "etnd/tensor.hpp"

namespace etnd {

enum class BackbonePreset { resnet50, desk };
enum class Pooling { avg, max };

BackbonePreset parse_backbone(std::string_view s);
std::string_view to_string(BackbonePreset p);
Pooling parse_pooling(std::string_view s);
std::string_view to_string(Pooling p);

struct ModelConfig {
  BackbonePreset preset = BackbonePreset::desk;
  int image_h = 64;
  int image_w = 32;
  /// Desk backbone: one 3x3 conv + BN + ReLU per stage.
  std::vector<int> desk_widths = {16, 32, 64, 64};
  std::vector<int> desk_strides = {2, 2, 2, 1};
  int num_classes = 50;
  Pooling pooling = Pooling::avg;
  std::uint64_t init_seed = 0;

  void validate() const;
  /// Feature-map grid produced for (image_h, image_w).
  GridShape grid() const;
  int channels() const;
};

/// ResNet-50 layout with a stride-1 final stage (resnet50 preset) or a small
/// plain conv net (desk preset). Maps (B, 3, image_h, image_w) images to
/// (B, C, H, W) feature maps.
class Extractor {
 public:
  Extractor(const ModelConfig& cfg, Rng& init_rng);

  FeatureBatch forward(const Tensor& images, bool train);
  /// Accumulates parameter gradients for the most recent training forward.
  void backward(const FeatureBatch& grad_maps);

  nn::ParamRefs refs();
  std::int64_t last_macs() const { return body_.last_macs(); }

 private:
  ModelConfig cfg_;
  nn::Sequential body_;
};

enum class NormMode {
  train_update,  ///< batch statistics; running statistics updated
  train,         ///< batch statistics; running statistics untouched
  eval,          ///< running statistics
};

/// Everything the classifier backward needs from one forward call. A cache
/// per forward lets several representations share one classifier.
struct ClassifierCache {
  Tensor::Shape map_shape{};
  std::vector<std::size_t> argmax;  // max pooling only, flat map offsets
  Tensor normalized;                // (B, C): output of the norm layer
  Tensor xhat;                      // (B, C): standardized pooled vector
  std::vector<Real> inv_std;        // per channel
  bool batch_stats = false;
};

/// Pooling -> per-channel normalization -> bias-free linear layer.
class Classifier {
 public:
  Classifier(int channels, int num_classes, Pooling pooling, Rng& init_rng);

  /// (B, C, H, W) -> (B, C)
  Tensor pool(const FeatureBatch& maps, std::vector<std::size_t>* argmax = nullptr) const;
  /// Pooled then normalized with running statistics.
  Tensor embed(const FeatureBatch& maps) const;
  /// Logits (B, N).
  Tensor forward(const FeatureBatch& maps, NormMode mode, ClassifierCache* cache = nullptr);

  /// Backpropagates dlogits. Parameter gradients are accumulated only when
  /// `param_grads`; the map gradient is returned only when `map_grad`.
  FeatureBatch backward(const ClassifierCache& cache, const Tensor& dlogits,
                        bool param_grads, bool map_grad);

  nn::ParamRefs refs();
  int channels() const { return channels_; }
  int num_classes() const { return num_classes_; }

  nn::Parameter& norm_scale() { return gamma_; }
  nn::Parameter& norm_shift() { return beta_; }
  nn::Parameter& weight() { return weight_; }
  const Tensor& running_mean() const { return running_mean_; }
  const Tensor& running_var() const { return running_var_; }

  static constexpr Real kMomentum = 0.1;
  static constexpr Real kEps = 1e-5;

 private:
  int channels_, num_classes_;
  Pooling pooling_;
  nn::Parameter gamma_, beta_, weight_;  // weight: (N, C)
  Tensor running_mean_, running_var_;
};

class ReidModel {
 public:
  explicit ReidModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  Extractor& extractor() { return extractor_; }
  Classifier& classifier() { return classifier_; }

  /// Evaluation-mode feature maps.
  FeatureBatch extract(const Tensor& images) { return extractor_.forward(images, false); }
  /// Evaluation-mode logits.
  Tensor classify(const FeatureBatch& maps) { return classifier_.forward(maps, NormMode::eval); }
  /// Evaluation-mode retrieval embeddings (B, C), processed in chunks.
  Tensor embed(const Tensor& images, int chunk = 64);

  std::vector<nn::Parameter*> extractor_params() { return extractor_.refs().params; }
  std::vector<nn::Parameter*> classifier_params() { return classifier_.refs().params; }
  /// Every named tensor (parameters and buffers) in a stable order.
  std::vector<std::pair<std::string, Tensor*>> state();
  std::int64_t parameter_count();

 private:
  ModelConfig cfg_;
  Rng init_rng_;
  Extractor extractor_;
  Classifier classifier_;
};

}  // namespace etnd
