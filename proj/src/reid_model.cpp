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

#include "etnd/reid_model.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "etnd/errors.hpp"

namespace etnd {

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

constexpr int kResnetBlocks[4] = {3, 4, 6, 3};
constexpr int kResnetMid[4] = {64, 128, 256, 512};
constexpr int kResnetStride[4] = {1, 2, 2, 1};

int conv_out(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace

BackbonePreset parse_backbone(std::string_view s) {
  if (s == "resnet50") return BackbonePreset::resnet50;
  if (s == "desk") return BackbonePreset::desk;
  throw InvalidConfig("backbone must be one of {resnet50, desk}, got '" + std::string(s) + "'");
}

std::string_view to_string(BackbonePreset p) {
  return p == BackbonePreset::resnet50 ? "resnet50" : "desk";
}

Pooling parse_pooling(std::string_view s) {
  if (s == "avg") return Pooling::avg;
  if (s == "max") return Pooling::max;
  throw InvalidConfig("pooling must be one of {avg, max}, got '" + std::string(s) + "'");
}

std::string_view to_string(Pooling p) { return p == Pooling::avg ? "avg" : "max"; }

// ---------------------------------------------------------------- ModelConfig

void ModelConfig::validate() const {
  if (image_h < 1 || image_w < 1) throw InvalidConfig("image size must be positive");
  if (num_classes < 1) throw InvalidConfig("num_classes must be >= 1");
  if (preset == BackbonePreset::desk) {
    if (desk_widths.empty() || desk_widths.size() != desk_strides.size()) {
      throw InvalidConfig("desk_widths and desk_strides must be non-empty and equally long");
    }
    for (int w : desk_widths)
      if (w < 1) throw InvalidConfig("desk_widths entries must be >= 1");
    for (int s : desk_strides)
      if (s < 1) throw InvalidConfig("desk_strides entries must be >= 1");
  }
  const GridShape g = grid();
  if (!g.valid()) throw InvalidConfig("image size too small for the backbone stride");
}

GridShape ModelConfig::grid() const {
  int h = image_h, w = image_w;
  if (preset == BackbonePreset::resnet50) {
    h = conv_out(conv_out(h, 7, 2, 3), 3, 2, 1);
    w = conv_out(conv_out(w, 7, 2, 3), 3, 2, 1);
    for (int s : kResnetStride) {
      h = conv_out(h, 3, s, 1);
      w = conv_out(w, 3, s, 1);
    }
  } else {
    for (int s : desk_strides) {
      h = conv_out(h, 3, s, 1);
      w = conv_out(w, 3, s, 1);
    }
  }
  return {h, w};
}

int ModelConfig::channels() const {
  return preset == BackbonePreset::resnet50 ? kResnetMid[3] * nn::Bottleneck::kExpansion
                                         : desk_widths.back();
}

// ---------------------------------------------------------------- Extractor

Extractor::Extractor(const ModelConfig& cfg, Rng& init_rng) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.preset == BackbonePreset::resnet50) {
    auto& stem = body_.emplace<nn::Conv2d>("backbone.conv1.weight", 3, 64, 7, 2, 3, init_rng);
    stem.set_needs_input_grad(false);
    body_.emplace<nn::BatchNorm2d>("backbone.bn1", 64);
    body_.emplace<nn::ReLU>();
    body_.emplace<nn::MaxPool2d>(3, 2, 1);
    int in_ch = 64;
    for (int layer = 0; layer < 4; ++layer) {
      for (int b = 0; b < kResnetBlocks[layer]; ++b) {
        const std::string name =
            "backbone.layer" + std::to_string(layer + 1) + "." + std::to_string(b);
        body_.emplace<nn::Bottleneck>(name, in_ch, kResnetMid[layer],
                                      b == 0 ? kResnetStride[layer] : 1, init_rng);
        in_ch = kResnetMid[layer] * nn::Bottleneck::kExpansion;
      }
    }
  } else {
    int in_ch = 3;
    for (std::size_t i = 0; i < cfg_.desk_widths.size(); ++i) {
      const std::string name = "backbone.stage" + std::to_string(i + 1);
      auto& conv = body_.emplace<nn::Conv2d>(name + ".conv.weight", in_ch, cfg_.desk_widths[i],
                                             3, cfg_.desk_strides[i], 1, init_rng);
      if (i == 0) conv.set_needs_input_grad(false);
      body_.emplace<nn::BatchNorm2d>(name + ".bn", cfg_.desk_widths[i]);
      body_.emplace<nn::ReLU>();
      in_ch = cfg_.desk_widths[i];
    }
  }
}

FeatureBatch Extractor::forward(const Tensor& images, bool train) {
  if (images.c() != 3 || images.h() != cfg_.image_h || images.w() != cfg_.image_w) {
    throw ShapeMismatch("extractor expects images of shape (B, 3, " +
                        std::to_string(cfg_.image_h) + ", " + std::to_string(cfg_.image_w) +
                        "), got " + shape_string(images.shape()));
  }
  return body_.forward(images, train);
}

void Extractor::backward(const FeatureBatch& grad_maps) { body_.backward(grad_maps); }

nn::ParamRefs Extractor::refs() {
  nn::ParamRefs r;
  body_.collect(r);
  return r;
}

// ---------------------------------------------------------------- Classifier

Classifier::Classifier(int channels, int num_classes, Pooling pooling, Rng& init_rng)
    : channels_(channels),
      num_classes_(num_classes),
      pooling_(pooling),
      gamma_("classifier.bottleneck.weight", Tensor(channels, 1, 1, 1, 1.0)),
      beta_("classifier.bottleneck.bias", Tensor(channels, 1)),
      weight_("classifier.fc.weight", Tensor(num_classes, channels)),
      running_mean_(channels, 1),
      running_var_(channels, 1, 1, 1, 1.0) {
  for (Real& v : weight_.value.values()) v = 0.001 * init_rng.normal();
}

Tensor Classifier::pool(const FeatureBatch& maps, std::vector<std::size_t>* argmax) const {
  if (maps.c() != channels_) {
    throw ShapeMismatch("classifier expects " + std::to_string(channels_) +
                        " channels, got " + std::to_string(maps.c()));
  }
  const int b_count = maps.n(), plane = maps.h() * maps.w();
  Tensor pooled(b_count, channels_);
  if (argmax) argmax->assign(pooled.size(), 0);
  for (int b = 0; b < b_count; ++b) {
    for (int c = 0; c < channels_; ++c) {
      const std::size_t base = maps.offset(b, c, 0, 0);
      const Real* p = maps.data() + base;
      if (pooling_ == Pooling::avg) {
        Real s = 0.0;
        for (int i = 0; i < plane; ++i) s += p[i];
        pooled(b, c) = s / plane;
      } else {
        int best = 0;
        for (int i = 1; i < plane; ++i)
          if (p[i] > p[best]) best = i;
        pooled(b, c) = p[best];
        if (argmax) (*argmax)[pooled.offset(b, c, 0, 0)] = base + static_cast<std::size_t>(best);
      }
    }
  }
  return pooled;
}

Tensor Classifier::embed(const FeatureBatch& maps) const {
  Tensor x = pool(maps);
  for (int c = 0; c < channels_; ++c) {
    const Real inv = 1.0 / std::sqrt(running_var_(c, 0) + kEps);
    for (int b = 0; b < x.n(); ++b) {
      x(b, c) = gamma_.value(c, 0) * (x(b, c) - running_mean_(c, 0)) * inv + beta_.value(c, 0);
    }
  }
  return x;
}

Tensor Classifier::forward(const FeatureBatch& maps, NormMode mode, ClassifierCache* cache) {
  ClassifierCache local;
  ClassifierCache& cc = cache ? *cache : local;
  cc.map_shape = maps.shape();
  Tensor pooled = pool(maps, pooling_ == Pooling::max ? &cc.argmax : nullptr);
  const int b_count = pooled.n();
  const bool batch_stats = mode != NormMode::eval;
  if (batch_stats && b_count < 2) {
    throw ShapeMismatch("batch-statistics normalization needs at least 2 items");
  }
  cc.batch_stats = batch_stats;
  cc.xhat = Tensor(b_count, channels_);
  cc.normalized = Tensor(b_count, channels_);
  cc.inv_std.assign(static_cast<std::size_t>(channels_), 0.0);
  for (int c = 0; c < channels_; ++c) {
    Real mean, var;
    if (batch_stats) {
      Real s = 0.0;
      for (int b = 0; b < b_count; ++b) s += pooled(b, c);
      mean = s / b_count;
      Real sq = 0.0;
      for (int b = 0; b < b_count; ++b) sq += (pooled(b, c) - mean) * (pooled(b, c) - mean);
      var = sq / b_count;
      if (mode == NormMode::train_update) {
        running_mean_(c, 0) = (1 - kMomentum) * running_mean_(c, 0) + kMomentum * mean;
        running_var_(c, 0) =
            (1 - kMomentum) * running_var_(c, 0) + kMomentum * sq / (b_count - 1);
      }
    } else {
      mean = running_mean_(c, 0);
      var = running_var_(c, 0);
    }
    const Real inv = 1.0 / std::sqrt(var + kEps);
    cc.inv_std[static_cast<std::size_t>(c)] = inv;
    for (int b = 0; b < b_count; ++b) {
      const Real xh = (pooled(b, c) - mean) * inv;
      cc.xhat(b, c) = xh;
      cc.normalized(b, c) = gamma_.value(c, 0) * xh + beta_.value(c, 0);
    }
  }
  Tensor logits(b_count, num_classes_);
  MapMat(logits.data(), b_count, num_classes_).noalias() =
      ConstMapMat(cc.normalized.data(), b_count, channels_) *
      ConstMapMat(weight_.value.data(), num_classes_, channels_).transpose();
  return logits;
}

FeatureBatch Classifier::backward(const ClassifierCache& cache, const Tensor& dlogits,
                                  bool param_grads, bool map_grad) {
  const int b_count = cache.normalized.n();
  if (dlogits.n() != b_count || dlogits.c() != num_classes_) {
    throw ShapeMismatch("classifier backward: logit gradient shape mismatch");
  }
  ConstMapMat dl(dlogits.data(), b_count, num_classes_);
  if (param_grads) {
    MapMat(weight_.grad.data(), num_classes_, channels_).noalias() +=
        dl.transpose() * ConstMapMat(cache.normalized.data(), b_count, channels_);
  }
  if (!param_grads && !map_grad) return FeatureBatch();

  Tensor dnorm(b_count, channels_);
  MapMat(dnorm.data(), b_count, channels_).noalias() =
      dl * ConstMapMat(weight_.value.data(), num_classes_, channels_);

  Tensor dpooled(b_count, channels_);
  for (int c = 0; c < channels_; ++c) {
    Real sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < b_count; ++b) {
      sum_dy += dnorm(b, c);
      sum_dy_xhat += dnorm(b, c) * cache.xhat(b, c);
    }
    if (param_grads) {
      gamma_.grad(c, 0) += sum_dy_xhat;
      beta_.grad(c, 0) += sum_dy;
    }
    const Real g = gamma_.value(c, 0);
    const Real inv = cache.inv_std[static_cast<std::size_t>(c)];
    for (int b = 0; b < b_count; ++b) {
      if (cache.batch_stats) {
        dpooled(b, c) = g * inv / b_count *
                        (b_count * dnorm(b, c) - sum_dy - cache.xhat(b, c) * sum_dy_xhat);
      } else {
        dpooled(b, c) = g * inv * dnorm(b, c);
      }
    }
  }
  if (!map_grad) return FeatureBatch();

  FeatureBatch dmaps(cache.map_shape);
  const int plane = dmaps.h() * dmaps.w();
  for (int b = 0; b < b_count; ++b) {
    for (int c = 0; c < channels_; ++c) {
      if (pooling_ == Pooling::avg) {
        const Real v = dpooled(b, c) / plane;
        Real* p = dmaps.data() + dmaps.offset(b, c, 0, 0);
        std::fill(p, p + plane, v);
      } else {
        dmaps.data()[cache.argmax[dpooled.offset(b, c, 0, 0)]] += dpooled(b, c);
      }
    }
  }
  return dmaps;
}

nn::ParamRefs Classifier::refs() {
  nn::ParamRefs r;
  r.params = {&gamma_, &beta_, &weight_};
  r.buffers = {{"classifier.bottleneck.running_mean", &running_mean_},
               {"classifier.bottleneck.running_var", &running_var_}};
  return r;
}

// ---------------------------------------------------------------- ReidModel

ReidModel::ReidModel(const ModelConfig& cfg)
    : cfg_(cfg),
      init_rng_(cfg.init_seed),
      extractor_(cfg, init_rng_),
      classifier_(cfg.channels(), cfg.num_classes, cfg.pooling, init_rng_) {}

Tensor ReidModel::embed(const Tensor& images, int chunk) {
  Tensor out(images.n(), cfg_.channels());
  for (int first = 0; first < images.n(); first += chunk) {
    const int count = std::min(chunk, images.n() - first);
    const Tensor e = classifier_.embed(extract(images.slice(first, count)));
    std::copy(e.data(), e.data() + e.size(), out.data() + out.offset(first, 0, 0, 0));
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> ReidModel::state() {
  std::vector<std::pair<std::string, Tensor*>> s;
  for (const nn::ParamRefs& r : {extractor_.refs(), classifier_.refs()}) {
    for (nn::Parameter* p : r.params) s.emplace_back(p->name, &p->value);
    for (const nn::Buffer& b : r.buffers) s.emplace_back(b.name, b.tensor);
  }
  return s;
}

std::int64_t ReidModel::parameter_count() {
  return nn::count_parameters(extractor_params()) + nn::count_parameters(classifier_params());
}

}  // namespace etnd
