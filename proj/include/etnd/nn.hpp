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
#include <memory>
#include <string>
#include <vector>

#include "etnd/rng.hpp"
#include "etnd/tensor.hpp"

namespace etnd::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  std::size_t count() const { return value.size(); }
};

/// Non-trainable state saved with the parameters (e.g. running statistics).
struct Buffer {
  std::string name;
  Tensor* tensor;
};

struct ParamRefs {
  std::vector<Parameter*> params;
  std::vector<Buffer> buffers;
};

void zero_grads(const std::vector<Parameter*>& params);
std::int64_t count_parameters(const std::vector<Parameter*>& params);

/// Stateful layer: `forward` caches what `backward` needs, so each forward in
/// training mode must be followed by at most one backward.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect(ParamRefs& /*refs*/) {}
  /// Multiply-accumulates performed by the most recent forward.
  virtual std::int64_t last_macs() const { return 0; }
};

class Conv2d final : public Layer {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride,
         int pad, Rng& init_rng);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(ParamRefs& refs) override { refs.params.push_back(&weight_); }
  std::int64_t last_macs() const override { return macs_; }

  /// The first layer of a network never needs an input gradient.
  void set_needs_input_grad(bool v) { needs_input_grad_ = v; }
  const Parameter& weight() const { return weight_; }

 private:
  int in_ch_, out_ch_, kernel_, stride_, pad_;
  Parameter weight_;  // (out_ch, in_ch * k * k)
  bool needs_input_grad_ = true;
  Tensor::Shape in_shape_{};
  int out_h_ = 0, out_w_ = 0;
  std::vector<Real> col_;
  std::int64_t macs_ = 0;
};

class BatchNorm2d final : public Layer {
 public:
  BatchNorm2d(std::string name, int channels, Real momentum = 0.1,
              Real eps = 1e-5);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(ParamRefs& refs) override;

 private:
  int channels_;
  Real momentum_, eps_;
  Parameter gamma_, beta_;
  Tensor running_mean_, running_var_;
  std::string name_;
  bool cached_train_ = false;
  Tensor xhat_;
  std::vector<Real> inv_std_;
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<bool> mask_;
};

class MaxPool2d final : public Layer {
 public:
  MaxPool2d(int kernel, int stride, int pad)
      : kernel_(kernel), stride_(stride), pad_(pad) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  int kernel_, stride_, pad_;
  Tensor::Shape in_shape_{};
  std::vector<std::size_t> argmax_;
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto p = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *p;
    layers_.push_back(std::move(p));
    return ref;
  }
  void push(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(ParamRefs& refs) override;
  std::int64_t last_macs() const override;
  bool empty() const { return layers_.empty(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// ResNet bottleneck: 1x1 -> 3x3(stride) -> 1x1 (x4 expansion) plus shortcut.
class Bottleneck final : public Layer {
 public:
  Bottleneck(const std::string& name, int in_ch, int mid_ch, int stride,
             Rng& init_rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(ParamRefs& refs) override;
  std::int64_t last_macs() const override;

  static constexpr int kExpansion = 4;

 private:
  Sequential main_;
  Sequential shortcut_;
  ReLU out_relu_;
};

}  // namespace etnd::nn
