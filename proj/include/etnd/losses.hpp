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

#include <array>
#include <vector>

#include "etnd/tensor.hpp"

namespace etnd {

/// Label-smoothed targets, shape (B, N): 1 - (N-1)eps/N on the true class
/// and eps/N elsewhere.
Tensor smoothed_targets(const std::vector<int>& labels, int num_classes, Real epsilon);

/// Batch-mean cross entropy -sum_i q_i log softmax(z)_i via log-sum-exp.
Real ce_loss(const Tensor& logits, const Tensor& targets);

struct CeResult {
  Real loss = 0.0;
  Tensor grad;  // d loss / d logits
};
CeResult ce_loss_with_grad(const Tensor& logits, const Tensor& targets);

/// Weights of the erase, transform and noise terms.
struct LossWeights {
  Real lambda1 = 0.1;
  Real lambda2 = 0.15;
  Real lambda3 = 0.1;

  void validate() const;
  bool all_zero() const { return lambda1 == 0.0 && lambda2 == 0.0 && lambda3 == 0.0; }
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Logits of the clean, erased, transformed and noised representations.
struct RepresentationLogits {
  std::array<Tensor, 4> logits;

  const Tensor& clean() const { return logits[0]; }
  const Tensor& erased() const { return logits[1]; }
  const Tensor& transformed() const { return logits[2]; }
  const Tensor& noised() const { return logits[3]; }
};

struct PhaseObjective {
  Real value = 0.0;
  /// Unweighted cross entropy of each representation (clean, e, t, n).
  std::array<Real, 4> terms{};
  /// Gradient of `value` with respect to each representation's logits.
  std::array<Tensor, 4> grads;
};

/// Minimized by the classifier: L(clean) - l1 L(e) - l2 L(t) - l3 L(n).
/// Representations whose logits tensor is empty contribute nothing.
PhaseObjective classifier_phase_objective(const RepresentationLogits& logits,
                                          const Tensor& targets, const LossWeights& w,
                                          bool include_baseline = true);

/// Minimized by the extractor: L(clean) + l1 L(e) + l2 L(t) + l3 L(n).
PhaseObjective extractor_phase_objective(const RepresentationLogits& logits,
                                         const Tensor& targets, const LossWeights& w,
                                         bool include_baseline = true);

}  // namespace etnd
