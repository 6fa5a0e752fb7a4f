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

#include "etnd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "etnd/errors.hpp"

namespace etnd {

Tensor smoothed_targets(const std::vector<int>& labels, int num_classes, Real epsilon) {
  if (num_classes < 1) throw InvalidConfig("num_classes must be >= 1");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InvalidConfig("epsilon must lie in [0, 1)");
  const int b_count = static_cast<int>(labels.size());
  const Real off = epsilon / num_classes;
  const Real on = 1.0 - (num_classes - 1) * epsilon / num_classes;
  Tensor q(b_count, num_classes, 1, 1, off);
  for (int b = 0; b < b_count; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 0 || y >= num_classes) {
      throw LabelOutOfRange("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
    q(b, y) = on;
  }
  return q;
}

namespace {

void check_shapes(const Tensor& logits, const Tensor& targets) {
  if (logits.n() != targets.n() || logits.c() != targets.c() || logits.n() == 0) {
    throw ShapeMismatch("cross entropy: logits " + shape_string(logits.shape()) +
                        " vs targets " + shape_string(targets.shape()));
  }
}

}  // namespace

CeResult ce_loss_with_grad(const Tensor& logits, const Tensor& targets) {
  check_shapes(logits, targets);
  const int b_count = logits.n(), n = logits.c();
  CeResult r;
  r.grad = Tensor(b_count, n);
  Real total = 0.0;
  std::vector<Real> p(static_cast<std::size_t>(n));
  for (int b = 0; b < b_count; ++b) {
    Real mx = logits(b, 0);
    for (int i = 1; i < n; ++i) mx = std::max(mx, logits(b, i));
    Real z = 0.0;
    for (int i = 0; i < n; ++i) {
      p[static_cast<std::size_t>(i)] = std::exp(logits(b, i) - mx);
      z += p[static_cast<std::size_t>(i)];
    }
    const Real log_z = mx + std::log(z);
    Real q_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const Real q = targets(b, i);
      total -= q * (logits(b, i) - log_z);
      q_sum += q;
    }
    for (int i = 0; i < n; ++i) {
      r.grad(b, i) = (q_sum * p[static_cast<std::size_t>(i)] / z - targets(b, i)) / b_count;
    }
  }
  r.loss = total / b_count;
  return r;
}

Real ce_loss(const Tensor& logits, const Tensor& targets) {
  return ce_loss_with_grad(logits, targets).loss;
}

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !(lambda3 >= 0.0)) {
    throw InvalidConfig("loss weights must be >= 0");
  }
}

namespace {

PhaseObjective combine(const RepresentationLogits& logits, const Tensor& targets,
                       const LossWeights& w, Real adversarial_sign, bool include_baseline) {
  w.validate();
  const std::array<Real, 4> coef = {include_baseline ? 1.0 : 0.0,
                                    adversarial_sign * w.lambda1,
                                    adversarial_sign * w.lambda2,
                                    adversarial_sign * w.lambda3};
  PhaseObjective out;
  for (std::size_t k = 0; k < 4; ++k) {
    const Tensor& z = logits.logits[k];
    if (z.empty()) continue;  // representation not computed
    CeResult ce = ce_loss_with_grad(z, targets);
    out.terms[k] = ce.loss;
    out.value += coef[k] * ce.loss;
    ce.grad *= coef[k];
    out.grads[k] = std::move(ce.grad);
  }
  return out;
}

}  // namespace

PhaseObjective classifier_phase_objective(const RepresentationLogits& logits,
                                          const Tensor& targets, const LossWeights& w,
                                          bool include_baseline) {
  return combine(logits, targets, w, -1.0, include_baseline);
}

PhaseObjective extractor_phase_objective(const RepresentationLogits& logits,
                                         const Tensor& targets, const LossWeights& w,
                                         bool include_baseline) {
  return combine(logits, targets, w, 1.0, include_baseline);
}

}  // namespace etnd
