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

#include "etnd/trainer.hpp"

#include <cmath>
#include <string>

#include "etnd/checkpoint.hpp"
#include "etnd/errors.hpp"

namespace etnd {

GameMode parse_game_mode(std::string_view s) {
  if (s == "full") return GameMode::full;
  if (s == "no_game") return GameMode::no_game;
  throw InvalidConfig("game_mode must be one of {full, no_game}, got '" + std::string(s) + "'");
}

std::string_view to_string(GameMode m) { return m == GameMode::full ? "full" : "no_game"; }

ForwardMode parse_forward_mode(std::string_view s) {
  if (s == "shared_forward") return ForwardMode::shared_forward;
  if (s == "fresh_forward") return ForwardMode::fresh_forward;
  throw InvalidConfig("forward_mode must be one of {shared_forward, fresh_forward}, got '" +
                      std::string(s) + "'");
}

std::string_view to_string(ForwardMode m) {
  return m == ForwardMode::shared_forward ? "shared_forward" : "fresh_forward";
}

// ---------------------------------------------------------------- Adam

void Adam::step(const std::vector<nn::Parameter*>& params, double lr) {
  if (m_.empty()) {
    for (const nn::Parameter* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) throw Error("Adam: parameter list changed between steps");
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  const double step_size = lr / bc1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Real* w = params[i]->value.data();
    const Real* g = params[i]->grad.data();
    Real* m = m_[i].data();
    Real* v = v_[i].data();
    for (std::size_t k = 0; k < params[i]->value.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      w[k] -= step_size * m[k] / (std::sqrt(v[k] / bc2) + cfg_.eps);
    }
  }
}

std::vector<std::pair<std::string, const Tensor*>> Adam::state(
    const std::vector<nn::Parameter*>& params, const std::string& prefix) const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (std::size_t i = 0; i < m_.size(); ++i) {
    out.emplace_back(prefix + params[i]->name + ".exp_avg", &m_[i]);
    out.emplace_back(prefix + params[i]->name + ".exp_avg_sq", &v_[i]);
  }
  return out;
}

void Adam::load_state(const std::vector<nn::Parameter*>& params, const std::string& prefix,
                      const std::map<std::string, Tensor>& tensors, std::int64_t steps) {
  steps_ = steps;
  m_.clear();
  v_.clear();
  if (steps == 0) return;
  for (const nn::Parameter* p : params) {
    const auto m = tensors.find(prefix + p->name + ".exp_avg");
    const auto v = tensors.find(prefix + p->name + ".exp_avg_sq");
    if (m == tensors.end() || v == tensors.end()) {
      throw CheckpointError("checkpoint lacks optimizer state for " + p->name);
    }
    m_.push_back(m->second);
    v_.push_back(v->second);
  }
}

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidConfig("epochs must be >= 1");
  if (!(base_lr > 0.0)) throw InvalidConfig("base_lr must be > 0");
  if (!(lr_decay_factor > 0.0)) throw InvalidConfig("lr_decay_factor must be > 0");
  if (batch_p < 1 || batch_k < 1) throw InvalidConfig("batch_p and batch_k must be >= 1");
  if (batch_size() < 2) throw InvalidConfig("batch size must be >= 2 for batch normalization");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InvalidConfig("epsilon must lie in [0, 1)");
  loss_weights.validate();
  perturbation.validate();
  augment.validate();
}

double TrainConfig::learning_rate(int epoch) const {
  double lr = base_lr;
  for (int e : lr_decay_epochs)
    if (epoch >= e) lr *= lr_decay_factor;
  return lr;
}

nlohmann::ordered_json StepMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["iteration"] = iteration;
  j["epoch"] = epoch;
  j["lr"] = lr;
  j["loss_clean"] = loss_clean;
  j["loss_e"] = loss_e ? nlohmann::ordered_json(*loss_e) : nlohmann::ordered_json();
  j["loss_t"] = loss_t ? nlohmann::ordered_json(*loss_t) : nlohmann::ordered_json();
  j["loss_n"] = loss_n ? nlohmann::ordered_json(*loss_n) : nlohmann::ordered_json();
  j["classifier_objective"] =
      classifier_objective ? nlohmann::ordered_json(*classifier_objective) : nlohmann::ordered_json();
  j["extractor_objective"] = extractor_objective;
  j["optimizer_updates"] = optimizer_updates;
  return j;
}

nlohmann::ordered_json train_config_json(const TrainConfig& cfg) {
  const auto& p = cfg.perturbation;
  const auto& a = cfg.augment;
  return {{"epochs", cfg.epochs},
          {"base_lr", cfg.base_lr},
          {"lr_decay_factor", cfg.lr_decay_factor},
          {"lr_decay_epochs", cfg.lr_decay_epochs},
          {"batch_p", cfg.batch_p},
          {"batch_k", cfg.batch_k},
          {"lambda1", cfg.loss_weights.lambda1},
          {"lambda2", cfg.loss_weights.lambda2},
          {"lambda3", cfg.loss_weights.lambda3},
          {"epsilon", cfg.epsilon},
          {"perturbation",
           {{"area_min", p.area_min},
            {"area_max", p.area_max},
            {"aspect_min", p.aspect_min},
            {"aspect_max", p.aspect_max},
            {"fixed_mode", p.fixed_mode},
            {"fixed_area", p.fixed_area},
            {"fixed_aspect", p.fixed_aspect},
            {"max_rejection_attempts", p.max_rejection_attempts}}},
          {"seed", cfg.seed},
          {"game_mode", std::string(to_string(cfg.game_mode))},
          {"transform_mode", std::string(to_string(cfg.transform_mode))},
          {"forward_mode", std::string(to_string(cfg.forward_mode))},
          {"augment",
           {{"flip_probability", a.flip_probability},
            {"pad", a.pad},
            {"erase_probability", a.erase_probability}}},
          {"adam", {{"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"eps", cfg.adam.eps}}}};
}

// ---------------------------------------------------------------- state

TrainState make_train_state(const TrainConfig& cfg, ModelConfig model_cfg) {
  cfg.validate();
  const Rng master(cfg.seed);
  model_cfg.init_seed = master.split(1).seed();
  TrainState s;
  s.model = std::make_unique<ReidModel>(model_cfg);
  s.extractor_opt = Adam(cfg.adam);
  s.classifier_opt = Adam(cfg.adam);
  s.sampler_rng = master.split(2);
  s.master_seed = cfg.seed;
  return s;
}

StepStreams step_streams(std::uint64_t master_seed, std::int64_t iteration) {
  const Rng master(master_seed);
  const auto it = static_cast<std::uint64_t>(iteration);
  return {master.split(4).split(it), master.split(3).split(it)};
}

LabeledBatch make_batch(const DatasetIndex& data, const std::vector<std::size_t>& indices,
                        const TrainConfig& cfg, RandomSource& aug_rng) {
  std::vector<Image> images;
  images.reserve(indices.size());
  LabeledBatch batch;
  for (std::size_t i : indices) {
    const Record& r = data.records.at(i);
    images.push_back(augment(r.image, aug_rng, true, cfg.augment, data.image_h, data.image_w));
    batch.labels.push_back(r.identity);
  }
  batch.images = to_tensor(images);
  return batch;
}

// ---------------------------------------------------------------- train_step

namespace {

struct RepresentationPass {
  std::array<FeatureBatch, 4> maps;
  RegionSet regions;
  bool adversarial = false;
};

RepresentationPass build_representations(const FeatureBatch& clean, bool adversarial,
                                         const TrainConfig& cfg, Rng perturbation_rng) {
  RepresentationPass pass;
  pass.maps[0] = clean;
  pass.adversarial = adversarial;
  if (!adversarial) return pass;
  pass.regions = sample_batch_regions(perturbation_rng, grid_of(clean), cfg.perturbation);
  AdversarialBatch adv =
      make_adversarial_batch(clean, pass.regions, perturbation_rng, cfg.transform_mode);
  pass.maps[1] = std::move(adv.erased);
  pass.maps[2] = std::move(adv.transformed);
  pass.maps[3] = std::move(adv.noised);
  return pass;
}

std::array<Real, 4> weights_of(const LossWeights& w) {
  return {1.0, w.lambda1, w.lambda2, w.lambda3};
}

void check_finite(const PhaseObjective& obj, std::int64_t iteration, const char* phase) {
  bool ok = std::isfinite(obj.value);
  for (Real t : obj.terms) ok = ok && std::isfinite(t);
  if (!ok) {
    throw NonFiniteLoss(std::string("non-finite ") + phase + " loss at iteration " +
                        std::to_string(iteration));
  }
}

}  // namespace

namespace {

struct PhaseResult {
  PhaseObjective objective;
  FeatureBatch grad_maps;  // empty unless requested
};

// Classifier forward over the representations of `pass`, the phase objective,
// and its backward. Classifier parameter gradients accumulate when
// `classifier_grads`; gradients w.r.t. the clean maps are returned when
// `feature_grads`, already mapped back through the perturbations.
PhaseResult run_phase(Classifier& cls, const RepresentationPass& pass, const Tensor& targets,
                      const TrainConfig& cfg, Phase phase, bool update_stats,
                      bool classifier_grads, bool feature_grads, std::int64_t iteration) {
  const auto weight = weights_of(cfg.loss_weights);
  const std::size_t reps = pass.adversarial ? 4 : 1;
  RepresentationLogits logits;
  std::array<ClassifierCache, 4> caches;
  for (std::size_t k = 0; k < reps; ++k) {
    const NormMode mode = (k == 0 && update_stats) ? NormMode::train_update : NormMode::train;
    logits.logits[k] = cls.forward(pass.maps[k], mode, &caches[k]);
  }
  PhaseResult r;
  if (phase == Phase::classifier) {
    r.objective = classifier_phase_objective(logits, targets, cfg.loss_weights);
    check_finite(r.objective, iteration, "classifier-phase");
  } else {
    r.objective = extractor_phase_objective(logits, targets, cfg.loss_weights);
    check_finite(r.objective, iteration, "extractor-phase");
  }
  if (feature_grads) r.grad_maps = FeatureBatch(pass.maps[0].shape());
  for (std::size_t k = 0; k < reps; ++k) {
    if (weight[k] == 0.0) continue;
    const FeatureBatch g = cls.backward(caches[k], r.objective.grads[k], classifier_grads, feature_grads);
    if (!feature_grads) continue;
    switch (k) {
      case 0: r.grad_maps += g; break;
      case 1: r.grad_maps += mask_backward(g, pass.regions.erase); break;
      case 2:
        r.grad_maps += transform_backward(g, pass.regions.transform_src, pass.regions.transform_dst,
                                          cfg.transform_mode);
        break;
      case 3: r.grad_maps += mask_backward(g, pass.regions.noise); break;
    }
  }
  return r;
}

void record_terms(StepMetrics& m, const PhaseObjective& obj, bool adversarial) {
  m.loss_clean = obj.terms[0];
  if (adversarial) {
    m.loss_e = obj.terms[1];
    m.loss_t = obj.terms[2];
    m.loss_n = obj.terms[3];
  }
}

}  // namespace

double phase_gradients(ReidModel& model, const LabeledBatch& batch, const TrainConfig& cfg,
                       const Rng& perturbation_rng, Phase phase) {
  Classifier& cls = model.classifier();
  Extractor& ext = model.extractor();
  nn::zero_grads(model.classifier_params());
  nn::zero_grads(model.extractor_params());
  const Tensor targets = smoothed_targets(batch.labels, cls.num_classes(), cfg.epsilon);
  const bool adversarial = !cfg.loss_weights.all_zero() || cfg.log_all_terms;
  const FeatureBatch clean = ext.forward(batch.images, true);
  const RepresentationPass pass = build_representations(clean, adversarial, cfg, perturbation_rng);
  const bool extractor = phase == Phase::extractor;
  const PhaseResult r = run_phase(cls, pass, targets, cfg, phase, false, !extractor, extractor, 0);
  if (extractor) ext.backward(r.grad_maps);
  return r.objective.value;
}

StepMetrics train_step(TrainState& state, const LabeledBatch& batch, const TrainConfig& cfg,
                       Rng& perturbation_rng, const PhaseObserver& observer) {
  ReidModel& model = *state.model;
  Classifier& cls = model.classifier();
  Extractor& ext = model.extractor();
  const auto cls_params = model.classifier_params();
  const auto ext_params = model.extractor_params();
  const double lr = cfg.learning_rate(state.epoch);
  const Tensor targets = smoothed_targets(batch.labels, cls.num_classes(), cfg.epsilon);
  const bool adversarial = !cfg.loss_weights.all_zero() || cfg.log_all_terms;
  const bool full_game = cfg.game_mode == GameMode::full;

  StepMetrics metrics;
  metrics.iteration = state.iteration;
  metrics.epoch = state.epoch;
  metrics.lr = lr;

  // The region set and noise draws are fixed for the iteration: both phases
  // (and a fresh forward, if requested) rebuild from the same stream state.
  const Rng stream_start = perturbation_rng;
  FeatureBatch clean = ext.forward(batch.images, true);
  RepresentationPass pass = build_representations(clean, adversarial, cfg, stream_start);

  if (full_game) {
    nn::zero_grads(cls_params);
    const PhaseResult r =
        run_phase(cls, pass, targets, cfg, Phase::classifier, true, true, false, state.iteration);
    state.classifier_opt.step(cls_params, lr);
    ++state.optimizer_updates;
    ++metrics.optimizer_updates;
    metrics.classifier_objective = r.objective.value;
    record_terms(metrics, r.objective, pass.adversarial);
    if (observer) observer(Phase::classifier);
  }

  if (cfg.forward_mode == ForwardMode::fresh_forward && full_game) {
    clean = ext.forward(batch.images, true);
    pass = build_representations(clean, adversarial, cfg, stream_start);
  }

  // Extractor phase. In no_game mode this is the only update and it moves
  // classifier and extractor together on the minimized objective.
  nn::zero_grads(ext_params);
  if (!full_game) nn::zero_grads(cls_params);
  const PhaseResult r = run_phase(cls, pass, targets, cfg, Phase::extractor, !full_game, !full_game,
                                  true, state.iteration);
  ext.backward(r.grad_maps);
  state.extractor_opt.step(ext_params, lr);
  if (!full_game) state.classifier_opt.step(cls_params, lr);
  ++state.optimizer_updates;
  ++metrics.optimizer_updates;
  metrics.extractor_objective = r.objective.value;
  if (!full_game) record_terms(metrics, r.objective, pass.adversarial);
  if (observer) observer(Phase::extractor);
  ++state.iteration;
  return metrics;
}

std::vector<StepMetrics> train(TrainState& state, const DatasetIndex& data, const TrainConfig& cfg,
                               const TrainHooks& hooks) {
  cfg.validate();
  if (state.model->classifier().num_classes() != data.num_train_identities()) {
    throw InvalidConfig("model has " + std::to_string(state.model->classifier().num_classes()) +
                        " classes but the dataset has " +
                        std::to_string(data.num_train_identities()) + " training identities");
  }
  PkSampler sampler(data, cfg.batch_p, cfg.batch_k, state.sampler_rng);
  const int per_epoch = sampler.batches_per_epoch();
  std::vector<StepMetrics> log;

  auto checkpoint = [&](const std::string& name) {
    if (hooks.checkpoint_dir.empty()) return;
    std::filesystem::create_directories(hooks.checkpoint_dir);
    save_train_state(hooks.checkpoint_dir / name, state, cfg);
  };

  while (state.epoch < cfg.epochs) {
    const std::int64_t epoch_start = static_cast<std::int64_t>(state.epoch) * per_epoch;
    while (state.iteration < epoch_start + per_epoch) {
      if (hooks.stop_at_iteration && state.iteration >= *hooks.stop_at_iteration) return log;
      sampler.set_rng(state.sampler_rng);
      const auto indices = sampler.next_batch();
      state.sampler_rng = sampler.rng();
      StepStreams streams = step_streams(state.master_seed, state.iteration);
      const LabeledBatch batch = make_batch(data, indices, cfg, streams.augmentation);
      StepMetrics m;
      try {
        m = train_step(state, batch, cfg, streams.perturbation, hooks.on_phase);
      } catch (const NonFiniteLoss&) {
        checkpoint("nonfinite_dump.ckpt");
        throw;
      }
      if (hooks.log) *hooks.log << m.to_json().dump() << '\n';
      if (hooks.on_step) hooks.on_step(m);
      log.push_back(std::move(m));
    }
    ++state.epoch;
    if (hooks.checkpoint_every > 0 && state.epoch % hooks.checkpoint_every == 0 &&
        state.epoch < cfg.epochs) {
      checkpoint("epoch_" + std::to_string(state.epoch) + ".ckpt");
    }
  }
  checkpoint("final.ckpt");
  return log;
}

// ---------------------------------------------------------------- checkpoints

void save_train_state(const std::filesystem::path& path, TrainState& state,
                      const TrainConfig& cfg) {
  ReidModel& model = *state.model;
  nlohmann::ordered_json meta;
  meta["model"] = model_config_json(model.config());
  meta["train"] = train_config_json(cfg);
  meta["epoch"] = state.epoch;
  meta["iteration"] = state.iteration;
  meta["optimizer_updates"] = state.optimizer_updates;
  meta["master_seed"] = state.master_seed;
  meta["sampler_rng"] = state.sampler_rng.serialize();
  meta["extractor_opt_steps"] = state.extractor_opt.steps();
  meta["classifier_opt_steps"] = state.classifier_opt.steps();
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (auto& [name, t] : model.state()) tensors.emplace_back(name, t);
  for (auto& e : state.extractor_opt.state(model.extractor_params(), "optimizer.extractor."))
    tensors.push_back(e);
  for (auto& e : state.classifier_opt.state(model.classifier_params(), "optimizer.classifier."))
    tensors.push_back(e);
  write_checkpoint(path, std::move(meta), tensors);
}

TrainState load_train_state(const std::filesystem::path& path, const TrainConfig& cfg) {
  const CheckpointContents c = read_checkpoint(path);
  TrainState s;
  s.model = std::make_unique<ReidModel>(model_config_from_json(c.meta.at("model")));
  load_model_state(*s.model, c.tensors);
  s.extractor_opt = Adam(cfg.adam);
  s.classifier_opt = Adam(cfg.adam);
  s.extractor_opt.load_state(s.model->extractor_params(), "optimizer.extractor.", c.tensors,
                             c.meta.at("extractor_opt_steps").get<std::int64_t>());
  s.classifier_opt.load_state(s.model->classifier_params(), "optimizer.classifier.", c.tensors,
                              c.meta.at("classifier_opt_steps").get<std::int64_t>());
  s.epoch = c.meta.at("epoch").get<int>();
  s.iteration = c.meta.at("iteration").get<std::int64_t>();
  s.optimizer_updates = c.meta.at("optimizer_updates").get<std::int64_t>();
  s.master_seed = c.meta.at("master_seed").get<std::uint64_t>();
  s.sampler_rng = Rng::deserialize(c.meta.at("sampler_rng").get<std::string>());
  return s;
}

}  // namespace etnd
