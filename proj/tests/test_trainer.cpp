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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "etnd/errors.hpp"
#include "etnd/trainer.hpp"

using namespace etnd;
namespace fs = std::filesystem;

namespace {

const DatasetIndex& tiny_data() {
  static const DatasetIndex d = [] {
    SynthSpec s;
    s.num_identities = 6;
    s.num_test_identities = 2;
    s.train_images_per_identity = 4;
    s.query_images_per_identity = 1;
    s.gallery_images_per_identity = 1;
    s.seed = 11;
    return synth_generate(s);
  }();
  return d;
}

TrainConfig tiny_config(std::uint64_t seed = 0) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.lr_decay_epochs = {1};
  cfg.base_lr = 1e-3;
  cfg.batch_p = 4;
  cfg.batch_k = 2;
  cfg.seed = seed;
  return cfg;
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.num_classes = 6;
  return m;
}

std::vector<Tensor> snapshot(const std::vector<nn::Parameter*>& params) {
  std::vector<Tensor> out;
  for (const nn::Parameter* p : params) out.push_back(p->value);
  return out;
}

bool same(const std::vector<nn::Parameter*>& params, const std::vector<Tensor>& values) {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!(params[i]->value == values[i])) return false;
  return true;
}

LabeledBatch first_batch(const TrainConfig& cfg, std::uint64_t seed) {
  PkSampler sampler(tiny_data(), cfg.batch_p, cfg.batch_k, Rng(seed));
  Rng aug(seed + 100);
  return make_batch(tiny_data(), sampler.next_batch(), cfg, aug);
}

void check_logs_equal(const std::vector<StepMetrics>& a, const std::vector<StepMetrics>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].iteration == b[i].iteration);
    CHECK(std::abs(a[i].loss_clean - b[i].loss_clean) <= 1e-6);
    CHECK(std::abs(a[i].extractor_objective - b[i].extractor_objective) <= 1e-6);
    CHECK(std::abs(*a[i].loss_e - *b[i].loss_e) <= 1e-6);
    CHECK(std::abs(*a[i].loss_n - *b[i].loss_n) <= 1e-6);
  }
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  CHECK(cfg.learning_rate(0) == doctest::Approx(3e-4));
  CHECK(cfg.learning_rate(39) == doctest::Approx(3e-4));
  CHECK(cfg.learning_rate(40) == doctest::Approx(3e-5));
  CHECK(cfg.learning_rate(70) == doctest::Approx(3e-6));
  CHECK(cfg.learning_rate(119) == doctest::Approx(3e-6));

  cfg.epochs = 20;
  cfg.lr_decay_epochs = {8, 14};
  CHECK(cfg.learning_rate(7) == doctest::Approx(3e-4));
  CHECK(cfg.learning_rate(8) == doctest::Approx(3e-5));
  CHECK(cfg.learning_rate(14) == doctest::Approx(3e-6));

  TrainConfig bad;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
}

TEST_CASE("updates per step") {
  const TrainConfig cfg = tiny_config();
  const LabeledBatch batch = first_batch(cfg, 1);
  SUBCASE("full game: classifier then extractor") {
    TrainState s = make_train_state(cfg, tiny_model());
    std::vector<Phase> phases;
    Rng rng(5);
    const StepMetrics m = train_step(s, batch, cfg, rng, [&](Phase p) { phases.push_back(p); });
    CHECK(m.optimizer_updates == 2);
    CHECK(s.optimizer_updates == 2);
    CHECK(phases == std::vector<Phase>{Phase::classifier, Phase::extractor});
    CHECK(m.classifier_objective.has_value());
    CHECK(m.loss_e.has_value());
    CHECK(*m.classifier_objective ==
          doctest::Approx(m.loss_clean - 0.1 * *m.loss_e - 0.15 * *m.loss_t - 0.1 * *m.loss_n));
  }
  SUBCASE("no game: one joint update") {
    TrainConfig ng = cfg;
    ng.game_mode = GameMode::no_game;
    TrainState s = make_train_state(ng, tiny_model());
    const auto cls0 = snapshot(s.model->classifier_params());
    Rng rng(5);
    const StepMetrics m = train_step(s, batch, ng, rng);
    CHECK(m.optimizer_updates == 1);
    CHECK_FALSE(m.classifier_objective.has_value());
    CHECK(m.extractor_objective ==
          doctest::Approx(m.loss_clean + 0.1 * *m.loss_e + 0.15 * *m.loss_t + 0.1 * *m.loss_n));
    CHECK_FALSE(same(s.model->classifier_params(), cls0));
  }
}

TEST_CASE("phase isolation") {
  const TrainConfig cfg = tiny_config();
  TrainState s = make_train_state(cfg, tiny_model());
  const auto ext = s.model->extractor_params();
  const auto cls = s.model->classifier_params();
  std::vector<Tensor> ext_before, cls_before;
  int checked = 0;
  TrainHooks hooks;
  hooks.on_phase = [&](Phase p) {
    if (p == Phase::classifier) {
      CHECK(same(ext, ext_before));
      CHECK_FALSE(same(cls, cls_before));
      cls_before = snapshot(cls);
    } else {
      CHECK(same(cls, cls_before));
      CHECK_FALSE(same(ext, ext_before));
      ext_before = snapshot(ext);
      ++checked;
    }
  };
  ext_before = snapshot(ext);
  cls_before = snapshot(cls);
  train(s, tiny_data(), cfg, hooks);
  CHECK(checked == 6);

  // gradients of the inactive set stay zero
  const LabeledBatch batch = first_batch(cfg, 2);
  phase_gradients(*s.model, batch, cfg, Rng(3), Phase::classifier);
  for (const nn::Parameter* p : ext)
    for (Real g : p->grad.span()) REQUIRE(g == 0.0);
  phase_gradients(*s.model, batch, cfg, Rng(3), Phase::extractor);
  for (const nn::Parameter* p : cls)
    for (Real g : p->grad.span()) REQUIRE(g == 0.0);
}

TEST_CASE("zero weights reduce to the baseline") {
  TrainConfig logged = tiny_config();
  logged.loss_weights = {0, 0, 0};
  TrainConfig plain = logged;
  plain.log_all_terms = false;

  TrainState a = make_train_state(logged, tiny_model()), b = make_train_state(plain, tiny_model());
  const auto la = train(a, tiny_data(), logged), lb = train(b, tiny_data(), plain);
  REQUIRE(la.size() == lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    CHECK(la[i].loss_clean == lb[i].loss_clean);
    CHECK(la[i].loss_e.has_value());
    CHECK_FALSE(lb[i].loss_e.has_value());
    CHECK(*lb[i].classifier_objective == lb[i].loss_clean);
    CHECK(lb[i].optimizer_updates == 2);
  }
  CHECK(same(a.model->extractor_params(), snapshot(b.model->extractor_params())));
  CHECK(same(a.model->classifier_params(), snapshot(b.model->classifier_params())));
}

TEST_CASE("determinism and checkpoint resume") {
  TrainConfig cfg = tiny_config(7);
  cfg.epochs = 3;
  TrainState a = make_train_state(cfg, tiny_model()), b = make_train_state(cfg, tiny_model());
  std::ostringstream log_a, log_b;
  TrainHooks ha, hb;
  ha.log = &log_a;
  hb.log = &log_b;
  const auto full = train(a, tiny_data(), cfg, ha);
  check_logs_equal(full, train(b, tiny_data(), cfg, hb));
  CHECK(log_a.str() == log_b.str());
  CHECK(full.size() == 9);
  CHECK(full.back().lr == doctest::Approx(1e-4));

  const fs::path dir = fs::temp_directory_path() / "etnd_test_resume";
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (std::int64_t stop : {3, 4}) {  // epoch boundary and mid-epoch
    TrainState first = make_train_state(cfg, tiny_model());
    TrainHooks h;
    h.stop_at_iteration = stop;
    auto head = train(first, tiny_data(), cfg, h);
    CHECK(static_cast<std::int64_t>(head.size()) == stop);
    save_train_state(dir / "mid.ckpt", first, cfg);
    TrainState resumed = load_train_state(dir / "mid.ckpt", cfg);
    CHECK(resumed.iteration == stop);
    const auto tail = train(resumed, tiny_data(), cfg);
    head.insert(head.end(), tail.begin(), tail.end());
    check_logs_equal(full, head);
    CHECK(same(resumed.model->extractor_params(), snapshot(a.model->extractor_params())));
  }

  TrainHooks ck;
  ck.checkpoint_dir = dir / "run";
  ck.checkpoint_every = 1;
  TrainState c = make_train_state(cfg, tiny_model());
  train(c, tiny_data(), cfg, ck);
  CHECK(fs::exists(dir / "run" / "epoch_1.ckpt"));
  CHECK(fs::exists(dir / "run" / "epoch_2.ckpt"));
  CHECK(fs::exists(dir / "run" / "final.ckpt"));
  const TrainState loaded = load_train_state(dir / "run" / "final.ckpt", cfg);
  CHECK(loaded.epoch == 3);
  CHECK(loaded.optimizer_updates == 18);
  CHECK(loaded.extractor_opt.steps() == 9);
}

TEST_CASE("a step descends the extractor objective") {
  int passes = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TrainConfig cfg = tiny_config(seed);
    TrainState s = make_train_state(cfg, tiny_model());
    const LabeledBatch batch = first_batch(cfg, seed);
    const Rng stream(seed + 50);
    const double before = phase_gradients(*s.model, batch, cfg, stream, Phase::extractor);
    Rng rng = stream;
    train_step(s, batch, cfg, rng);
    const double after = phase_gradients(*s.model, batch, cfg, stream, Phase::extractor);
    passes += after < before;
  }
  CHECK(passes >= 8);
}

TEST_CASE("non-finite loss aborts with a dump") {
  const TrainConfig cfg = tiny_config();
  TrainState s = make_train_state(cfg, tiny_model());
  s.model->classifier().weight().value.data()[0] = std::numeric_limits<Real>::quiet_NaN();
  const fs::path dir = fs::temp_directory_path() / "etnd_test_nonfinite";
  fs::remove_all(dir);
  TrainHooks hooks;
  hooks.checkpoint_dir = dir;
  CHECK_THROWS_AS(train(s, tiny_data(), cfg, hooks), NonFiniteLoss);
  CHECK(fs::exists(dir / "nonfinite_dump.ckpt"));
  CHECK_FALSE(fs::exists(dir / "final.ckpt"));
}

TEST_CASE("desk baseline converges on the synthetic set" * doctest::timeout(300)) {
  const DatasetIndex data = synth_generate(SynthSpec{});
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.base_lr = 1e-2;
  cfg.lr_decay_epochs = {20, 27};
  cfg.loss_weights = {0, 0, 0};
  cfg.log_all_terms = false;
  TrainState s = make_train_state(cfg, ModelConfig{});
  const auto log = train(s, data, cfg);
  double last = 0.0;
  int n = 0;
  for (const StepMetrics& m : log)
    if (m.epoch == 9) last += m.loss_clean, ++n;
  last /= n;
  MESSAGE("final-epoch CE " << last);
  CHECK(last < std::log(50.0) * 0.5);
}
