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

// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "etnd/attack_harness.hpp"
#include "etnd/errors.hpp"
#include "etnd/feature_perturb.hpp"
#include "etnd/losses.hpp"
#include "etnd/region_sampler.hpp"
#include "etnd/retrieval_eval.hpp"
#include "etnd/trainer.hpp"
#include "oracles/retrieval_oracle.hpp"
#include "run_config.hpp"

using namespace etnd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Tensor random_maps(Rng& rng, Tensor::Shape shape, double lo = -2.0, double hi = 2.0) {
  Tensor t(shape);
  for (Real& v : t.span()) v = rng.uniform(lo, hi);
  return t;
}

Region random_region(Rng& rng, const GridShape& g) {
  Region r;
  r.h = 1 + static_cast<int>(rng.below(g.height));
  r.w = 1 + static_cast<int>(rng.below(g.width));
  r.y = static_cast<int>(rng.below(g.height - r.h + 1));
  r.x = static_cast<int>(rng.below(g.width - r.w + 1));
  return r;
}

// ------------------------------------------------------------------ 1

Outcome perturbation_exactness() {
  const auto t0 = Clock::now();
  Rng rng(101);
  int failures = 0, cases = 0;
  for (int i = 0; i < 1000; ++i) {
    const Tensor::Shape shape{1 + static_cast<int>(rng.below(3)), 1 + static_cast<int>(rng.below(4)),
                              1 + static_cast<int>(rng.below(16)), 1 + static_cast<int>(rng.below(8))};
    const Tensor m = random_maps(rng, shape);
    const GridShape g{shape[2], shape[3]};
    const Region r = random_region(rng, g);

    // erase: zero inside, untouched outside
    const Tensor e = erase(m, r);
    bool ok = true;
    for (int n = 0; n < m.n(); ++n)
      for (int c = 0; c < m.c(); ++c)
        for (int y = 0; y < g.height; ++y)
          for (int x = 0; x < g.width; ++x)
            ok = ok && e(n, c, y, x) == (r.contains(y, x) ? 0.0 : m(n, c, y, x));
    failures += !ok;

    // transform (copy): dst reads the snapshot of src, everything else untouched
    Region dst = r;
    dst.y = static_cast<int>(rng.below(g.height - r.h + 1));
    dst.x = static_cast<int>(rng.below(g.width - r.w + 1));
    const Tensor t = transform(m, r, dst);
    ok = true;
    for (int n = 0; n < m.n(); ++n)
      for (int c = 0; c < m.c(); ++c)
        for (int y = 0; y < g.height; ++y)
          for (int x = 0; x < g.width; ++x) {
            const Real want = dst.contains(y, x) ? m(n, c, y - dst.y + r.y, x - dst.x + r.x) : m(n, c, y, x);
            ok = ok && t(n, c, y, x) == want;
          }
    failures += !ok;

    // noise: Uniform[0, 1) inside, untouched outside
    Rng nrng(rng.next_u64());
    const Tensor z = noise(m, r, nrng);
    ok = true;
    for (int n = 0; n < m.n(); ++n)
      for (int c = 0; c < m.c(); ++c)
        for (int y = 0; y < g.height; ++y)
          for (int x = 0; x < g.width; ++x) {
            const Real v = z(n, c, y, x);
            ok = ok && (r.contains(y, x) ? (v >= 0.0 && v < 1.0) : v == m(n, c, y, x));
          }
    failures += !ok;
    cases += 3;
  }
  const double s = seconds_since(t0);
  return {failures == 0 && s < 60.0, fmt("%d failures in %d cases, %.2f s", failures, cases, s)};
}

// ------------------------------------------------------------------ 2

Outcome sampler_statistics() {
  const auto t0 = Clock::now();
  const GridShape g{16, 8};
  const PerturbationConfig cfg;
  Rng rng(202);
  int bad_contain = 0, bad_area = 0, bad_pair = 0;
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Region r = sample_region(rng, g, cfg);
    bad_contain += !r.valid_for(g);
    const double frac = static_cast<double>(r.area()) / g.cells();
    lo = std::min(lo, frac);
    hi = std::max(hi, frac);
    bad_area += frac < 0.014 || frac > 0.52;
    const auto [src, dst] = sample_transform_pair(rng, g, cfg);
    bad_pair += !src.same_size(dst) || !src.valid_for(g) || !dst.valid_for(g);
  }
  const double s = seconds_since(t0);
  return {bad_contain + bad_area + bad_pair == 0 && s < 60.0,
          fmt("containment %d, area %d (observed [%.4f, %.4f]), pair %d violations, %.2f s", bad_contain,
              bad_area, lo, hi, bad_pair, s)};
}

// ------------------------------------------------------------------ 3

Outcome label_smoothing() {
  int failures = 0;
  double worst = 0.0;
  for (int n : {2, 10, 702})
    for (double eps : {0.0, 0.1, 0.5}) {
      std::vector<int> labels;
      for (int y = 0; y < n; y += std::max(1, n / 7)) labels.push_back(y);
      const Tensor q = smoothed_targets(labels, n, eps);
      for (std::size_t b = 0; b < labels.size(); ++b) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += q(static_cast<int>(b), i, 0, 0);
        worst = std::max(worst, std::abs(sum - 1.0));
        failures += std::abs(sum - 1.0) > 1e-6;
        failures += q(static_cast<int>(b), labels[b], 0, 0) != 1.0 - (n - 1) * eps / n;
      }
    }
  return {failures == 0, fmt("%d failures over N in {2,10,702}, eps in {0,0.1,0.5}; max |sum-1| %.1e", failures, worst)};
}

// ------------------------------------------------------------------ shared desk setup

struct Desk {
  cli::RunConfig cfg;
  DatasetIndex data;
  int num_classes = 0;

  Desk() : data(cfg.load_dataset()), num_classes(data.num_train_identities()) {}
  TrainConfig train(std::uint64_t seed, LossWeights w) const {
    TrainConfig t = cfg.train();
    t.seed = seed;
    t.loss_weights = w;
    return t;
  }
  ModelConfig model() const { return cfg.model(num_classes); }
  LabeledBatch batch(const TrainConfig& t, std::uint64_t seed, int p, int k) const {
    PkSampler sampler(data, p, k, Rng(seed));
    Rng aug(seed ^ 0x5bd1e995ULL);
    return make_batch(data, sampler.next_batch(), t, aug);
  }
};

// ------------------------------------------------------------------ 4

Outcome gradient_check(const Desk& desk) {
  const auto t0 = Clock::now();
  const TrainConfig cfg = desk.train(404, LossWeights{});
  TrainState state = make_train_state(cfg, desk.model());
  ReidModel& model = *state.model;
  const LabeledBatch batch = desk.batch(cfg, 404, 4, 2);
  const Rng stream(405);
  Rng pick(406);
  // small enough to stay clear of ReLU kinks, large enough that round-off
  // stays below 1e-3 of gradients near 1e-6
  const double h = 1e-5;
  int checked = 0, failures = 0;
  double worst = 0.0;
  for (Phase phase : {Phase::classifier, Phase::extractor}) {
    const auto params = phase == Phase::classifier ? model.classifier_params() : model.extractor_params();
    std::size_t total = 0;
    for (const nn::Parameter* p : params) total += p->count();
    phase_gradients(model, batch, cfg, stream, phase);
    std::vector<std::pair<nn::Parameter*, std::size_t>> coords;
    std::vector<double> analytic;
    for (int k = 0; k < 100; ++k) {
      std::size_t i = pick.below(total);
      std::size_t j = 0;
      while (i >= params[j]->count()) i -= params[j++]->count();
      coords.emplace_back(params[j], i);
      analytic.push_back(params[j]->grad.data()[i]);
    }
    for (std::size_t k = 0; k < coords.size(); ++k) {
      auto [p, i] = coords[k];
      const double orig = p->value.data()[i];
      p->value.data()[i] = orig + h;
      const double fp = phase_gradients(model, batch, cfg, stream, phase);
      p->value.data()[i] = orig - h;
      const double fm = phase_gradients(model, batch, cfg, stream, phase);
      p->value.data()[i] = orig;
      const double fd = (fp - fm) / (2 * h);
      const double rel = std::abs(analytic[k] - fd) / std::max({std::abs(analytic[k]), std::abs(fd), 1e-8});
      worst = std::max(worst, rel);
      failures += rel > 1e-3;
      ++checked;
    }
  }
  const double s = seconds_since(t0);
  return {failures == 0 && checked >= 200 && s < 300.0,
          fmt("%d of %d coordinates (100 per phase) exceed 1e-3, max rel err %.2e, %.1f s", failures, checked,
              worst, s)};
}

// ------------------------------------------------------------------ 5

Outcome minmax_signs(const Desk& desk) {
  int ascent = 0, descent = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TrainConfig cfg = desk.train(500 + seed, LossWeights{});
    TrainState state = make_train_state(cfg, desk.model());
    ReidModel& model = *state.model;
    Classifier& cls = model.classifier();
    const LabeledBatch batch = desk.batch(cfg, 500 + seed, cfg.batch_p, cfg.batch_k);
    const Tensor targets = smoothed_targets(batch.labels, cls.num_classes(), cfg.epsilon);

    // classifier step on the adversarial terms only, inputs frozen
    const FeatureBatch clean = model.extractor().forward(batch.images, true);
    Rng prng(600 + seed);
    const RegionSet regions = sample_batch_regions(prng, grid_of(clean), cfg.perturbation);
    const AdversarialBatch adv = make_adversarial_batch(clean, regions, prng, cfg.transform_mode);
    const std::array<const FeatureBatch*, 4> reps{&adv.clean, &adv.erased, &adv.transformed, &adv.noised};
    auto forward_all = [&](std::array<ClassifierCache, 4>* caches) {
      RepresentationLogits logits;
      for (int k = 0; k < 4; ++k)
        logits.logits[k] = cls.forward(*reps[k], NormMode::train, caches ? &(*caches)[k] : nullptr);
      return logits;
    };
    std::array<ClassifierCache, 4> caches;
    const RepresentationLogits before = forward_all(&caches);
    const PhaseObjective obj = classifier_phase_objective(before, targets, cfg.loss_weights, false);
    const auto cls_params = model.classifier_params();
    nn::zero_grads(cls_params);
    for (int k = 1; k < 4; ++k) cls.backward(caches[k], obj.grads[k], true, false);
    for (nn::Parameter* p : cls_params)
      for (std::size_t i = 0; i < p->count(); ++i) p->value.data()[i] -= 1e-2 * p->grad.data()[i];
    const RepresentationLogits after = forward_all(nullptr);
    bool up = true;
    for (int k = 1; k < 4; ++k) up = up && ce_loss(after.logits[k], targets) > ce_loss(before.logits[k], targets);
    ascent += up;

    // extractor step on the full extractor objective, classifier frozen
    const Rng stream(700 + seed);
    const double f0 = phase_gradients(model, batch, cfg, stream, Phase::extractor);
    for (nn::Parameter* p : model.extractor_params())
      for (std::size_t i = 0; i < p->count(); ++i) p->value.data()[i] -= 1e-3 * p->grad.data()[i];
    const double f1 = phase_gradients(model, batch, cfg, stream, Phase::extractor);
    descent += f1 < f0;
  }
  return {ascent >= 9 && descent >= 8,
          fmt("classifier step raised all adversarial losses in %d/10 seeds (need 9); extractor step lowered "
              "the objective in %d/10 (need 8)",
              ascent, descent)};
}

// ------------------------------------------------------------------ 6

Outcome phase_isolation(const Desk& desk) {
  const TrainConfig cfg = desk.train(606, LossWeights{});
  TrainState state = make_train_state(cfg, desk.model());
  const auto ext = state.model->extractor_params();
  const auto cls = state.model->classifier_params();
  auto snap = [](const std::vector<nn::Parameter*>& ps) {
    std::vector<Tensor> v;
    for (const nn::Parameter* p : ps) v.push_back(p->value);
    return v;
  };
  auto same = [](const std::vector<nn::Parameter*>& ps, const std::vector<Tensor>& v) {
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (!(ps[i]->value == v[i])) return false;
    return true;
  };
  std::vector<Tensor> ext_prev = snap(ext), cls_prev = snap(cls);
  int iterations = 0, violations = 0;
  TrainHooks hooks;
  hooks.stop_at_iteration = 100;
  hooks.on_phase = [&](Phase p) {
    if (p == Phase::classifier) {
      violations += !same(ext, ext_prev);
      cls_prev = snap(cls);
    } else {
      violations += !same(cls, cls_prev);
      ext_prev = snap(ext);
      ++iterations;
    }
  };
  TrainConfig long_cfg = cfg;
  long_cfg.epochs = std::max(cfg.epochs, 100);
  train(state, desk.data, long_cfg, hooks);
  return {iterations == 100 && violations == 0,
          fmt("%d iterations, %d phases with a changed frozen parameter set", iterations, violations)};
}

// ------------------------------------------------------------------ 7

Outcome retrieval_oracle() {
  Rng rng(707);
  int failures = 0, instances = 0;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int nq = 1 + static_cast<int>(rng.below(20)), ng = 1 + static_cast<int>(rng.below(50));
    std::vector<std::vector<double>> d(nq, std::vector<double>(ng));
    Tensor dist(nq, ng);
    const bool ties = t % 4 == 0;
    for (int q = 0; q < nq; ++q)
      for (int g = 0; g < ng; ++g) dist(q, g, 0, 0) = d[q][g] = ties ? rng.below(4) : rng.uniform();
    std::vector<int> qid, gid, qcam, gcam;
    for (int q = 0; q < nq; ++q) {
      qid.push_back(static_cast<int>(rng.below(5)));
      qcam.push_back(static_cast<int>(rng.below(2)));
    }
    for (int g = 0; g < ng; ++g) {
      gid.push_back(static_cast<int>(rng.below(5)));
      gcam.push_back(static_cast<int>(rng.below(2)));
    }
    const bool filter = t % 2 == 0;
    const oracle::Metrics o = oracle::rank_metrics(d, qid, gid, qcam, gcam, 10, filter);
    ++instances;
    if (o.evaluated == 0) {
      try {
        evaluate_distances(dist, qid, gid, qcam, gcam, 10, filter);
        ++failures;
      } catch (const NoValidGallery&) {
      }
      continue;
    }
    const RankingResult r = evaluate_distances(dist, qid, gid, qcam, gcam, 10, filter);
    double err = std::abs(r.map - o.map);
    for (int k = 0; k < 10; ++k) err = std::max(err, std::abs(r.cmc[k] - o.cmc[k]));
    worst = std::max(worst, err);
    failures += err > 1e-9;
  }
  return {failures == 0, fmt("%d of %d instances disagree, max deviation %.1e", failures, instances, worst)};
}

// ------------------------------------------------------------------ 8, 9, 10

struct Run {
  std::unique_ptr<ReidModel> model;
  std::vector<StepMetrics> log;
  RankingResult clean;
};

Outcome headline(const Desk& desk, std::map<std::pair<std::string, std::uint64_t>, Run>& runs,
                 double& elapsed) {
  const auto t0 = Clock::now();
  const LossWeights full{};
  const std::vector<std::pair<std::string, LossWeights>> variants = {
      {"baseline", {0, 0, 0}},
      {"ED", {full.lambda1, 0, 0}},
      {"TD", {0, full.lambda2, 0}},
      {"ND", {0, 0, full.lambda3}},
      {"full", full}};
  const EvalOptions opts = desk.cfg.eval();
  std::map<std::string, double> mean;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const auto& [name, w] : variants) {
      const TrainConfig cfg = desk.train(seed, w);
      TrainState state = make_train_state(cfg, desk.model());
      Run run;
      run.log = train(state, desk.data, cfg);
      run.clean = evaluate_model(*state.model, desk.data, opts);
      run.model = std::move(state.model);
      mean[name] += 100.0 * run.clean.rank1() / 3.0;
      per_seed << ' ' << name << seed << '=' << fmt("%.1f", 100.0 * run.clean.rank1());
      runs[{name, seed}] = std::move(run);
    }
  }
  elapsed = seconds_since(t0);
  const double base = mean["baseline"], top = mean["full"];
  bool ordered = true;
  for (const char* v : {"ED", "TD", "ND"}) {
    const double m = mean[v];
    ordered = ordered && ((m >= base && m <= top) || std::abs(m - top) <= 1.0);
  }
  const bool gain = top >= base + 3.0;
  std::cerr << "  per-seed Rank-1:" << per_seed.str() << "\n";
  return {gain && ordered && elapsed <= 1800.0,
          fmt("mean Rank-1 baseline %.2f, ED %.2f, TD %.2f, ND %.2f, full %.2f; gain %+.2f (need >= +3), "
              "variant ordering %s, %.0f s",
              base, mean["ED"], mean["TD"], mean["ND"], top, top - base, ordered ? "holds" : "violated", elapsed)};
}

Outcome attack_asymmetry(const Desk& desk, std::map<std::pair<std::string, std::uint64_t>, Run>& runs) {
  const EvalOptions opts = desk.cfg.eval();
  std::ostringstream detail;
  bool pass = true;
  for (AttackKind kind : {AttackKind::feature_erase, AttackKind::image_erase}) {
    int wins = 0;
    detail << to_string(kind) << " mAP drop base/full:";
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      AttackSpec spec = desk.cfg.attack();
      spec.kind = kind;
      spec.seed = seed;
      spec.apply_to = AttackTarget::both;
      Run& b = runs.at({"baseline", seed});
      Run& f = runs.at({"full", seed});
      const double drop_b = b.clean.map - attack_eval(*b.model, desk.data, spec, opts).map;
      const double drop_f = f.clean.map - attack_eval(*f.model, desk.data, spec, opts).map;
      wins += drop_b > drop_f;
      detail << fmt(" %.2f/%.2f", 100 * drop_b, 100 * drop_f);
    }
    detail << fmt(" (%d/3); ", wins);
    pass = pass && wins >= 2;
  }
  return {pass, detail.str() + "need >= 2/3 for both"};
}

Outcome reproducibility(const Desk& desk, const std::vector<StepMetrics>& reference) {
  const TrainConfig cfg = desk.train(0, LossWeights{});
  auto max_dev = [](const std::vector<StepMetrics>& a, const std::vector<StepMetrics>& b) {
    if (a.size() != b.size()) return HUGE_VAL;
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      d = std::max({d, std::abs(a[i].loss_clean - b[i].loss_clean),
                    std::abs(a[i].extractor_objective - b[i].extractor_objective),
                    std::abs(a[i].loss_e.value_or(0) - b[i].loss_e.value_or(0)),
                    std::abs(a[i].loss_t.value_or(0) - b[i].loss_t.value_or(0)),
                    std::abs(a[i].loss_n.value_or(0) - b[i].loss_n.value_or(0))});
      if (a[i].iteration != b[i].iteration) return HUGE_VAL;
    }
    return d;
  };
  TrainState again = make_train_state(cfg, desk.model());
  const double rerun = max_dev(reference, train(again, desk.data, cfg));

  const fs::path dir = fs::temp_directory_path() / "etnd_acceptance";
  fs::create_directories(dir);
  TrainState head = make_train_state(cfg, desk.model());
  TrainHooks hooks;
  hooks.stop_at_iteration = static_cast<std::int64_t>(reference.size() / 2 + 3);
  std::vector<StepMetrics> resumed_log = train(head, desk.data, cfg, hooks);
  save_train_state(dir / "resume.ckpt", head, cfg);
  TrainState tail = load_train_state(dir / "resume.ckpt", cfg);
  const auto rest = train(tail, desk.data, cfg);
  resumed_log.insert(resumed_log.end(), rest.begin(), rest.end());
  const double resume = max_dev(reference, resumed_log);
  fs::remove_all(dir);
  return {rerun <= 1e-6 && resume <= 1e-6,
          fmt("%zu iterations; rerun max deviation %.1e, resume at iteration %lld max deviation %.1e", reference.size(),
              rerun, static_cast<long long>(*hooks.stop_at_iteration), resume)};
}

// ------------------------------------------------------------------ 11

Outcome model_accounting() {
  ModelConfig cfg;
  cfg.preset = BackbonePreset::resnet50;
  cfg.image_h = 256;
  cfg.image_w = 128;
  cfg.num_classes = 702;
  ReidModel model(cfg);
  const double count = static_cast<double>(model.parameter_count());
  const double rel = std::abs(count - 24.9e6) / 24.9e6;
  return {rel <= 0.02, fmt("%.0f parameters (%.3f M, %.2f%% from 24.9 M)", count, count / 1e6, 100 * rel)};
}

}  // namespace

int main(int argc, char** argv) {
  // optional arguments select criteria; 9 and 10 need the runs of 8
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  if (selected.count(9) || selected.count(10)) selected.insert(8);
  auto wanted = [&](int n) { return selected.empty() || selected.count(n) > 0; };

  int failed = 0, ran = 0;
  auto report = [&](int n, const char* name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << n << " (" << name << "): " << o.detail << std::endl;
    failed += !o.pass;
    ++ran;
  };
  auto guarded = [&](int n, const char* name, const std::function<Outcome()>& f) {
    if (!wanted(n)) return;
    try {
      report(n, name, f());
    } catch (const std::exception& e) {
      report(n, name, {false, std::string("threw: ") + e.what()});
    }
  };

  guarded(1, "perturbation exactness", perturbation_exactness);
  guarded(2, "region sampler statistics", sampler_statistics);
  guarded(3, "label smoothing", label_smoothing);
  const Desk desk;
  guarded(4, "gradient correctness", [&] { return gradient_check(desk); });
  guarded(5, "min-max sign behavior", [&] { return minmax_signs(desk); });
  guarded(6, "phase isolation", [&] { return phase_isolation(desk); });
  guarded(7, "retrieval oracle equivalence", retrieval_oracle);

  std::map<std::pair<std::string, std::uint64_t>, Run> runs;
  double elapsed = 0.0;
  guarded(8, "desk headline", [&] { return headline(desk, runs, elapsed); });
  guarded(9, "attack asymmetry", [&] { return attack_asymmetry(desk, runs); });
  guarded(10, "reproducibility", [&] {
    const auto it = runs.find({"full", 0});
    if (it == runs.end()) return Outcome{false, "reference run missing"};
    return reproducibility(desk, it->second.log);
  });
  guarded(11, "model accounting", model_accounting);

  std::cout << (failed == 0 ? "all " + std::to_string(ran) + " criteria passed"
                           : std::to_string(failed) + " of " + std::to_string(ran) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
