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

#include "commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "etnd/checkpoint.hpp"
#include "etnd/errors.hpp"
#include "etnd/plot.hpp"

namespace etnd::cli {

namespace fs = std::filesystem;

OutputLock::OutputLock(const fs::path& dir) : lock_(dir / ".lock") {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create output directory " + dir.string() + ": " + ec.message());
  const int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw IoFailure("output directory " + dir.string() + " is locked by another run (" +
                      lock_.string() + ")");
    }
    throw IoFailure("cannot create lock " + lock_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(lock_, ec);
}

const std::vector<Combination>& ablation_combinations() {
  static const std::vector<Combination> kCombos = {
      {"B", false, false, false},     {"ED", true, false, false},
      {"TD", false, true, false},     {"ND", false, false, true},
      {"ED+TD", true, true, false},   {"ED+ND", true, false, true},
      {"TD+ND", false, true, true},   {"ED+TD+ND", true, true, true},
  };
  return kCombos;
}

LossWeights combination_weights(const Combination& c, const LossWeights& full) {
  return {c.erase ? full.lambda1 : 0.0, c.transform ? full.lambda2 : 0.0,
          c.noise ? full.lambda3 : 0.0};
}

fs::path resolve_output_dir(const RunConfig& cfg, const std::string& command) {
  const fs::path dir = cfg.output_dir();
  return dir.empty() ? default_output_root() / command : dir;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw IoFailure("cannot write " + path.string());
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

fs::path prepare(RunConfig& cfg, const std::string& command) {
  const fs::path out = resolve_output_dir(cfg, command);
  cfg.set("output_dir", out.string());
  return out;
}

void check_compatible(const ReidModel& model, const DatasetIndex& data) {
  const int n = data.num_train_identities();
  if (n > 0 && n != model.config().num_classes) {
    throw DimensionMismatch("checkpoint was trained on " +
                            std::to_string(model.config().num_classes) +
                            " identities but the dataset has " + std::to_string(n));
  }
}

EvalSet eval_set_for(ReidModel& model, const DatasetIndex& data, const RunConfig& cfg) {
  EvalSet set = embed_eval_set(model, data);
  if (cfg.get("eval.query_as_gallery") == "true") {
    set.gallery = set.query;
    set.gallery_ids = set.query_ids;
    set.gallery_cams = set.query_cams;
  }
  return set;
}

void write_cmc_plot(const fs::path& path, const std::vector<const RankingResult*>& results) {
  std::vector<Series> series;
  for (std::size_t i = 0; i < results.size(); ++i) {
    series.push_back({results[i]->cmc, palette_color(i)});
  }
  write_png(path, plot_series(series));
}

std::string percent(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void cmd_train(RunConfig cfg, const std::optional<fs::path>& resume) {
  const fs::path out = prepare(cfg, "train");
  const TrainConfig tcfg = cfg.train();
  const DatasetIndex data = cfg.load_dataset();
  const ModelConfig mcfg = cfg.model(data.num_train_identities());
  OutputLock lock(out);
  cfg.write_echo(out / "config.txt");
  write_text(out / "identity_map.json", identity_map_json(data) + "\n");

  TrainState state = resume ? load_train_state(*resume, tcfg) : make_train_state(tcfg, mcfg);
  std::ofstream log(out / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  if (!log) throw IoFailure("cannot write " + (out / "train_log.jsonl").string());
  TrainHooks hooks;
  hooks.log = &log;
  hooks.checkpoint_dir = out / "checkpoints";
  hooks.checkpoint_every = cfg.checkpoint_every();
  const auto t0 = std::chrono::steady_clock::now();
  const auto metrics = train(state, data, tcfg, hooks);
  log.flush();
  if (!log) throw IoFailure("failed writing the training log");
  std::cout << "trained " << metrics.size() << " iterations in " << std::fixed
            << std::setprecision(1) << seconds_since(t0) << " s; checkpoint "
            << (out / "checkpoints" / "final.ckpt").string() << "\n";
}

void cmd_evaluate(RunConfig cfg, const fs::path& checkpoint) {
  const fs::path out = prepare(cfg, "evaluate");
  const EvalOptions opts = cfg.eval();
  const DatasetIndex data = cfg.load_dataset();
  ReidModel model = load_model(checkpoint);
  check_compatible(model, data);
  OutputLock lock(out);
  cfg.write_echo(out / "config.txt");
  const RankingResult r = evaluate(eval_set_for(model, data, cfg), opts);
  nlohmann::ordered_json j = to_json(r, opts);
  j["checkpoint"] = checkpoint.string();
  write_json(out / "result.json", j);
  write_cmc_plot(out / "cmc.png", {&r});
  std::cout << "rank1 " << percent(r.rank1()) << "  mAP " << percent(r.map) << "\n";
}

void cmd_attack(RunConfig cfg, const fs::path& checkpoint) {
  const fs::path out = prepare(cfg, "attack");
  const EvalOptions opts = cfg.eval();
  const AttackSpec spec = cfg.attack();
  const DatasetIndex data = cfg.load_dataset();
  ReidModel model = load_model(checkpoint);
  check_compatible(model, data);
  OutputLock lock(out);
  cfg.write_echo(out / "config.txt");

  const RankingResult clean = evaluate_model(model, data, opts);
  const RankingResult attacked = attack_eval(model, data, spec, opts);
  nlohmann::ordered_json cj = to_json(clean, opts);
  cj["checkpoint"] = checkpoint.string();
  nlohmann::ordered_json aj = to_json(attacked, opts);
  aj["checkpoint"] = checkpoint.string();
  aj["attack"] = spec.to_json();
  write_json(out / "clean_result.json", cj);
  write_json(out / "attack_result.json", aj);
  write_cmc_plot(out / "cmc.png", {&clean, &attacked});

  std::ostringstream table;
  table << "| setting | Rank-1 | mAP |\n|---|---|---|\n"
        << "| clean | " << percent(clean.rank1()) << " | " << percent(clean.map) << " |\n"
        << "| " << to_string(spec.kind) << " (" << to_string(spec.apply_to) << ") | "
        << percent(attacked.rank1()) << " | " << percent(attacked.map) << " |\n"
        << "| change | " << percent(attacked.rank1() - clean.rank1()) << " | "
        << percent(attacked.map - clean.map) << " |\n";
  write_text(out / "summary.md", table.str());
  std::cout << table.str();
}

void cmd_ablate(RunConfig cfg) {
  const fs::path out = prepare(cfg, "ablate");
  const TrainConfig base = cfg.train();
  const EvalOptions opts = cfg.eval();
  const auto seeds = cfg.ablate_seeds();
  const DatasetIndex data = cfg.load_dataset();
  const ModelConfig mcfg = cfg.model(data.num_train_identities());
  OutputLock lock(out);
  cfg.write_echo(out / "config.txt");

  const auto& combos = ablation_combinations();
  std::vector<double> sum_r1(combos.size()), sum_map(combos.size());
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  std::ostringstream csv;
  csv << "combination,seed,rank1,map\n";
  for (std::uint64_t seed : seeds) {
    for (std::size_t c = 0; c < combos.size(); ++c) {
      TrainConfig tcfg = base;
      tcfg.seed = seed;
      tcfg.loss_weights = combination_weights(combos[c], base.loss_weights);
      const auto t0 = std::chrono::steady_clock::now();
      TrainState state = make_train_state(tcfg, mcfg);
      train(state, data, tcfg);
      const RankingResult r = evaluate_model(*state.model, data, opts);
      sum_r1[c] += r.rank1();
      sum_map[c] += r.map;
      csv << combos[c].name << ',' << seed << ',' << r.rank1() << ',' << r.map << '\n';
      rows.push_back({{"combination", combos[c].name},
                      {"seed", seed},
                      {"rank1", r.rank1()},
                      {"map", r.map}});
      std::cout << std::left << std::setw(9) << combos[c].name << " seed " << seed << "  rank1 "
                << percent(r.rank1()) << "  mAP " << percent(r.map) << "  ("
                << std::setprecision(1) << std::fixed << seconds_since(t0) << " s)\n"
                << std::flush;
    }
  }
  nlohmann::ordered_json means = nlohmann::ordered_json::array();
  const double n = static_cast<double>(seeds.size());
  for (std::size_t c = 0; c < combos.size(); ++c) {
    csv << combos[c].name << ",mean," << sum_r1[c] / n << ',' << sum_map[c] / n << '\n';
    means.push_back({{"combination", combos[c].name},
                     {"rank1", sum_r1[c] / n},
                     {"map", sum_map[c] / n}});
  }
  write_text(out / "ablation.csv", csv.str());
  write_json(out / "ablation.json", {{"seeds", seeds}, {"rows", rows}, {"means", means}});
}

void cmd_heatmap(RunConfig cfg, const std::optional<fs::path>& checkpoint,
                 const std::vector<fs::path>& inputs) {
  const fs::path out = prepare(cfg, "heatmap");
  const HeatmapStat stat = parse_heatmap_stat(cfg.get("heatmap.stat"));
  const double alpha = std::stod(cfg.get("heatmap.alpha"));
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidConfig("heatmap.alpha: must lie in [0, 1]");
  std::vector<fs::path> files;
  for (const fs::path& p : inputs) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file()) found.push_back(e.path());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  if (files.empty()) throw InvalidConfig("heatmap: no input images");
  std::optional<ReidModel> model;
  if (checkpoint) {
    model.emplace(load_model(*checkpoint));
  } else {
    ModelConfig m = cfg.model(cfg.synth().num_identities);
    m.init_seed = cfg.seed();
    model.emplace(m);
  }
  OutputLock lock(out);
  cfg.write_echo(out / "config.txt");
  for (const fs::path& f : files) {
    export_heatmap(*model, read_image(f), out / (f.stem().string() + "_heatmap.png"), stat, alpha);
  }
  std::cout << "wrote " << files.size() << " heatmaps to " << out.string() << "\n";
}

void cmd_synth(RunConfig cfg) {
  const fs::path out = prepare(cfg, "synth");
  const SynthSpec spec = cfg.synth();
  OutputLock lock(out);
  cfg.write_echo(out / "config.txt");
  const DatasetIndex data = synth_generate(spec);
  write_directory(data, out);
  write_text(out / "identity_map.json", identity_map_json(data) + "\n");
  std::cout << "wrote " << data.records.size() << " images to " << out.string() << "\n";
}

}  // namespace etnd::cli
