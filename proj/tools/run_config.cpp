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

#include "run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "etnd/errors.hpp"

namespace etnd::cli {

namespace {

const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> kDefaults = {
      {"seed", "0"},
      {"output_dir", ""},
      {"data.source", "synth"},
      {"data.root", ""},
      {"data.image_h", "64"},
      {"data.image_w", "32"},
      {"synth.num_identities", "50"},
      {"synth.num_test_identities", "50"},
      {"synth.train_images_per_identity", "12"},
      {"synth.query_images_per_identity", "6"},
      {"synth.gallery_images_per_identity", "4"},
      {"synth.image_h", "64"},
      {"synth.image_w", "32"},
      {"synth.occlusion_probability", "1"},
      {"synth.occluder_area_min", "0.2"},
      {"synth.occluder_area_max", "0.4"},
      {"synth.occluder_style", "textured"},
      {"synth.seed", "0"},
      {"model.backbone", "desk"},
      {"model.desk_widths", "16,32,64,64"},
      {"model.desk_strides", "2,2,2,1"},
      {"model.pooling", "avg"},
      {"train.epochs", "30"},
      {"train.base_lr", "0.01"},
      {"train.lr_decay_factor", "0.1"},
      {"train.lr_decay_epochs", "20,27"},
      {"train.batch_p", "8"},
      {"train.batch_k", "8"},
      {"train.lambda1", "0.1"},
      {"train.lambda2", "0.15"},
      {"train.lambda3", "0.1"},
      {"train.epsilon", "0.1"},
      {"train.game_mode", "full"},
      {"train.transform_mode", "copy"},
      {"train.forward_mode", "shared_forward"},
      {"train.flip_probability", "0.5"},
      {"train.pad", "10"},
      {"train.erase_probability", "0.5"},
      {"train.checkpoint_every", "0"},
      {"perturb.area_min", "0.02"},
      {"perturb.area_max", "0.4"},
      {"perturb.aspect_min", "0.3"},
      {"perturb.aspect_max", "3.3333333333333335"},
      {"perturb.fixed_mode", "false"},
      {"perturb.fixed_area", "0.3"},
      {"perturb.fixed_aspect", "0.3"},
      {"perturb.max_rejection_attempts", "100"},
      {"eval.metric", "euclidean"},
      {"eval.max_rank", "50"},
      {"eval.cross_camera_filter", "true"},
      {"eval.l2_normalize", "true"},
      {"eval.query_as_gallery", "false"},
      {"attack.kind", "feature_erase"},
      {"attack.apply_to", "both"},
      {"attack.seed", "0"},
      {"attack.area_min", "0.02"},
      {"attack.area_max", "0.4"},
      {"attack.aspect_min", "0.3"},
      {"attack.aspect_max", "3.3333333333333335"},
      {"attack.fixed_mode", "false"},
      {"attack.fixed_area", "0.3"},
      {"attack.fixed_aspect", "0.3"},
      {"attack.max_rejection_attempts", "100"},
      {"ablate.seeds", "0,1,2"},
      {"heatmap.stat", "mean"},
      {"heatmap.alpha", "0.5"},
  };
  return kDefaults;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw InvalidConfig(key + ": expected " + expected + ", got '" + value + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& value, const char* expected) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) bad_value(key, value, expected);
  return out;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidConfig(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw InvalidConfig("unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw InvalidConfig("override '" + assignment + "' is not of the form key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw InvalidConfig("unknown config key '" + key + "'");
  return it->second;
}

void RunConfig::apply_mode(const std::string& mode) {
  if (mode == "baseline") {
    for (const char* k : {"train.lambda1", "train.lambda2", "train.lambda3"}) set(k, "0");
  } else if (mode == "etnd") {
    for (const auto& [k, v] : defaults())
      if (k.starts_with("train.lambda")) set(k, v);
  } else {
    throw InvalidConfig("mode must be one of {baseline, etnd}, got '" + mode + "'");
  }
}

std::string RunConfig::echo() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
  return out.str();
}

void RunConfig::write_echo(const std::filesystem::path& path) const {
  std::ofstream out(path);
  out << echo();
  if (!out) throw IoFailure("cannot write " + path.string());
}

int RunConfig::get_int(const std::string& key) const {
  return parse_number<int>(key, get(key), "an integer");
}

double RunConfig::get_double(const std::string& key) const {
  return parse_number<double>(key, get(key), "a number");
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  return parse_number<std::uint64_t>(key, get(key), "a non-negative integer");
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::vector<int> RunConfig::get_ints(const std::string& key) const {
  std::vector<int> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<int>(key, item, "a comma-separated integer list"));
  }
  return out;
}

std::uint64_t RunConfig::seed() const { return get_u64("seed"); }

std::filesystem::path RunConfig::output_dir() const { return get("output_dir"); }

ModelConfig RunConfig::model(int num_classes) const {
  ModelConfig m;
  try {
    m.preset = parse_backbone(get("model.backbone"));
    m.pooling = parse_pooling(get("model.pooling"));
  } catch (const InvalidConfig& e) {
    throw InvalidConfig(std::string("model: ") + e.what());
  }
  m.desk_widths = get_ints("model.desk_widths");
  m.desk_strides = get_ints("model.desk_strides");
  const bool synth = get("data.source") == "synth";
  m.image_h = get_int(synth ? "synth.image_h" : "data.image_h");
  m.image_w = get_int(synth ? "synth.image_w" : "data.image_w");
  m.num_classes = num_classes;
  m.validate();
  return m;
}

PerturbationConfig RunConfig::perturbation(const std::string& prefix) const {
  PerturbationConfig p;
  p.area_min = get_double(prefix + "area_min");
  p.area_max = get_double(prefix + "area_max");
  p.aspect_min = get_double(prefix + "aspect_min");
  p.aspect_max = get_double(prefix + "aspect_max");
  p.fixed_mode = get_bool(prefix + "fixed_mode");
  p.fixed_area = get_double(prefix + "fixed_area");
  p.fixed_aspect = get_double(prefix + "fixed_aspect");
  p.max_rejection_attempts = get_int(prefix + "max_rejection_attempts");
  try {
    p.validate();
  } catch (const InvalidConfig& e) {
    throw InvalidConfig(prefix + e.what());
  }
  return p;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.epochs = get_int("train.epochs");
  t.base_lr = get_double("train.base_lr");
  t.lr_decay_factor = get_double("train.lr_decay_factor");
  t.lr_decay_epochs = get_ints("train.lr_decay_epochs");
  t.batch_p = get_int("train.batch_p");
  t.batch_k = get_int("train.batch_k");
  t.loss_weights = {get_double("train.lambda1"), get_double("train.lambda2"),
                    get_double("train.lambda3")};
  t.epsilon = get_double("train.epsilon");
  t.perturbation = perturbation("perturb.");
  t.seed = seed();
  t.game_mode = parse_game_mode(get("train.game_mode"));
  t.transform_mode = parse_transform_mode(get("train.transform_mode"));
  t.forward_mode = parse_forward_mode(get("train.forward_mode"));
  t.augment.flip_probability = get_double("train.flip_probability");
  t.augment.pad = get_int("train.pad");
  t.augment.erase_probability = get_double("train.erase_probability");
  try {
    t.validate();
  } catch (const InvalidConfig& e) {
    throw InvalidConfig(std::string("train.") + e.what());
  }
  return t;
}

int RunConfig::checkpoint_every() const { return get_int("train.checkpoint_every"); }

EvalOptions RunConfig::eval() const {
  EvalOptions o;
  o.metric = parse_metric(get("eval.metric"));
  o.max_rank = get_int("eval.max_rank");
  if (o.max_rank < 1) bad_value("eval.max_rank", get("eval.max_rank"), "a positive integer");
  o.cross_camera_filter = get_bool("eval.cross_camera_filter");
  o.l2_normalize = get_bool("eval.l2_normalize");
  return o;
}

AttackSpec RunConfig::attack() const {
  AttackSpec a;
  a.kind = parse_attack_kind(get("attack.kind"));
  a.apply_to = parse_attack_target(get("attack.apply_to"));
  a.seed = get_u64("attack.seed");
  a.perturbation = perturbation("attack.");
  return a;
}

SynthSpec RunConfig::synth() const {
  SynthSpec s;
  s.num_identities = get_int("synth.num_identities");
  s.num_test_identities = get_int("synth.num_test_identities");
  s.train_images_per_identity = get_int("synth.train_images_per_identity");
  s.query_images_per_identity = get_int("synth.query_images_per_identity");
  s.gallery_images_per_identity = get_int("synth.gallery_images_per_identity");
  s.image_h = get_int("synth.image_h");
  s.image_w = get_int("synth.image_w");
  s.occlusion_probability = get_double("synth.occlusion_probability");
  s.occluder_area_min = get_double("synth.occluder_area_min");
  s.occluder_area_max = get_double("synth.occluder_area_max");
  s.occluder_style = parse_occluder_style(get("synth.occluder_style"));
  s.seed = get_u64("synth.seed");
  try {
    s.validate();
  } catch (const InvalidConfig& e) {
    throw InvalidConfig(std::string("synth.") + e.what());
  }
  return s;
}

std::vector<std::uint64_t> RunConfig::ablate_seeds() const {
  std::vector<std::uint64_t> out;
  for (int s : get_ints("ablate.seeds")) {
    if (s < 0) bad_value("ablate.seeds", get("ablate.seeds"), "non-negative seeds");
    out.push_back(static_cast<std::uint64_t>(s));
  }
  if (out.empty()) bad_value("ablate.seeds", get("ablate.seeds"), "at least one seed");
  return out;
}

DatasetIndex RunConfig::load_dataset() const {
  const std::string& source = get("data.source");
  if (source == "synth") return synth_generate(synth());
  if (source == "directory") {
    if (get("data.root").empty()) throw InvalidConfig("data.root: required when data.source = directory");
    return load_directory(get("data.root"), get_int("data.image_h"), get_int("data.image_w"));
  }
  bad_value("data.source", source, "one of {synth, directory}");
}

std::filesystem::path default_output_root() {
  if (const char* env = std::getenv("ETND_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

}  // namespace etnd::cli
