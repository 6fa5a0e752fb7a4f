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

#include "etnd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "etnd/errors.hpp"

namespace etnd {

namespace {

constexpr char kMagic[8] = {'E', 'T', 'N', 'D', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

}  // namespace

void write_checkpoint(const std::filesystem::path& path, nlohmann::ordered_json meta,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  meta["format_version"] = kCheckpointFormat;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    const auto& s = t->shape();
    list.push_back({{"name", name}, {"shape", {s[0], s[1], s[2], s[3]}}, {"offset", offset}});
    offset += t->size();
  }
  meta["tensors"] = std::move(list);
  const std::string header = meta.dump();

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + tmp.string() + " for writing");
    const std::uint64_t len = header.size();
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& [name, t] : tensors) {
      out.write(reinterpret_cast<const char*>(t->data()),
                static_cast<std::streamsize>(t->size() * sizeof(Real)));
    }
    if (!out) throw IoFailure("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointContents read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint file");
  }
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  CheckpointContents c;
  try {
    c.meta = nlohmann::ordered_json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }
  if (c.meta.value("format_version", std::string()) != kCheckpointFormat) {
    throw CheckpointError("unsupported checkpoint format in " + path.string());
  }
  const auto payload = in.tellg();
  for (const auto& entry : c.meta.at("tensors")) {
    const auto shape = entry.at("shape").get<std::vector<int>>();
    Tensor t(Tensor::Shape{shape.at(0), shape.at(1), shape.at(2), shape.at(3)});
    const auto offset = entry.at("offset").get<std::uint64_t>();
    in.seekg(payload + static_cast<std::streamoff>(offset * sizeof(Real)));
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(Real)));
    if (!in) throw CheckpointError("truncated checkpoint " + path.string());
    c.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  return c;
}

nlohmann::ordered_json model_config_json(const ModelConfig& cfg) {
  return {{"backbone", std::string(to_string(cfg.preset))},
          {"image_h", cfg.image_h},
          {"image_w", cfg.image_w},
          {"desk_widths", cfg.desk_widths},
          {"desk_strides", cfg.desk_strides},
          {"num_classes", cfg.num_classes},
          {"pooling", std::string(to_string(cfg.pooling))},
          {"init_seed", cfg.init_seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  try {
    cfg.preset = parse_backbone(j.at("backbone").get<std::string>());
    cfg.image_h = j.at("image_h").get<int>();
    cfg.image_w = j.at("image_w").get<int>();
    cfg.desk_widths = j.at("desk_widths").get<std::vector<int>>();
    cfg.desk_strides = j.at("desk_strides").get<std::vector<int>>();
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.pooling = parse_pooling(j.at("pooling").get<std::string>());
    cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad model config in checkpoint: ") + e.what());
  }
  return cfg;
}

void load_model_state(ReidModel& model, const std::map<std::string, Tensor>& tensors) {
  for (auto& [name, dst] : model.state()) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw CheckpointError("checkpoint lacks tensor " + name);
    if (!it->second.same_shape(*dst)) {
      throw CheckpointError("shape mismatch for " + name + ": checkpoint " +
                            shape_string(it->second.shape()) + " vs model " +
                            shape_string(dst->shape()));
    }
    *dst = it->second;
  }
}

void save_model(const std::filesystem::path& path, ReidModel& model, nlohmann::ordered_json extra) {
  nlohmann::ordered_json meta = std::move(extra);
  meta["model"] = model_config_json(model.config());
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (auto& [name, t] : model.state()) tensors.emplace_back(name, t);
  write_checkpoint(path, std::move(meta), tensors);
}

ReidModel load_model(const std::filesystem::path& path) {
  const CheckpointContents c = read_checkpoint(path);
  ReidModel model(model_config_from_json(c.meta.at("model")));
  load_model_state(model, c.tensors);
  return model;
}

}  // namespace etnd
