#pragma once

// Self-describing parameter container:
//   "ILRCKPT1" | config length u32 | config text (key=value lines) |
//   tensor count u32 | per tensor: name length u32, name, rows u32, cols u32,
//   rows*cols float32
// All integers and floats are little-endian.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ilr/params.hpp"
#include "ilr/vocab.hpp"

namespace ilr {

using KeyValues = std::map<std::string, std::string>;

// Model config and vocabulary as key=value entries, and back.
KeyValues model_config_entries(const ModelConfig& config);
ModelConfig model_config_from(const KeyValues& kv);

struct NamedTensor {
  std::string name;
  Mat<float> value;
};

struct Container {
  KeyValues config;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

void save_container(const Container& c, const std::filesystem::path& path);
Container load_container(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_container(const Container& c);
Container decode_container(const std::vector<std::uint8_t>& bytes);

struct Checkpoint {
  ModelConfig model;
  Vocabulary vocab;
  KeyValues meta;  // run settings: mode, types, seed, ...
  ParamSet<float> params;
};

// Adds the params under their layout names with the given prefix.
void append_params(Container& c, const ParamSet<float>& params, const std::string& prefix = "");
// Reads every layout tensor (under prefix) and checks its shape.
ParamSet<float> extract_params(const Container& c, std::shared_ptr<const ParamLayout> layout,
                               const std::string& prefix = "");

Container to_container(const Checkpoint& ckpt);
Checkpoint from_container(const Container& c);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ilr
