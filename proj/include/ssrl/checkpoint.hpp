#pragma once

// Single-file checkpoint container: format-version tag, JSON configuration
// echo, and named little-endian float32 parameter arrays. Arrays are loadable
// by name so the audio encoder can be extracted on its own.

#include <nlohmann/json.hpp>

#include <map>
#include <string>

#include "ssrl/autodiff.hpp"
#include "ssrl/models.hpp"

namespace ssrl::checkpoint {

struct Checkpoint {
  nlohmann::json config;
  std::map<std::string, nn::Tensor> arrays;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  void put_component(models::Component& comp);
  // copies arrays into matching names; throws CheckpointError on any miss
  void load_component(models::Component& comp, const std::string& prefix) const;
};

nlohmann::json config_to_json(const models::ModelConfig& cfg);
models::ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace ssrl::checkpoint
