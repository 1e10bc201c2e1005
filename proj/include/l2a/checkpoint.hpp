// SPDX-License-Identifier: Apache-2.0
//
// Versioned binary checkpoint: magic + version + JSON config blob + named
// parameter arrays (float64). Round-trips bit-exact.
#pragma once

#include <string>

#include <json.hpp>

#include "l2a/model.hpp"
#include "l2a/tensor.hpp"

namespace l2a {

struct Checkpoint {
  nlohmann::json config;
  ParameterStore params;
};

void save_checkpoint(const std::string& path, const nlohmann::json& config,
                     const ParameterStore& params);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace l2a
