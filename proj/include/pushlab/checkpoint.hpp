#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "pushlab/models.hpp"
#include "pushlab/nn.hpp"

namespace pushlab::model {

// Checkpoint file: magic, little-endian u32 JSON header length, JSON header
// (model kind, layer shapes, codec statistics, nominal engine belief, training
// config echo, caller extras), then the flat parameter vector as raw
// little-endian doubles. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const nn::TrainConfig& train_echo,
                     const nlohmann::json& extra = nlohmann::json::object());

// Validates magic/shape/finiteness; a checkpoint always restores the kind it
// was saved with. `meta`, when given, receives the full JSON header.
ModelParams load_checkpoint(const std::string& path, nlohmann::json* meta = nullptr);

}  // namespace pushlab::model
