#pragma once

#include <filesystem>
#include <string>

#include "mtd/model.hpp"

namespace mtd {

/// Checkpoint = JSON manifest (hyperparameters, relation specs, tensor names
/// and shapes) at `manifest` plus a sibling raw file of little-endian 64-bit
/// floats holding every tensor in declared order. `extra` is an optional JSON
/// object stored verbatim under "metadata".
void save_checkpoint(const std::filesystem::path& manifest, const Model& model, const std::string& extra = "{}");

Model load_checkpoint(const std::filesystem::path& manifest);

std::string model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(std::string_view text);

}  // namespace mtd
