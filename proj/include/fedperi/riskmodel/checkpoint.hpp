#pragma once

#include <string>

#include "fedperi/riskmodel/config.hpp"
#include "fedperi/riskmodel/params.hpp"

namespace fedperi::riskmodel {

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

// Layout: "FPSM", u32 version, u64 P, u64 config-JSON length, config JSON,
// then P little-endian doubles in canonical flat order.
void save_checkpoint(const ModelConfig& config, const ModelParams& params, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fedperi::riskmodel
