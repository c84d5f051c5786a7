#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "maskanim/config.hpp"
#include "maskanim/networks.hpp"
#include "maskanim/optimizer.hpp"

namespace maskanim {

struct CheckpointInfo {
  /// Completed epochs.
  int epoch = 0;
  std::int64_t global_step = 0;
  /// Serialized random streams by role.
  std::map<std::string, std::string> rng_states;
};

/// Writes weights and buffers of all four networks, the optimizer state (if
/// given), the full resolved configuration and its structural fingerprint.
void save_checkpoint(const std::filesystem::path& path, ModelBundle& models,
                     const Adam* optimizer, const PipelineConfig& config,
                     const CheckpointInfo& info);

struct LoadedCheckpoint {
  PipelineConfig config;
  ModelBundle models;
  Adam optimizer;
  CheckpointInfo info;
};

/// Rebuilds the bundle from the stored configuration and restores every
/// tensor. When `expected` is given its fingerprint must match the stored one
/// (ConfigError otherwise). Missing or mis-shaped tensors raise IoError.
[[nodiscard]] LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                               const PipelineConfig* expected = nullptr);

}  // namespace maskanim
