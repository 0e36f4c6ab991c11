// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "adamd/binary_io.hpp"
#include "adamd/model/model.hpp"

namespace adamd::model {

// Checkpoint layout, little-endian:
//   "ADMD"                      4 bytes magic
//   u32 version                 currently 1
//   u32 len, bytes              model config as key=value lines
//   u32 K, f64[K], f64[K]       fusion weights, validation accuracies (K may be 0)
//   u32 count                   number of parameter tensors, then per tensor:
//     u32 len, bytes            name
//     u32 rank, u64[rank]       shape
//     f64[numel]                row-major values

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointExtras {
  std::vector<double> fusion_weights;
  std::vector<double> validation_accuracy;
};

struct LoadedCheckpoint {
  AdamdModel model;
  CheckpointExtras extras;
};

std::string to_text(const ModelConfig &config);
ModelConfig model_config_from_text(const std::string &text);

void save_checkpoint(const std::filesystem::path &path, const AdamdModel &model,
                     const CheckpointExtras &extras = {});

/// Reads the whole file before building the model, so a corrupt file never
/// yields a partially populated one. With `expected`, a differing stored
/// config is rejected.
LoadedCheckpoint load_checkpoint(const std::filesystem::path &path,
                                 const ModelConfig *expected = nullptr);

} // namespace adamd::model
