// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

namespace adamd::model {

struct HourglassConfig {
  std::size_t depth = 4;     // K: number of resolutions / branches
  std::size_t channels = 32; // N, constant across levels
  std::size_t kernel = 3;    // spatial extent of the residual 3x3 stage
  std::size_t frames = 512;  // tau
  std::size_t mels = 128;    // d

  /// Throws std::invalid_argument when frames or mels are not divisible by
  /// 2^(depth-1), or depth < 2.
  void validate() const;
  bool operator==(const HourglassConfig &) const = default;
};

struct BranchConfig {
  // Scale k (1 = coarsest) reads feature vectors of size mels / 2^(K-k).
  // Left empty the dims are derived; when set they must agree.
  std::vector<std::size_t> input_dims;
  std::vector<std::size_t> hidden_dims{32, 32, 64, 64};
  std::size_t gru_layers = 3;
  std::size_t classes = 1;
  std::size_t conv_kernel = 3;

  bool operator==(const BranchConfig &) const = default;
};

struct ModelConfig {
  HourglassConfig hourglass;
  BranchConfig branch;

  void validate() const;
  std::size_t scales() const { return hourglass.depth; }
  /// Temporal length of the map feeding scale k (1-based).
  std::size_t frames_at(std::size_t scale, std::size_t frames) const;
  std::size_t mels_at(std::size_t scale) const;
  std::size_t upsample_factor(std::size_t scale) const;
  /// Frame counts must be multiples of this.
  std::size_t frame_multiple() const;

  bool operator==(const ModelConfig &) const = default;
};

} // namespace adamd::model
