// SPDX-License-Identifier: Apache-2.0
#include "adamd/model/config.hpp"

#include <stdexcept>
#include <string>

namespace adamd::model {

void HourglassConfig::validate() const {
  if (depth < 2) throw std::invalid_argument("hourglass depth must be >= 2");
  if (channels < 2 || channels % 2)
    throw std::invalid_argument("hourglass channels must be even and >= 2");
  if (kernel % 2 == 0) throw std::invalid_argument("hourglass kernel must be odd");
  const std::size_t m = std::size_t{1} << (depth - 1);
  if (frames == 0 || frames % m || mels == 0 || mels % m)
    throw std::invalid_argument("input shape (" + std::to_string(frames) + "," +
                                std::to_string(mels) + ") not divisible by " +
                                std::to_string(m));
}

void ModelConfig::validate() const {
  hourglass.validate();
  const std::size_t K = hourglass.depth;
  if (branch.hidden_dims.size() != K)
    throw std::invalid_argument("branch hidden dims must list one entry per scale");
  if (!branch.input_dims.empty()) {
    if (branch.input_dims.size() != K)
      throw std::invalid_argument("branch input dims must list one entry per scale");
    for (std::size_t k = 1; k <= K; ++k)
      if (branch.input_dims[k - 1] != mels_at(k))
        throw std::invalid_argument("branch input dim for scale " + std::to_string(k) +
                                    " must be " + std::to_string(mels_at(k)));
  }
  for (std::size_t h : branch.hidden_dims)
    if (h == 0) throw std::invalid_argument("branch hidden dims must be positive");
  if (branch.gru_layers == 0) throw std::invalid_argument("gru layers must be >= 1");
  if (branch.classes == 0) throw std::invalid_argument("classes must be >= 1");
  if (branch.conv_kernel % 2 == 0)
    throw std::invalid_argument("branch conv kernel must be odd");
}

std::size_t ModelConfig::frames_at(std::size_t scale, std::size_t frames) const {
  return frames / upsample_factor(scale);
}

std::size_t ModelConfig::mels_at(std::size_t scale) const {
  return hourglass.mels / upsample_factor(scale);
}

std::size_t ModelConfig::upsample_factor(std::size_t scale) const {
  if (scale < 1 || scale > hourglass.depth)
    throw std::out_of_range("scale " + std::to_string(scale) + " out of range");
  return std::size_t{1} << (hourglass.depth - scale);
}

std::size_t ModelConfig::frame_multiple() const {
  return std::size_t{1} << (hourglass.depth - 1);
}

} // namespace adamd::model
