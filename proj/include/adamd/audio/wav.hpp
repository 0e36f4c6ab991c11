// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

namespace adamd::audio {

struct Waveform {
  std::vector<double> samples; // nominally in [-1, 1]
  int sample_rate = 16000;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// 16-bit PCM mono, little-endian RIFF/WAVE. Samples are scaled by 1/32768.
/// Throws adamd::FormatError for anything else or a truncated file.
Waveform read_wav(const std::filesystem::path &path);

/// Quantizes to 16-bit PCM: round(x * 32768), saturated to [-32768, 32767].
void write_wav(const std::filesystem::path &path, const Waveform &w);

} // namespace adamd::audio
