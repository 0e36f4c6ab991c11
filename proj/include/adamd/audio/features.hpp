// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "adamd/audio/wav.hpp"
#include "adamd/numerics/eigen_maps.hpp"

namespace adamd::audio {

using num::RowMatrix;

struct FeatureParams {
  double win_s = 0.04;
  double hop_s = 0.02;
  std::size_t n_fft = 2048;
  std::size_t n_mels = 128;
  std::size_t segment_len = 512;      // tau
  double segment_step_fraction = 0.5; // step = round(fraction * tau)

  /// Throws std::invalid_argument on inconsistent values, including a window
  /// longer than n_fft at this sample rate.
  void validate(int sample_rate) const;
  std::size_t win_length(int sample_rate) const;
  std::size_t hop_length(int sample_rate) const;
  std::size_t segment_step() const;
};

inline constexpr double kLogFloor = 1e-10;
inline constexpr double kStdFloor = 1e-8;

/// Frames x (n_fft/2 + 1) power spectrogram of Hann-windowed frames,
/// frame count 1 + floor((len - win) / hop).
RowMatrix stft_power(const Waveform &w, const FeatureParams &p);

/// Frame count stft_power would produce; 0 when the signal is too short.
std::size_t frame_count(std::size_t samples, const FeatureParams &p, int sample_rate);

/// n_mels x (n_fft/2 + 1) triangular filters, centers equally spaced on the
/// HTK mel scale from 0 Hz to sample_rate / 2, unit peak.
RowMatrix mel_matrix(const FeatureParams &p, int sample_rate);

/// Mel frequency of `hz` and its inverse.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// log(mel_matrix * power + 1e-10): frames x n_mels.
RowMatrix fbank(const Waveform &w, const FeatureParams &p);

/// A tau x d feature window with aligned per-frame labels. Rows at and after
/// `valid_frames` are padding (copies of the last real frame).
struct FeatureMatrix {
  RowMatrix values;
  RowMatrix labels; // frames x classes, entries 0/1
  double hop_s = 0.02;
  double origin_s = 0.0;
  std::size_t valid_frames = 0;

  std::size_t frames() const { return static_cast<std::size_t>(values.rows()); }
};

/// z-scores every cell with mean and standard deviation taken over the
/// valid rows only; sigma is floored at 1e-8.
FeatureMatrix normalize(const FeatureMatrix &segment);

enum class SegmentMode { train, eval };

/// Train mode: windows of tau frames at offsets 0, step, 2*step, ... until a
/// window reaches the end; a short final window is padded by repeating the
/// last frame. Eval mode: the whole file as one segment.
std::vector<FeatureMatrix> segment(const RowMatrix &feature, const RowMatrix &labels,
                                   const FeatureParams &p, SegmentMode mode);

/// Rows [0, rows) extended to `frames` rows by repeating the last row.
RowMatrix pad_repeat_last(const RowMatrix &m, std::size_t frames);

struct LabeledSpan {
  double onset = 0.0;
  double offset = 0.0;
  std::size_t class_index = 0;
};

/// Frame i is active for an event when its center i*hop + win/2 lies in
/// [onset, offset].
RowMatrix frame_labels(std::size_t frames, const std::vector<LabeledSpan> &events,
                       std::size_t classes, const FeatureParams &p);

// Feature cache layout, little-endian: "ADFC", u32 version (1), u64 rows,
// u64 cols, f64[rows * cols] row-major.
void write_feature_cache(const std::filesystem::path &path, const RowMatrix &m);
RowMatrix read_feature_cache(const std::filesystem::path &path);

} // namespace adamd::audio
