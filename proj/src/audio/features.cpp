// SPDX-License-Identifier: Apache-2.0
#include "adamd/audio/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/FFT>

#include "adamd/binary_io.hpp"

namespace adamd::audio {

void FeatureParams::validate(int sample_rate) const {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  if (!(hop_s > 0.0) || !(win_s >= hop_s))
    throw std::invalid_argument("feature params need win_s >= hop_s > 0");
  if (n_fft < 2 || n_fft % 2) throw std::invalid_argument("n_fft must be even and >= 2");
  if (n_mels == 0 || n_mels > n_fft / 2 + 1)
    throw std::invalid_argument("n_mels must be in [1, n_fft/2+1]");
  if (segment_len == 0) throw std::invalid_argument("segment_len must be positive");
  if (!(segment_step_fraction > 0.0 && segment_step_fraction <= 1.0))
    throw std::invalid_argument("segment_step_fraction must be in (0, 1]");
  if (hop_length(sample_rate) == 0) throw std::invalid_argument("hop shorter than one sample");
  if (win_length(sample_rate) > n_fft)
    throw std::invalid_argument("window of " + std::to_string(win_length(sample_rate)) +
                                " samples exceeds n_fft " + std::to_string(n_fft));
}

std::size_t FeatureParams::win_length(int sample_rate) const {
  return static_cast<std::size_t>(std::lround(win_s * sample_rate));
}

std::size_t FeatureParams::hop_length(int sample_rate) const {
  return static_cast<std::size_t>(std::lround(hop_s * sample_rate));
}

std::size_t FeatureParams::segment_step() const {
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(segment_step_fraction * segment_len)));
}

std::size_t frame_count(std::size_t samples, const FeatureParams &p, int sample_rate) {
  const std::size_t win = p.win_length(sample_rate), hop = p.hop_length(sample_rate);
  if (samples < win) return 0;
  return 1 + (samples - win) / hop;
}

RowMatrix stft_power(const Waveform &w, const FeatureParams &p) {
  p.validate(w.sample_rate);
  const std::size_t win = p.win_length(w.sample_rate), hop = p.hop_length(w.sample_rate);
  const std::size_t frames = frame_count(w.samples.size(), p, w.sample_rate);
  if (frames == 0)
    throw std::invalid_argument("stft_power: signal of " + std::to_string(w.samples.size()) +
                                " samples is shorter than one window (" +
                                std::to_string(win) + ")");
  const std::size_t bins = p.n_fft / 2 + 1;

  std::vector<double> window(win);
  for (std::size_t n = 0; n < win; ++n)
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / static_cast<double>(win));

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(p.n_fft, 0.0);
  std::vector<std::complex<double>> spectrum;
  RowMatrix power(frames, bins);
  for (std::size_t f = 0; f < frames; ++f) {
    const double *src = w.samples.data() + f * hop;
    for (std::size_t n = 0; n < win; ++n) frame[n] = src[n] * window[n];
    fft.fwd(spectrum, frame);
    for (std::size_t k = 0; k < bins; ++k) power(f, k) = std::norm(spectrum[k]);
  }
  return power;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

RowMatrix mel_matrix(const FeatureParams &p, int sample_rate) {
  p.validate(sample_rate);
  const std::size_t bins = p.n_fft / 2 + 1;
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edge(p.n_mels + 2);
  for (std::size_t i = 0; i < edge.size(); ++i)
    edge[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(p.n_mels + 1));

  RowMatrix m = RowMatrix::Zero(p.n_mels, bins);
  for (std::size_t j = 0; j < p.n_mels; ++j) {
    const double lo = edge[j], mid = edge[j + 1], hi = edge[j + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(p.n_fft);
      if (f > lo && f < hi) m(j, k) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
    }
  }
  return m;
}

RowMatrix fbank(const Waveform &w, const FeatureParams &p) {
  const RowMatrix power = stft_power(w, p);
  const RowMatrix mel = mel_matrix(p, w.sample_rate);
  RowMatrix out = power * mel.transpose();
  out = (out.array() + kLogFloor).log();
  return out;
}

FeatureMatrix normalize(const FeatureMatrix &segment) {
  FeatureMatrix out = segment;
  const std::size_t valid = std::min(segment.valid_frames, segment.frames());
  if (valid == 0 || segment.values.cols() == 0) return out;
  const auto rows = segment.values.topRows(static_cast<Eigen::Index>(valid));
  const double mean = rows.mean();
  const double var = (rows.array() - mean).square().mean();
  const double sigma = std::max(std::sqrt(var), kStdFloor);
  out.values = (segment.values.array() - mean) / sigma;
  return out;
}

RowMatrix pad_repeat_last(const RowMatrix &m, std::size_t frames) {
  if (m.rows() == 0) throw std::invalid_argument("pad_repeat_last: empty matrix");
  RowMatrix out(static_cast<Eigen::Index>(frames), m.cols());
  const Eigen::Index keep = std::min<Eigen::Index>(m.rows(), out.rows());
  out.topRows(keep) = m.topRows(keep);
  for (Eigen::Index r = keep; r < out.rows(); ++r) out.row(r) = m.row(m.rows() - 1);
  return out;
}

std::vector<FeatureMatrix> segment(const RowMatrix &feature, const RowMatrix &labels,
                                   const FeatureParams &p, SegmentMode mode) {
  const std::size_t len = static_cast<std::size_t>(feature.rows());
  if (len == 0) throw std::invalid_argument("segment: empty feature matrix");
  if (labels.rows() != feature.rows())
    throw std::invalid_argument("segment: " + std::to_string(labels.rows()) +
                                " label rows for " + std::to_string(len) + " frames");
  std::vector<FeatureMatrix> out;
  if (mode == SegmentMode::eval) {
    out.push_back({feature, labels, p.hop_s, 0.0, len});
    return out;
  }
  const std::size_t tau = p.segment_len, step = p.segment_step();
  std::size_t offset = 0;
  while (true) {
    const std::size_t valid = std::min(tau, len - offset);
    FeatureMatrix s;
    s.values = pad_repeat_last(feature.middleRows(offset, valid), tau);
    s.labels = pad_repeat_last(labels.middleRows(offset, valid), tau);
    s.hop_s = p.hop_s;
    s.origin_s = static_cast<double>(offset) * p.hop_s;
    s.valid_frames = valid;
    out.push_back(std::move(s));
    if (offset + tau >= len) break;
    offset += step;
  }
  return out;
}

RowMatrix frame_labels(std::size_t frames, const std::vector<LabeledSpan> &events,
                       std::size_t classes, const FeatureParams &p) {
  RowMatrix y = RowMatrix::Zero(static_cast<Eigen::Index>(frames),
                                static_cast<Eigen::Index>(classes));
  for (const auto &e : events) {
    if (e.class_index >= classes)
      throw std::invalid_argument("frame_labels: class index " + std::to_string(e.class_index) +
                                  " out of range");
    for (std::size_t i = 0; i < frames; ++i) {
      const double center = static_cast<double>(i) * p.hop_s + p.win_s / 2.0;
      if (center >= e.onset && center <= e.offset) y(i, e.class_index) = 1.0;
    }
  }
  return y;
}

void write_feature_cache(const std::filesystem::path &path, const RowMatrix &m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write("ADFC", 4);
  write_le<std::uint32_t>(os, 1);
  write_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
  write_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
  os.write(reinterpret_cast<const char *>(m.data()),
           static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

RowMatrix read_feature_cache(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "ADFC")
    throw FormatError(path.string() + ": not a feature cache");
  if (read_le<std::uint32_t>(is, "version") != 1)
    throw FormatError(path.string() + ": unsupported feature cache version");
  const auto rows = read_le<std::uint64_t>(is, "rows");
  const auto cols = read_le<std::uint64_t>(is, "cols");
  if (rows > (1u << 24) || cols > (1u << 16))
    throw FormatError(path.string() + ": implausible feature cache shape");
  RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (m.size() && !is.read(reinterpret_cast<char *>(m.data()),
                           static_cast<std::streamsize>(m.size() * sizeof(double))))
    throw FormatError(path.string() + ": truncated feature cache");
  return m;
}

} // namespace adamd::audio
