// SPDX-License-Identifier: Apache-2.0
#include "adamd/audio/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "adamd/binary_io.hpp"

namespace adamd::audio {

namespace {

std::string read_tag(std::istream &is, const char *what) {
  char tag[4];
  if (!is.read(tag, 4)) throw FormatError(std::string("truncated WAV while reading ") + what);
  return {tag, 4};
}

} // namespace

Waveform read_wav(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const std::string where = path.string() + ": ";
  if (read_tag(is, "RIFF tag") != "RIFF") throw FormatError(where + "not a RIFF file");
  read_le<std::uint32_t>(is, "RIFF size");
  if (read_tag(is, "WAVE tag") != "WAVE") throw FormatError(where + "not a WAVE file");

  bool have_fmt = false;
  Waveform w;
  while (true) {
    const std::string id = read_tag(is, "chunk id");
    const auto size = read_le<std::uint32_t>(is, "chunk size");
    if (id == "fmt ") {
      if (size < 16) throw FormatError(where + "fmt chunk too short");
      const auto format = read_le<std::uint16_t>(is, "audio format");
      const auto channels = read_le<std::uint16_t>(is, "channel count");
      const auto rate = read_le<std::uint32_t>(is, "sample rate");
      read_le<std::uint32_t>(is, "byte rate");
      read_le<std::uint16_t>(is, "block align");
      const auto bits = read_le<std::uint16_t>(is, "bits per sample");
      if (format != 1) throw FormatError(where + "not PCM (format " + std::to_string(format) + ")");
      if (channels != 1)
        throw FormatError(where + "expected mono, got " + std::to_string(channels) + " channels");
      if (bits != 16)
        throw FormatError(where + "expected 16-bit samples, got " + std::to_string(bits));
      if (rate == 0) throw FormatError(where + "zero sample rate");
      w.sample_rate = static_cast<int>(rate);
      is.ignore(size - 16 + (size & 1));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(where + "data chunk before fmt chunk");
      if (size % 2) throw FormatError(where + "odd data size for 16-bit samples");
      std::vector<std::int16_t> raw(size / 2);
      if (!is.read(reinterpret_cast<char *>(raw.data()), static_cast<std::streamsize>(size)))
        throw FormatError(where + "truncated sample data");
      w.samples.resize(raw.size());
      std::transform(raw.begin(), raw.end(), w.samples.begin(),
                     [](std::int16_t s) { return s / 32768.0; });
      return w;
    } else {
      is.ignore(size + (size & 1));
      if (!is) throw FormatError(where + "truncated chunk " + id);
    }
  }
}

void write_wav(const std::filesystem::path &path, const Waveform &w) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const auto bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  os.write("RIFF", 4);
  write_le<std::uint32_t>(os, 36 + bytes);
  os.write("WAVEfmt ", 8);
  write_le<std::uint32_t>(os, 16);
  write_le<std::uint16_t>(os, 1);
  write_le<std::uint16_t>(os, 1);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(w.sample_rate));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(w.sample_rate) * 2);
  write_le<std::uint16_t>(os, 2);
  write_le<std::uint16_t>(os, 16);
  os.write("data", 4);
  write_le<std::uint32_t>(os, bytes);
  for (double x : w.samples) {
    if (!std::isfinite(x)) throw std::invalid_argument("write_wav: non-finite sample");
    const double q = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
    write_le<std::int16_t>(os, static_cast<std::int16_t>(q));
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

} // namespace adamd::audio
