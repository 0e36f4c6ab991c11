// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace adamd {

/// Malformed, truncated, or mismatched file contents.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

static_assert(std::endian::native == std::endian::little,
              "binary formats are written little-endian; add byte swapping");

template <typename T>
  requires std::is_arithmetic_v<T>
void write_le(std::ostream &os, T value) {
  os.write(reinterpret_cast<const char *>(&value), sizeof(T));
}

template <typename T>
  requires std::is_arithmetic_v<T>
T read_le(std::istream &is, const char *what) {
  T value{};
  if (!is.read(reinterpret_cast<char *>(&value), sizeof(T)))
    throw FormatError(std::string("truncated file while reading ") + what);
  return value;
}

inline void write_string(std::ostream &os, const std::string &s) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream &is, const char *what,
                               std::uint32_t max_len = 1u << 20) {
  const auto n = read_le<std::uint32_t>(is, what);
  if (n > max_len) throw FormatError(std::string("implausible length for ") + what);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n))
    throw FormatError(std::string("truncated file while reading ") + what);
  return s;
}

} // namespace adamd
