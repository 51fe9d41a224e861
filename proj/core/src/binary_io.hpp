#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "cts/error.hpp"

// Explicit little-endian encoding for the binary artifact formats.
namespace cts::detail {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <class T>
T byteswap_if_big(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&value, b, sizeof(T));
  }
  return value;
}

template <class T>
void write_le(std::ostream& out, T value) {
  value = byteswap_if_big(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_le(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
    throw FormatError(std::string("truncated file while reading ") + what);
  return byteswap_if_big(value);
}

inline void write_floats(std::ostream& out, const float* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(n * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < n; ++i) write_le(out, data[i]);
  }
}

inline void read_floats(std::istream& in, float* data, std::size_t n, const char* what) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(n * sizeof(float)))
      throw FormatError(std::string("truncated file while reading ") + what);
  } else {
    for (std::size_t i = 0; i < n; ++i) data[i] = read_le<float>(in, what);
  }
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4] = {};
  in.read(got, 4);
  if (in.gcount() != 4 || std::memcmp(got, magic, 4) != 0)
    throw FormatError(std::string("bad magic: expected '") + magic + "'");
}

}  // namespace cts::detail
