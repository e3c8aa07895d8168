// Little-endian primitives for the GSAD/GSAM containers. All multi-byte
// values on disk are little-endian regardless of host byte order.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "gsae/errors.hpp"

namespace gsae {

inline void write_bytes(std::ostream& os, const void* data, std::size_t size) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!os) throw IoError("write failed after " + std::to_string(size) + " byte request");
}

inline void write_u8(std::ostream& os, std::uint8_t v) { write_bytes(os, &v, 1); }

inline void write_u32le(std::ostream& os, std::uint32_t v) {
  std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                       static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
  write_bytes(os, b, 4);
}

inline void write_f32le_array(std::ostream& os, const float* data, std::size_t count) {
  if (count == 0) return;
  if constexpr (std::endian::native == std::endian::little) {
    write_bytes(os, data, count * 4);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      write_u32le(os, std::bit_cast<std::uint32_t>(data[i]));
    }
  }
}

// Reads exactly `size` bytes; reports expected vs available on a short read.
inline void read_exact(std::istream& is, void* data, std::size_t size, const char* what) {
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  const auto got = static_cast<std::size_t>(is.gcount());
  if (got != size) {
    throw CorruptionError(std::string("truncated stream while reading ") + what + ": expected " +
                          std::to_string(size) + " bytes, got " + std::to_string(got));
  }
}

inline std::uint8_t read_u8(std::istream& is, const char* what) {
  std::uint8_t v = 0;
  read_exact(is, &v, 1, what);
  return v;
}

inline std::uint32_t read_u32le(std::istream& is, const char* what) {
  std::uint8_t b[4];
  read_exact(is, b, 4, what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void read_f32le_array(std::istream& is, float* data, std::size_t count, const char* what) {
  if (count == 0) return;
  if constexpr (std::endian::native == std::endian::little) {
    read_exact(is, data, count * 4, what);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      data[i] = std::bit_cast<float>(read_u32le(is, what));
    }
  }
}

}  // namespace gsae
