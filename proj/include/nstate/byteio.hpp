#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "nstate/errors.hpp"

namespace nstate::byteio {

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32_le(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError(what + ": truncated header");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

inline void write_f32_le(std::ostream& os, std::span<const float> v) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(float)));
  } else {
    for (float f : v) write_u32_le(os, std::bit_cast<std::uint32_t>(f));
  }
}

// Reads exactly v.size() floats; returns false on short read.
inline bool read_f32_le(std::istream& is, std::span<float> v) {
  if (!is.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(float))))
    return false;
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& f : v) {
      auto u = std::bit_cast<std::uint32_t>(f);
      u = ((u & 0xff) << 24) | ((u & 0xff00) << 8) | ((u >> 8) & 0xff00) | (u >> 24);
      f = std::bit_cast<float>(u);
    }
  }
  return true;
}

}  // namespace nstate::byteio
