#pragma once

// Little-endian primitives shared by the binary formats.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "dsg/error.hpp"

namespace dsg::detail {

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const std::string& what) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T)))
    throw FormatError(what + ": unexpected end of file");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

inline void put_f32(std::ostream& os, double value) {
  put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

inline double get_f32(std::istream& is, const std::string& what) {
  return static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(is, what)));
}

}  // namespace dsg::detail
