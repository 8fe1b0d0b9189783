#pragma once

// Little-endian readers/writers shared by the checkpoint and embedding formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "scstory/error.hpp"

namespace scstory::io {

template <typename UInt>
void write_le(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i)
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

inline void write_f32(std::ostream& out, double value) {
  write_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

template <typename UInt>
UInt read_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw Error(Errc::TruncatedFile, std::string("while reading ") + what);
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<UInt>(bytes[i]) << (8 * i);
  return value;
}

inline float read_f32(std::istream& in, const char* what) {
  return std::bit_cast<float>(read_le<std::uint32_t>(in, what));
}

inline void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n))
    throw Error(Errc::TruncatedFile, std::string("while reading ") + what);
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4] = {};
  in.read(got, 4);
  if (in.gcount() != 4) throw Error(Errc::TruncatedFile, "while reading magic");
  if (std::memcmp(got, magic, 4) != 0)
    throw Error(Errc::BadMagic, std::string("expected \"") + magic + "\"");
}

}  // namespace scstory::io
