#pragma once

#include <bit>
#include <cstdint>
#include <iosfwd>
#include <istream>
#include <ostream>
#include <string>

#include "metseq/types.hpp"

namespace metseq {

// Little-endian 64-bit float payloads for model files, independent of host
// byte order.

inline void write_le_double(std::ostream& out, double value) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
  char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  }
  out.write(bytes, 8);
}

inline double read_le_double(std::istream& in) {
  char bytes[8];
  in.read(bytes, 8);
  if (!in) throw ParseError("unexpected end of payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i]))
            << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

inline void write_le_block(std::ostream& out, const double* data, Index n) {
  for (Index i = 0; i < n; ++i) write_le_double(out, data[i]);
}

inline void read_le_block(std::istream& in, double* data, Index n) {
  for (Index i = 0; i < n; ++i) data[i] = read_le_double(in);
}

/// Reads one header line; throws when the stream ends early.
std::string expect_line(std::istream& in, const std::string& context);

}  // namespace metseq
