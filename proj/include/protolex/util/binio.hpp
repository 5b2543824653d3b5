// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_UTIL_BINIO_HPP_
#define PROTOLEX_UTIL_BINIO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "protolex/util/errors.hpp"

// Little-endian binary primitives for the feature-store and checkpoint
// container formats. Byte order is made explicit so the on-disk layout does
// not depend on the host.

namespace protolex::binio {

inline void WriteU32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void WriteU64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void WriteF32(std::ostream& os, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  WriteU32(os, v);
}

inline void WriteF64(std::ostream& os, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  WriteU64(os, v);
}

inline void WriteString(std::ostream& os, const std::string& s) {
  WriteU32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void WriteF32Array(std::ostream& os, const float* data, size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data),
             static_cast<std::streamsize>(n * 4));
  } else {
    for (size_t i = 0; i < n; ++i) WriteF32(os, data[i]);
  }
}

inline void ReadExact(std::istream& is, void* dst, size_t n,
                      const char* what) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n)
    fail(err::kCorruptPayload, "truncated payload while reading ", what);
}

inline uint32_t ReadU32(std::istream& is, const char* what = "u32") {
  unsigned char b[4];
  ReadExact(is, b, 4, what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

inline uint64_t ReadU64(std::istream& is, const char* what = "u64") {
  unsigned char b[8];
  ReadExact(is, b, 8, what);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline float ReadF32(std::istream& is, const char* what = "f32") {
  uint32_t v = ReadU32(is, what);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

inline double ReadF64(std::istream& is, const char* what = "f64") {
  uint64_t v = ReadU64(is, what);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

inline std::string ReadString(std::istream& is, const char* what = "string",
                              uint32_t max_len = 1u << 20) {
  uint32_t n = ReadU32(is, what);
  if (n > max_len) fail(err::kCorruptPayload, "oversized string in ", what);
  std::string s(n, '\0');
  if (n) ReadExact(is, s.data(), n, what);
  return s;
}

inline void ReadF32Array(std::istream& is, float* data, size_t n,
                         const char* what = "f32 array") {
  if constexpr (std::endian::native == std::endian::little) {
    ReadExact(is, data, n * 4, what);
  } else {
    for (size_t i = 0; i < n; ++i) data[i] = ReadF32(is, what);
  }
}

}  // namespace protolex::binio

#endif  // PROTOLEX_UTIL_BINIO_HPP_
