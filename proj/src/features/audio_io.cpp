// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/features/audio_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "protolex/util/binio.hpp"
#include "protolex/util/errors.hpp"

namespace protolex::features {

namespace {

uint32_t ReadTag(std::istream& is, const char* what) {
  char tag[4];
  binio::ReadExact(is, tag, 4, what);
  uint32_t v;
  std::memcpy(&v, tag, 4);
  return v;
}

constexpr uint32_t Tag(const char (&s)[5]) {
  return static_cast<uint32_t>(s[0]) | (static_cast<uint32_t>(s[1]) << 8) |
         (static_cast<uint32_t>(s[2]) << 16) |
         (static_cast<uint32_t>(s[3]) << 24);
}

}  // namespace

Waveform ReadWav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), err::kIo, "cannot open audio file '", path.string(),
          "'");
  require(ReadTag(is, "RIFF tag") == Tag("RIFF"), err::kParse, "'",
          path.string(), "' is not a RIFF file");
  binio::ReadU32(is, "riff size");
  require(ReadTag(is, "WAVE tag") == Tag("WAVE"), err::kParse, "'",
          path.string(), "' is not a WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  bool have_fmt = false;
  Waveform out;

  while (is.peek() != EOF) {
    const uint32_t chunk = ReadTag(is, "chunk tag");
    const uint32_t size = binio::ReadU32(is, "chunk size");
    if (chunk == Tag("fmt ")) {
      require(size >= 16, err::kParse, "malformed fmt chunk");
      unsigned char buf[16];
      binio::ReadExact(is, buf, 16, "fmt chunk");
      format = static_cast<uint16_t>(buf[0] | (buf[1] << 8));
      channels = static_cast<uint16_t>(buf[2] | (buf[3] << 8));
      sample_rate = static_cast<uint32_t>(buf[4]) | (buf[5] << 8) |
                    (buf[6] << 16) | (buf[7] << 24);
      bits = static_cast<uint16_t>(buf[14] | (buf[15] << 8));
      is.ignore(size - 16);
      have_fmt = true;
    } else if (chunk == Tag("data")) {
      require(have_fmt, err::kParse, "data chunk before fmt");
      require(channels == 1, err::kValidation,
              "only mono audio is supported, got ", channels, " channels");
      if (format == 1 && bits == 16) {
        const size_t n = size / 2;
        out.samples.resize(n);
        for (size_t i = 0; i < n; ++i) {
          unsigned char b[2];
          binio::ReadExact(is, b, 2, "pcm16 sample");
          const auto v = static_cast<int16_t>(b[0] | (b[1] << 8));
          out.samples[i] = static_cast<float>(v) / 32768.0f;
        }
      } else if (format == 3 && bits == 32) {
        const size_t n = size / 4;
        out.samples.resize(n);
        binio::ReadF32Array(is, out.samples.data(), n, "float32 sample");
      } else {
        fail(err::kValidation, "unsupported WAV encoding (format ", format,
             ", ", bits, " bits); use PCM16 or IEEE float32");
      }
      out.sample_rate_hz = static_cast<int>(sample_rate);
      return out;
    } else {
      is.ignore(size + (size % 2));  // chunks are word-aligned
    }
  }
  fail(err::kParse, "'", path.string(), "' has no data chunk");
}

Waveform ReadRawF32(const std::filesystem::path& path, int sample_rate_hz) {
  require(sample_rate_hz > 0, err::kValidation, "sample rate must be > 0");
  std::ifstream is(path, std::ios::binary);
  require(is.good(), err::kIo, "cannot open audio file '", path.string(),
          "'");
  is.seekg(0, std::ios::end);
  const auto bytes = static_cast<size_t>(is.tellg());
  is.seekg(0);
  require(bytes % 4 == 0, err::kParse, "'", path.string(),
          "' is not a float32 stream");
  Waveform out;
  out.sample_rate_hz = sample_rate_hz;
  out.samples.resize(bytes / 4);
  binio::ReadF32Array(is, out.samples.data(), out.samples.size(),
                      "raw f32 samples");
  return out;
}

void WriteWavPcm16(const std::filesystem::path& path,
                   const std::vector<float>& samples, int sample_rate_hz) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), err::kIo, "cannot write '", path.string(), "'");
  const uint32_t data_size = static_cast<uint32_t>(samples.size() * 2);
  os.write("RIFF", 4);
  binio::WriteU32(os, 36 + data_size);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  binio::WriteU32(os, 16);
  const uint32_t byte_rate = static_cast<uint32_t>(sample_rate_hz) * 2;
  unsigned char fmt[16] = {1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2, 0, 16, 0};
  fmt[4] = static_cast<unsigned char>(sample_rate_hz);
  fmt[5] = static_cast<unsigned char>(sample_rate_hz >> 8);
  fmt[6] = static_cast<unsigned char>(sample_rate_hz >> 16);
  fmt[7] = static_cast<unsigned char>(sample_rate_hz >> 24);
  fmt[8] = static_cast<unsigned char>(byte_rate);
  fmt[9] = static_cast<unsigned char>(byte_rate >> 8);
  fmt[10] = static_cast<unsigned char>(byte_rate >> 16);
  fmt[11] = static_cast<unsigned char>(byte_rate >> 24);
  os.write(reinterpret_cast<const char*>(fmt), 16);
  os.write("data", 4);
  binio::WriteU32(os, data_size);
  for (float v : samples) {
    const float clamped = std::max(-1.0f, std::min(1.0f, v));
    const auto q = static_cast<int16_t>(std::lround(clamped * 32767.0f));
    unsigned char b[2] = {static_cast<unsigned char>(q & 0xff),
                          static_cast<unsigned char>((q >> 8) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 2);
  }
}

}  // namespace protolex::features
