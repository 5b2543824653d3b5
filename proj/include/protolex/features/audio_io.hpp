// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_FEATURES_AUDIO_IO_HPP_
#define PROTOLEX_FEATURES_AUDIO_IO_HPP_

#include <filesystem>
#include <vector>

namespace protolex::features {

struct Waveform {
  std::vector<float> samples;  // mono, in [-1, 1] for integer sources
  int sample_rate_hz = 0;
};

// Reads a mono RIFF/WAVE file (PCM16 or IEEE float32). Raw ".f32" files
// (headerless little-endian float32) are also accepted; their sample rate
// must be supplied by the caller.
Waveform ReadWav(const std::filesystem::path& path);
Waveform ReadRawF32(const std::filesystem::path& path, int sample_rate_hz);

// Writes a PCM16 mono WAV (test and synthesis tooling).
void WriteWavPcm16(const std::filesystem::path& path,
                   const std::vector<float>& samples, int sample_rate_hz);

}  // namespace protolex::features

#endif  // PROTOLEX_FEATURES_AUDIO_IO_HPP_
