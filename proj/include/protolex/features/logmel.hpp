// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_FEATURES_LOGMEL_HPP_
#define PROTOLEX_FEATURES_LOGMEL_HPP_

#include <Eigen/Dense>
#include <span>

namespace protolex::features {

struct FeatureParams {
  int sample_rate_hz = 16000;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int n_mel_bands = 24;
  double mel_fmin_hz = 0.0;
  double mel_fmax_hz = 8000.0;
  double log_floor = 1e-10;  // energies are clamped here before the log

  void Validate() const;
  int WindowSamples() const;
  int HopSamples() const;
  // Value written into padded frames: the log of a floored (silent) energy.
  float PadValue() const;
};

// Time x band log-energy matrix. Validity is a contiguous frame prefix:
// frames [0, valid_frames) are real, the rest is padding. Representing the
// mask as a count makes the prefix invariant structural.
struct LogMelSpectrogram {
  Eigen::MatrixXf values;  // [n_frames x n_mel_bands]
  int valid_frames = 0;
  FeatureParams params;

  int n_frames() const { return static_cast<int>(values.rows()); }
  int n_bands() const { return static_cast<int>(values.cols()); }
  bool FrameValid(int t) const { return t >= 0 && t < valid_frames; }
  void Validate() const;
};

// Frames the waveform (Hamming window, no pre-emphasis), takes the power
// spectrum and a triangular HTK-mel filterbank, and returns floored log
// energies. n_frames = 1 + floor((len - window) / hop); all frames valid.
LogMelSpectrogram ComputeLogMel(std::span<const float> waveform,
                                const FeatureParams& params);

// Forces the spectrogram to exactly target_frames rows: shorter inputs are
// padded with silent rows (marked invalid), longer inputs keep the onset and
// drop the tail.
LogMelSpectrogram PadOrClip(const LogMelSpectrogram& spec, int target_frames);

}  // namespace protolex::features

#endif  // PROTOLEX_FEATURES_LOGMEL_HPP_
