// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/features/logmel.hpp"

#include <cmath>
#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "protolex/util/errors.hpp"

namespace protolex::features {

void FeatureParams::Validate() const {
  require(sample_rate_hz > 0, err::kValidation, "sample_rate_hz must be > 0");
  require(hop_ms > 0.0 && window_ms >= hop_ms, err::kValidation,
          "need window_ms >= hop_ms > 0");
  require(n_mel_bands >= 1, err::kValidation, "n_mel_bands must be >= 1");
  require(mel_fmin_hz >= 0.0 && mel_fmin_hz < mel_fmax_hz &&
              mel_fmax_hz <= sample_rate_hz / 2.0,
          err::kValidation, "need 0 <= mel_fmin < mel_fmax <= sample_rate/2");
  require(log_floor > 0.0, err::kValidation, "log_floor must be positive");
}

int FeatureParams::WindowSamples() const {
  return static_cast<int>(std::lround(window_ms * sample_rate_hz / 1000.0));
}

int FeatureParams::HopSamples() const {
  return static_cast<int>(std::lround(hop_ms * sample_rate_hz / 1000.0));
}

float FeatureParams::PadValue() const {
  return static_cast<float>(std::log(log_floor));
}

void LogMelSpectrogram::Validate() const {
  require(valid_frames >= 0 && valid_frames <= n_frames(), err::kValidation,
          "valid_frames out of range");
  require(values.allFinite(), err::kValidation,
          "spectrogram has non-finite values");
  require(n_bands() == params.n_mel_bands, err::kValidation,
          "band count does not match params");
}

namespace {

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Triangular filterbank on FFT bins; rows are Mel bands.
Eigen::MatrixXd MelFilterbank(const FeatureParams& p, int nfft) {
  const int n_bins = nfft / 2 + 1;
  const double mel_lo = HzToMel(p.mel_fmin_hz);
  const double mel_hi = HzToMel(p.mel_fmax_hz);
  std::vector<double> edges(p.n_mel_bands + 2);
  for (int i = 0; i < p.n_mel_bands + 2; ++i)
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (p.n_mel_bands + 1));

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(p.n_mel_bands, n_bins);
  const double bin_hz = static_cast<double>(p.sample_rate_hz) / nfft;
  for (int m = 0; m < p.n_mel_bands; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > left && f < center)
        w = (f - left) / (center - left);
      else if (f >= center && f < right)
        w = (right - f) / (right - center);
      fb(m, k) = w;
    }
  }
  return fb;
}

int NextPow2(int n) {
  int v = 1;
  while (v < n) v <<= 1;
  return v;
}

}  // namespace

LogMelSpectrogram ComputeLogMel(std::span<const float> waveform,
                                const FeatureParams& params) {
  params.Validate();
  const int win = params.WindowSamples();
  const int hop = params.HopSamples();
  require(static_cast<int>(waveform.size()) >= win, err::kValidation,
          "waveform shorter than one analysis window (", waveform.size(),
          " < ", win, " samples)");

  const int n_frames =
      1 + static_cast<int>((waveform.size() - static_cast<size_t>(win)) /
                           static_cast<size_t>(hop));
  const int nfft = NextPow2(win);
  const Eigen::MatrixXd fb = MelFilterbank(params, nfft);

  // Hamming window.
  Eigen::VectorXd window(win);
  for (int i = 0; i < win; ++i)
    window(i) = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (win - 1));

  Eigen::FFT<double> fft;
  std::vector<double> frame(nfft, 0.0);
  std::vector<std::complex<double>> spectrum;

  LogMelSpectrogram out;
  out.params = params;
  out.values.resize(n_frames, params.n_mel_bands);
  out.valid_frames = n_frames;

  Eigen::VectorXd power(nfft / 2 + 1);
  for (int t = 0; t < n_frames; ++t) {
    const size_t off = static_cast<size_t>(t) * hop;
    for (int i = 0; i < win; ++i)
      frame[static_cast<size_t>(i)] = waveform[off + i] * window(i);
    std::fill(frame.begin() + win, frame.end(), 0.0);
    fft.fwd(spectrum, frame);
    for (int k = 0; k <= nfft / 2; ++k) power(k) = std::norm(spectrum[k]);
    const Eigen::VectorXd mel = fb * power;
    for (int m = 0; m < params.n_mel_bands; ++m)
      out.values(t, m) = static_cast<float>(
          std::log(std::max(mel(m), params.log_floor)));
  }
  return out;
}

LogMelSpectrogram PadOrClip(const LogMelSpectrogram& spec, int target_frames) {
  require(target_frames >= 1, err::kValidation, "target_frames must be >= 1");
  spec.Validate();
  if (spec.n_frames() == target_frames) return spec;

  LogMelSpectrogram out;
  out.params = spec.params;
  out.values.resize(target_frames, spec.n_bands());
  if (spec.n_frames() > target_frames) {
    // Keep the utterance onset, drop the tail.
    out.values = spec.values.topRows(target_frames);
    out.valid_frames = std::min(spec.valid_frames, target_frames);
  } else {
    out.values.setConstant(spec.params.PadValue());
    out.values.topRows(spec.n_frames()) = spec.values;
    out.valid_frames = spec.valid_frames;
  }
  return out;
}

}  // namespace protolex::features
