// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_MODEL_CONFIG_HPP_
#define PROTOLEX_MODEL_CONFIG_HPP_

#include <string>

namespace protolex::model {

enum class Variant { kFull, kNoAe, kAeNoBn, kAePred, kAePretrain };

std::string VariantName(Variant v);
Variant VariantFromName(const std::string& name);

// Architecture of the convolutional-recurrent network: a 2-D conv stack with
// ELU activations over the time x Mel grid, a max pool collapsing the Mel
// axis, a unidirectional GRU, an overlapping temporal max pool (the
// bottleneck), a time-distributed ReLU layer, a softmax visual-prediction
// head max-pooled over time, and (except for the no-AE variant) a decoder
// that mirrors the conv stack back to a spectrum reconstruction.
struct ModelConfig {
  int n_conv_layers = 5;
  int conv_channels = 64;
  int conv_kernel_t = 5;  // odd; same padding, stride 1
  int conv_kernel_f = 5;
  int recurrent_units = 256;
  int bottleneck_window = 8;
  int bottleneck_stride = 4;
  int dense_units = 1048;
  int d_visual = 0;  // set from the vocabulary
  int input_frames = 512;
  int input_bands = 24;
  double dropout_rate = 0.1;
  double l2_lambda = 0.01;
  Variant variant = Variant::kFull;
  double pred_shift_ms = 250.0;  // AE-pred target lead

  void Validate() const;

  bool HasDecoder() const { return variant != Variant::kNoAe; }
  bool HasBottleneck() const { return variant != Variant::kAeNoBn; }
  int BottleneckFrames() const {
    return HasBottleneck() ? input_frames / bottleneck_stride : input_frames;
  }
  // Granularity of one bottleneck frame in input frames.
  int TimeDownsample() const {
    return HasBottleneck() ? bottleneck_stride : 1;
  }
  int PredShiftFrames(double hop_ms) const;
};

}  // namespace protolex::model

#endif  // PROTOLEX_MODEL_CONFIG_HPP_
