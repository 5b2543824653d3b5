// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/model/config.hpp"

#include <cmath>

#include "protolex/util/errors.hpp"

namespace protolex::model {

std::string VariantName(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoAe: return "no-AE";
    case Variant::kAeNoBn: return "AE-noBN";
    case Variant::kAePred: return "AE-pred";
    case Variant::kAePretrain: return "AE-pretrain";
  }
  fail(err::kValidation, "unreachable variant");
}

Variant VariantFromName(const std::string& name) {
  if (name == "full") return Variant::kFull;
  if (name == "no-AE") return Variant::kNoAe;
  if (name == "AE-noBN") return Variant::kAeNoBn;
  if (name == "AE-pred") return Variant::kAePred;
  if (name == "AE-pretrain") return Variant::kAePretrain;
  fail(err::kValidation, "unknown model variant '", name,
       "' (expected full, no-AE, AE-noBN, AE-pred or AE-pretrain)");
}

void ModelConfig::Validate() const {
  require(n_conv_layers >= 1, err::kValidation, "need >= 1 conv layer");
  require(conv_channels >= 1, err::kValidation, "need >= 1 conv channel");
  require(conv_kernel_t >= 1 && conv_kernel_t % 2 == 1, err::kValidation,
          "conv_kernel_t must be odd (same padding)");
  require(conv_kernel_f >= 1 && conv_kernel_f % 2 == 1, err::kValidation,
          "conv_kernel_f must be odd (same padding)");
  require(recurrent_units >= 1, err::kValidation, "need >= 1 GRU unit");
  require(dense_units >= 1, err::kValidation, "need >= 1 dense unit");
  require(d_visual >= 2, err::kValidation,
          "d_visual must match a vocabulary of >= 2 classes, got ", d_visual);
  require(input_frames >= 1 && input_bands >= 1, err::kValidation,
          "input geometry must be positive");
  require(bottleneck_window >= 1 && bottleneck_stride >= 1, err::kValidation,
          "bottleneck geometry must be positive");
  require(input_frames % bottleneck_stride == 0, err::kValidation,
          "bottleneck_stride ", bottleneck_stride, " must divide input_frames ",
          input_frames);
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, err::kValidation,
          "dropout_rate must be in [0,1)");
  require(l2_lambda >= 0.0, err::kValidation, "l2_lambda must be >= 0");
  require(pred_shift_ms >= 0.0, err::kValidation,
          "pred_shift_ms must be >= 0");
}

int ModelConfig::PredShiftFrames(double hop_ms) const {
  require(hop_ms > 0.0, err::kValidation, "hop_ms must be positive");
  return static_cast<int>(std::lround(pred_shift_ms / hop_ms));
}

}  // namespace protolex::model
