// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_MODEL_CHECKPOINT_HPP_
#define PROTOLEX_MODEL_CHECKPOINT_HPP_

#include <filesystem>
#include <string>

#include "protolex/model/network.hpp"

namespace protolex::model {

struct CheckpointMeta {
  uint64_t seed = 0;
  int epoch = 0;
  double validation_loss = 0.0;
  std::string variant;  // redundant with the config, kept for reporting
};

// Self-describing container: magic, format version, config JSON, training
// metadata, then named parameter tensors (shape + row-major little-endian
// f32 payload). Loading reproduces forward outputs bit-exactly because the
// in-memory master weights are the f32 payload itself.
void SaveCheckpoint(const Network& net, const CheckpointMeta& meta,
                    const std::filesystem::path& path);

struct LoadedCheckpoint {
  Network net;
  CheckpointMeta meta;
};

LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path);

// Config (de)serialization shared by checkpoints and run-config files.
std::string ModelConfigToJson(const ModelConfig& config);
ModelConfig ModelConfigFromJson(const std::string& text);

}  // namespace protolex::model

#endif  // PROTOLEX_MODEL_CHECKPOINT_HPP_
