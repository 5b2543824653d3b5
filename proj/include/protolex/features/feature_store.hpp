// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_FEATURES_FEATURE_STORE_HPP_
#define PROTOLEX_FEATURES_FEATURE_STORE_HPP_

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "protolex/features/logmel.hpp"

namespace protolex::features {

// Container of precomputed spectrograms keyed by utterance id. The on-disk
// layout is a single binary file (documented in the README); float payloads
// round-trip bit-exactly.
class FeatureStore {
 public:
  void Put(const std::string& utterance_id, LogMelSpectrogram spec);
  bool Contains(const std::string& utterance_id) const;
  const LogMelSpectrogram& Get(const std::string& utterance_id) const;
  size_t size() const { return specs_.size(); }
  // Ids in insertion order (stable serialization order).
  const std::vector<std::string>& ids() const { return order_; }

  void Save(const std::filesystem::path& path) const;
  static FeatureStore Load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, LogMelSpectrogram> specs_;
  std::vector<std::string> order_;
};

}  // namespace protolex::features

#endif  // PROTOLEX_FEATURES_FEATURE_STORE_HPP_
