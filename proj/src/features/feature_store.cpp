// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/features/feature_store.hpp"

#include <fstream>

#include "protolex/util/binio.hpp"
#include "protolex/util/errors.hpp"

namespace protolex::features {

namespace {
constexpr char kMagic[4] = {'P', 'L', 'X', 'F'};
constexpr uint32_t kVersion = 1;
}  // namespace

void FeatureStore::Put(const std::string& utterance_id,
                       LogMelSpectrogram spec) {
  spec.Validate();
  const auto [it, inserted] = specs_.emplace(utterance_id, std::move(spec));
  require(inserted, err::kDuplicateId, "feature store already holds '",
          utterance_id, "'");
  (void)it;
  order_.push_back(utterance_id);
}

bool FeatureStore::Contains(const std::string& utterance_id) const {
  return specs_.count(utterance_id) > 0;
}

const LogMelSpectrogram& FeatureStore::Get(
    const std::string& utterance_id) const {
  const auto it = specs_.find(utterance_id);
  require(it != specs_.end(), err::kValidation,
          "feature store has no entry for '", utterance_id, "'");
  return it->second;
}

void FeatureStore::Save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), err::kIo, "cannot write feature store '", path.string(),
          "'");
  os.write(kMagic, 4);
  binio::WriteU32(os, kVersion);
  binio::WriteU64(os, order_.size());
  // Values are serialized row-major (frame-major), little-endian f32.
  std::vector<float> row_major;
  for (const auto& id : order_) {
    const LogMelSpectrogram& s = specs_.at(id);
    binio::WriteString(os, id);
    binio::WriteU32(os, static_cast<uint32_t>(s.n_frames()));
    binio::WriteU32(os, static_cast<uint32_t>(s.n_bands()));
    binio::WriteU32(os, static_cast<uint32_t>(s.valid_frames));
    binio::WriteU32(os, static_cast<uint32_t>(s.params.sample_rate_hz));
    binio::WriteF64(os, s.params.window_ms);
    binio::WriteF64(os, s.params.hop_ms);
    binio::WriteU32(os, static_cast<uint32_t>(s.params.n_mel_bands));
    binio::WriteF64(os, s.params.mel_fmin_hz);
    binio::WriteF64(os, s.params.mel_fmax_hz);
    binio::WriteF64(os, s.params.log_floor);
    row_major.resize(static_cast<size_t>(s.n_frames()) * s.n_bands());
    for (int t = 0; t < s.n_frames(); ++t)
      for (int m = 0; m < s.n_bands(); ++m)
        row_major[static_cast<size_t>(t) * s.n_bands() + m] = s.values(t, m);
    binio::WriteF32Array(os, row_major.data(), row_major.size());
  }
  require(os.good(), err::kIo, "write failed for '", path.string(), "'");
}

FeatureStore FeatureStore::Load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), err::kIo, "cannot open feature store '", path.string(),
          "'");
  char magic[4];
  binio::ReadExact(is, magic, 4, "feature store magic");
  require(std::equal(magic, magic + 4, kMagic), err::kCorruptPayload,
          "'", path.string(), "' is not a feature store");
  const uint32_t version = binio::ReadU32(is, "feature store version");
  require(version == kVersion, err::kVersionMismatch,
          "feature store version ", version, ", expected ", kVersion);
  const uint64_t count = binio::ReadU64(is, "feature store count");

  FeatureStore store;
  std::vector<float> row_major;
  for (uint64_t i = 0; i < count; ++i) {
    const std::string id = binio::ReadString(is, "utterance id");
    const uint32_t n_frames = binio::ReadU32(is, "n_frames");
    const uint32_t n_bands = binio::ReadU32(is, "n_bands");
    LogMelSpectrogram s;
    s.valid_frames = static_cast<int>(binio::ReadU32(is, "valid_frames"));
    s.params.sample_rate_hz =
        static_cast<int>(binio::ReadU32(is, "sample_rate"));
    s.params.window_ms = binio::ReadF64(is, "window_ms");
    s.params.hop_ms = binio::ReadF64(is, "hop_ms");
    s.params.n_mel_bands = static_cast<int>(binio::ReadU32(is, "n_mel"));
    s.params.mel_fmin_hz = binio::ReadF64(is, "mel_fmin");
    s.params.mel_fmax_hz = binio::ReadF64(is, "mel_fmax");
    s.params.log_floor = binio::ReadF64(is, "log_floor");
    require(n_bands == static_cast<uint32_t>(s.params.n_mel_bands),
            err::kCorruptPayload, "band count mismatch in '", id, "'");
    row_major.resize(static_cast<size_t>(n_frames) * n_bands);
    binio::ReadF32Array(is, row_major.data(), row_major.size(),
                        "feature values");
    s.values.resize(n_frames, n_bands);
    for (uint32_t t = 0; t < n_frames; ++t)
      for (uint32_t m = 0; m < n_bands; ++m)
        s.values(t, m) = row_major[static_cast<size_t>(t) * n_bands + m];
    store.Put(id, std::move(s));
  }
  return store;
}

}  // namespace protolex::features
