// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_CORPUS_SYNTH_HPP_
#define PROTOLEX_CORPUS_SYNTH_HPP_

#include <cstdint>
#include <utility>

#include "protolex/corpus/corpus.hpp"
#include "protolex/features/feature_store.hpp"

namespace protolex::corpus {

// Desk-scale corpus generator. Each utterance is a log-Mel-shaped matrix:
// a flat ambient floor, smoothed carrier noise, a few generic distractor
// blobs, and one class-specific keyword pattern (a fixed set of smooth
// Gabor-like time-frequency atoms) placed at a random onset. Speakers apply
// a small affine perturbation (band shift + gain) to the keyword.
struct SyntheticCorpusSpec {
  int n_classes = 12;
  int n_utterances = 1200;
  double carrier_noise_level = 0.3;  // also scales distractor amplitude
  double keyword_duration_s = 0.25;
  std::pair<double, double> utterance_duration_range_s = {0.6, 1.0};
  int n_speakers = 3;
  double speaker_shift_strength = 0.5;
  double attention_rate = 0.65;
  uint64_t seed = 1;
  // Feature-grid knobs (the generator emits features directly, no audio).
  int n_mel_bands = 24;
  double hop_ms = 10.0;

  void Validate() const;
};

struct SyntheticCorpus {
  CorpusManifest manifest;
  features::FeatureStore store;
};

SyntheticCorpus GenerateSyntheticCorpus(const SyntheticCorpusSpec& spec);

}  // namespace protolex::corpus

#endif  // PROTOLEX_CORPUS_SYNTH_HPP_
