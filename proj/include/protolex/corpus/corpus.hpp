// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_CORPUS_CORPUS_HPP_
#define PROTOLEX_CORPUS_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace protolex::corpus {

// Ordered list of referent classes with a class <-> index bijection.
class VisualVocabulary {
 public:
  VisualVocabulary() = default;
  explicit VisualVocabulary(std::vector<std::string> classes);

  int IndexOf(const std::string& name) const;  // -1 if unknown
  const std::string& NameOf(int index) const;
  int size() const { return static_cast<int>(classes_.size()); }
  const std::vector<std::string>& classes() const { return classes_; }

 private:
  std::vector<std::string> classes_;
  std::map<std::string, int> index_;
};

struct UtteranceRecord {
  std::string utterance_id;
  std::string audio_ref;  // path or feature-store key
  int label = -1;         // index into the vocabulary
  bool attended = false;
  std::string speaker_id;
  double duration_s = 0.0;
};

struct CorpusManifest {
  VisualVocabulary vocabulary;
  std::vector<UtteranceRecord> records;
  std::map<std::string, std::string> metadata;

  void Validate() const;
};

// Manifest file format: UTF-8 JSON lines. The first line is a header object
//   {"vocabulary": ["ball", ...], "metadata": {...}}
// and every following non-empty line is one record object
//   {"utterance_id": ..., "audio_ref": ..., "label": "<class>",
//    "attended": ..., "speaker_id": ..., "duration_s": ...}.
CorpusManifest LoadManifest(const std::filesystem::path& path);
void SaveManifest(const CorpusManifest& manifest,
                  const std::filesystem::path& path);

// Replaces the label of every record with attended == false by a draw that
// is uniform over *all* classes (the original label included). Attended
// records and every other field are untouched. Pure in (manifest, seed).
CorpusManifest ApplyAttentionNoise(const CorpusManifest& manifest,
                                   uint64_t seed);

struct SplitAssignment {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
};

// Per class, round(train_frac * n) records (half-up) go to the train pool
// and the remainder to test; the validation set is then drawn globally from
// the train pool at val_frac_of_train. Every class keeps at least one
// training record when it has any in the pool.
SplitAssignment StratifiedSplit(const CorpusManifest& manifest,
                                double train_frac, double val_frac_of_train,
                                uint64_t seed);

// Convenience: records of the manifest restricted to a set of ids, in
// manifest order.
std::vector<UtteranceRecord> SelectRecords(
    const CorpusManifest& manifest, const std::vector<std::string>& ids);

}  // namespace protolex::corpus

#endif  // PROTOLEX_CORPUS_CORPUS_HPP_
