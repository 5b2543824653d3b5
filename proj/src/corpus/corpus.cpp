// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "protolex/util/errors.hpp"
#include "protolex/util/rng.hpp"

namespace protolex::corpus {

using nlohmann::json;

VisualVocabulary::VisualVocabulary(std::vector<std::string> classes)
    : classes_(std::move(classes)) {
  require(classes_.size() >= 2, err::kValidation,
          "vocabulary needs at least 2 classes, got ", classes_.size());
  for (size_t i = 0; i < classes_.size(); ++i) {
    require(!classes_[i].empty(), err::kValidation, "empty class name");
    const bool inserted =
        index_.emplace(classes_[i], static_cast<int>(i)).second;
    require(inserted, err::kValidation, "duplicate class name '", classes_[i],
            "'");
  }
}

int VisualVocabulary::IndexOf(const std::string& name) const {
  const auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

const std::string& VisualVocabulary::NameOf(int index) const {
  require(index >= 0 && index < size(), err::kValidation,
          "class index out of range: ", index);
  return classes_[static_cast<size_t>(index)];
}

void CorpusManifest::Validate() const {
  require(vocabulary.size() >= 2, err::kValidation, "vocabulary too small");
  std::unordered_set<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) {
    require(r.label >= 0 && r.label < vocabulary.size(), err::kUnknownClass,
            "record '", r.utterance_id, "' has label index ", r.label,
            " outside the vocabulary");
    require(r.duration_s >= 0.0, err::kValidation, "record '", r.utterance_id,
            "' has negative duration");
    require(ids.insert(r.utterance_id).second, err::kDuplicateId,
            "duplicate utterance_id '", r.utterance_id, "'");
  }
}

namespace {

json ParseLine(const std::string& line, size_t line_no) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    fail(err::kParse, "manifest line ", line_no, ": ", e.what());
  }
}

template <typename T>
T GetField(const json& j, const char* key, size_t line_no) {
  if (!j.contains(key))
    fail(err::kParse, "manifest line ", line_no, ": missing field '", key,
         "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(err::kParse, "manifest line ", line_no, ": field '", key, "': ",
         e.what());
  }
}

}  // namespace

CorpusManifest LoadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), err::kIo, "cannot open manifest '", path.string(), "'");

  CorpusManifest manifest;
  std::string line;
  size_t line_no = 0;
  bool have_header = false;
  std::unordered_set<std::string> seen_ids;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = ParseLine(line, line_no);
    if (!have_header) {
      auto classes = GetField<std::vector<std::string>>(j, "vocabulary",
                                                        line_no);
      try {
        manifest.vocabulary = VisualVocabulary(std::move(classes));
      } catch (const Error& e) {
        fail(err::kParse, "manifest line ", line_no, ": ", e.what());
      }
      if (j.contains("metadata")) {
        for (const auto& [k, v] : j.at("metadata").items())
          manifest.metadata[k] = v.is_string() ? v.get<std::string>()
                                               : v.dump();
      }
      have_header = true;
      continue;
    }
    UtteranceRecord r;
    r.utterance_id = GetField<std::string>(j, "utterance_id", line_no);
    r.audio_ref = GetField<std::string>(j, "audio_ref", line_no);
    const auto label = GetField<std::string>(j, "label", line_no);
    r.label = manifest.vocabulary.IndexOf(label);
    if (r.label < 0)
      fail(err::kUnknownClass, "manifest line ", line_no, ": label '", label,
           "' is not in the vocabulary");
    r.attended = GetField<bool>(j, "attended", line_no);
    r.speaker_id = GetField<std::string>(j, "speaker_id", line_no);
    r.duration_s = GetField<double>(j, "duration_s", line_no);
    require(r.duration_s >= 0.0, err::kParse, "manifest line ", line_no,
            ": negative duration_s");
    if (!seen_ids.insert(r.utterance_id).second)
      fail(err::kDuplicateId, "manifest line ", line_no,
           ": duplicate utterance_id '", r.utterance_id, "'");
    manifest.records.push_back(std::move(r));
  }
  require(have_header, err::kParse, "manifest '", path.string(),
          "' has no header line");
  manifest.Validate();
  return manifest;
}

void SaveManifest(const CorpusManifest& manifest,
                  const std::filesystem::path& path) {
  manifest.Validate();
  std::ofstream out(path);
  require(out.good(), err::kIo, "cannot write manifest '", path.string(),
          "'");
  json header;
  header["vocabulary"] = manifest.vocabulary.classes();
  header["metadata"] = manifest.metadata;
  out << header.dump() << "\n";
  for (const auto& r : manifest.records) {
    json j;
    j["utterance_id"] = r.utterance_id;
    j["audio_ref"] = r.audio_ref;
    j["label"] = manifest.vocabulary.NameOf(r.label);
    j["attended"] = r.attended;
    j["speaker_id"] = r.speaker_id;
    j["duration_s"] = r.duration_s;
    out << j.dump() << "\n";
  }
  require(out.good(), err::kIo, "write failed for '", path.string(), "'");
}

CorpusManifest ApplyAttentionNoise(const CorpusManifest& manifest,
                                   uint64_t seed) {
  manifest.Validate();
  CorpusManifest out = manifest;
  Rng rng(Rng::Derive(seed, {0x6e6f697365}));  // independent noise stream
  const int n_classes = manifest.vocabulary.size();
  for (auto& r : out.records) {
    if (r.attended) continue;
    r.label = static_cast<int>(rng.UniformInt(n_classes));
  }
  return out;
}

SplitAssignment StratifiedSplit(const CorpusManifest& manifest,
                                double train_frac, double val_frac_of_train,
                                uint64_t seed) {
  manifest.Validate();
  require(train_frac > 0.0 && train_frac < 1.0, err::kValidation,
          "train_frac must be in (0,1), got ", train_frac);
  require(val_frac_of_train >= 0.0 && val_frac_of_train < 1.0,
          err::kValidation, "val_frac_of_train must be in [0,1), got ",
          val_frac_of_train);

  // Indices per class, in manifest order.
  std::vector<std::vector<size_t>> by_class(manifest.vocabulary.size());
  for (size_t i = 0; i < manifest.records.size(); ++i)
    by_class[static_cast<size_t>(manifest.records[i].label)].push_back(i);

  Rng rng(Rng::Derive(seed, {0x73706c6974}));
  SplitAssignment split;
  std::vector<size_t> train_pool;

  for (auto& members : by_class) {
    if (members.empty()) continue;
    rng.Shuffle(members);
    // Round half up keeps per-class counts deterministic.
    const auto n_train = static_cast<size_t>(std::floor(
        train_frac * static_cast<double>(members.size()) + 0.5));
    for (size_t k = 0; k < members.size(); ++k) {
      if (k < n_train)
        train_pool.push_back(members[k]);
      else
        split.test_ids.push_back(
            manifest.records[members[k]].utterance_id);
    }
  }

  // Validation is drawn globally from the pooled training records.
  rng.Shuffle(train_pool);
  const auto n_val = static_cast<size_t>(std::floor(
      val_frac_of_train * static_cast<double>(train_pool.size()) + 0.5));
  std::vector<size_t> val_idx(train_pool.begin(),
                              train_pool.begin() + n_val);
  std::vector<size_t> train_idx(train_pool.begin() + n_val,
                                train_pool.end());

  // A class must not lose all of its pooled records to validation: move one
  // back so the training split always covers every pooled class.
  std::vector<int> train_count(manifest.vocabulary.size(), 0);
  for (size_t i : train_idx) ++train_count[manifest.records[i].label];
  for (size_t k = 0; k < val_idx.size();) {
    const int label = manifest.records[val_idx[k]].label;
    if (train_count[label] == 0) {
      train_idx.push_back(val_idx[k]);
      ++train_count[label];
      val_idx.erase(val_idx.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      ++k;
    }
  }

  for (size_t i : train_idx)
    split.train_ids.push_back(manifest.records[i].utterance_id);
  for (size_t i : val_idx)
    split.val_ids.push_back(manifest.records[i].utterance_id);

  // Stable output order keeps downstream artifacts reproducible.
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.val_ids.begin(), split.val_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

std::vector<UtteranceRecord> SelectRecords(
    const CorpusManifest& manifest, const std::vector<std::string>& ids) {
  std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  std::vector<UtteranceRecord> out;
  out.reserve(ids.size());
  for (const auto& r : manifest.records)
    if (wanted.count(r.utterance_id)) out.push_back(r);
  require(out.size() == wanted.size(), err::kValidation,
          "split references ids missing from the manifest");
  return out;
}

}  // namespace protolex::corpus
