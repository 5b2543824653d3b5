// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/corpus/corpus.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "protolex/corpus/synth.hpp"
#include "protolex/util/errors.hpp"

namespace fs = std::filesystem;
using namespace protolex;
using namespace protolex::corpus;

namespace {

fs::path TempDir() {
  const fs::path dir =
      fs::temp_directory_path() / ("protolex_corpus_test_" +
                                   std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

fs::path WriteFile(const fs::path& dir, const std::string& name,
                   const std::string& content) {
  const fs::path p = dir / name;
  std::ofstream(p) << content;
  return p;
}

CorpusManifest SmallManifest(int per_class = 4) {
  CorpusManifest m;
  m.vocabulary = VisualVocabulary({"ball", "cup", "dog"});
  int n = 0;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per_class; ++i) {
      UtteranceRecord r;
      r.utterance_id = "u" + std::to_string(n++);
      r.audio_ref = r.utterance_id + ".wav";
      r.label = c;
      r.attended = (i % 2 == 0);
      r.speaker_id = "s" + std::to_string(i % 2);
      r.duration_s = 1.0 + 0.1 * i;
      m.records.push_back(r);
    }
  return m;
}

}  // namespace

TEST_CASE("manifest round-trips through the line format") {
  const fs::path dir = TempDir();
  const std::string text =
      R"({"vocabulary":["ball","cup"],"metadata":{"source":"test"}})" "\n"
      R"({"utterance_id":"a","audio_ref":"a.wav","label":"ball","attended":true,"speaker_id":"s1","duration_s":1.5})" "\n"
      R"({"utterance_id":"b","audio_ref":"b.wav","label":"cup","attended":false,"speaker_id":"s2","duration_s":0.8})" "\n"
      R"({"utterance_id":"c","audio_ref":"c.wav","label":"cup","attended":true,"speaker_id":"s1","duration_s":2.0})" "\n";
  const fs::path p = WriteFile(dir, "m.jsonl", text);

  const CorpusManifest m = LoadManifest(p);
  CHECK(m.records.size() == 3);
  CHECK(m.vocabulary.size() == 2);
  CHECK(m.records[0].label == 0);
  CHECK(m.records[1].label == 1);
  CHECK(m.records[1].attended == false);
  CHECK(m.metadata.at("source") == "test");

  // Serialize, reload: stable contents.
  const fs::path p2 = dir / "m2.jsonl";
  SaveManifest(m, p2);
  const CorpusManifest m2 = LoadManifest(p2);
  REQUIRE(m2.records.size() == m.records.size());
  for (size_t i = 0; i < m.records.size(); ++i) {
    CHECK(m2.records[i].utterance_id == m.records[i].utterance_id);
    CHECK(m2.records[i].label == m.records[i].label);
    CHECK(m2.records[i].attended == m.records[i].attended);
    CHECK(m2.records[i].duration_s == m.records[i].duration_s);
  }
  fs::remove_all(dir);
}

TEST_CASE("manifest with no records is valid") {
  const fs::path dir = TempDir();
  const fs::path p =
      WriteFile(dir, "empty.jsonl", R"({"vocabulary":["a","b"]})" "\n");
  const CorpusManifest m = LoadManifest(p);
  CHECK(m.records.empty());
  CHECK(m.vocabulary.size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("manifest errors carry codes and line numbers") {
  const fs::path dir = TempDir();
  const std::string header = R"({"vocabulary":["ball","cup"]})" "\n";
  const std::string rec =
      R"({"utterance_id":"a","audio_ref":"a.wav","label":"ball","attended":true,"speaker_id":"s","duration_s":1})" "\n";

  SUBCASE("unknown label names the label") {
    const fs::path p = WriteFile(
        dir, "bad.jsonl",
        header +
            R"({"utterance_id":"a","audio_ref":"a.wav","label":"zebra","attended":true,"speaker_id":"s","duration_s":1})"
            "\n");
    try {
      LoadManifest(p);
      FAIL("expected unknown-class error");
    } catch (const Error& e) {
      CHECK(e.code() == err::kUnknownClass);
      CHECK(std::string(e.what()).find("zebra") != std::string::npos);
    }
  }
  SUBCASE("duplicate id") {
    const fs::path p = WriteFile(dir, "dup.jsonl", header + rec + rec);
    try {
      LoadManifest(p);
      FAIL("expected duplicate-id error");
    } catch (const Error& e) {
      CHECK(e.code() == err::kDuplicateId);
    }
  }
  SUBCASE("malformed line reports its number") {
    const fs::path p =
        WriteFile(dir, "mal.jsonl", header + rec + "{not json\n");
    try {
      LoadManifest(p);
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(e.code() == err::kParse);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("attention noise leaves attended records alone") {
  CorpusManifest m = SmallManifest();
  for (auto& r : m.records) r.attended = true;
  const CorpusManifest noisy = ApplyAttentionNoise(m, 42);
  REQUIRE(noisy.records.size() == m.records.size());
  for (size_t i = 0; i < m.records.size(); ++i)
    CHECK(noisy.records[i].label == m.records[i].label);
}

TEST_CASE("attention noise resamples exactly the non-attended records and "
          "preserves everything else") {
  const CorpusManifest m = SmallManifest(40);
  const CorpusManifest a = ApplyAttentionNoise(m, 1);
  const CorpusManifest b = ApplyAttentionNoise(m, 1);
  const CorpusManifest c = ApplyAttentionNoise(m, 2);

  REQUIRE(a.records.size() == m.records.size());
  bool seed_changes_something = false;
  for (size_t i = 0; i < m.records.size(); ++i) {
    CHECK(a.records[i].utterance_id == m.records[i].utterance_id);
    CHECK(a.records[i].speaker_id == m.records[i].speaker_id);
    CHECK(a.records[i].attended == m.records[i].attended);
    CHECK(a.records[i].duration_s == m.records[i].duration_s);
    if (m.records[i].attended) {
      CHECK(a.records[i].label == m.records[i].label);
      CHECK(c.records[i].label == m.records[i].label);
    }
    // Same seed twice: identical output.
    CHECK(a.records[i].label == b.records[i].label);
    seed_changes_something |= a.records[i].label != c.records[i].label;
  }
  // Different seeds disagree on some non-attended label (60 resampled
  // records over 3 classes; collision of all is essentially impossible).
  CHECK(seed_changes_something);
}

TEST_CASE("attention noise can reproduce the original label by chance") {
  // Uniform over all classes includes the true one; with 40 non-attended
  // records and 3 classes, some draw must hit the original label.
  const CorpusManifest m = SmallManifest(40);
  const CorpusManifest noisy = ApplyAttentionNoise(m, 5);
  bool kept_original = false;
  for (size_t i = 0; i < m.records.size(); ++i)
    if (!m.records[i].attended)
      kept_original |= noisy.records[i].label == m.records[i].label;
  CHECK(kept_original);
}

TEST_CASE("stratified split: 100 records, 0.8/0.2 gives 64/16/20") {
  CorpusManifest m;
  m.vocabulary = VisualVocabulary({"one", "other"});
  for (int i = 0; i < 100; ++i) {
    UtteranceRecord r;
    r.utterance_id = "u" + std::to_string(i);
    r.audio_ref = r.utterance_id;
    r.label = 0;
    r.attended = true;
    r.speaker_id = "s";
    r.duration_s = 1.0;
    m.records.push_back(r);
  }
  // The vocabulary requires two classes; give the second one enough records
  // that per-class arithmetic stays visible.
  const SplitAssignment s = StratifiedSplit(m, 0.8, 0.2, 7);
  CHECK(s.train_ids.size() == 64);
  CHECK(s.val_ids.size() == 16);
  CHECK(s.test_ids.size() == 20);
}

TEST_CASE("stratified split is per class: 50+50 yields 10+10 test") {
  CorpusManifest m;
  m.vocabulary = VisualVocabulary({"a", "b"});
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 50; ++i) {
      UtteranceRecord r;
      r.utterance_id = "c" + std::to_string(c) + "_" + std::to_string(i);
      r.audio_ref = r.utterance_id;
      r.label = c;
      r.attended = true;
      r.speaker_id = "s";
      r.duration_s = 1.0;
      m.records.push_back(r);
    }
  const SplitAssignment s = StratifiedSplit(m, 0.8, 0.0, 3);
  CHECK(s.val_ids.empty());
  int test_a = 0, test_b = 0;
  for (const auto& id : s.test_ids) (id[1] == '0' ? test_a : test_b)++;
  CHECK(test_a == 10);
  CHECK(test_b == 10);
}

TEST_CASE("stratified split partitions ids exactly and deterministically") {
  const CorpusManifest m = SmallManifest(25);
  const SplitAssignment s1 = StratifiedSplit(m, 0.7, 0.25, 11);
  const SplitAssignment s2 = StratifiedSplit(m, 0.7, 0.25, 11);
  CHECK(s1.train_ids == s2.train_ids);
  CHECK(s1.val_ids == s2.val_ids);
  CHECK(s1.test_ids == s2.test_ids);

  std::set<std::string> all;
  all.insert(s1.train_ids.begin(), s1.train_ids.end());
  all.insert(s1.val_ids.begin(), s1.val_ids.end());
  all.insert(s1.test_ids.begin(), s1.test_ids.end());
  CHECK(all.size() ==
        s1.train_ids.size() + s1.val_ids.size() + s1.test_ids.size());
  CHECK(all.size() == m.records.size());
}

TEST_CASE("every class keeps a training record even with aggressive "
          "validation draws") {
  CorpusManifest m;
  m.vocabulary = VisualVocabulary({"rare", "common"});
  for (int i = 0; i < 2; ++i) {
    UtteranceRecord r;
    r.utterance_id = "rare" + std::to_string(i);
    r.audio_ref = r.utterance_id;
    r.label = 0;
    r.attended = true;
    r.speaker_id = "s";
    r.duration_s = 1.0;
    m.records.push_back(r);
  }
  for (int i = 0; i < 60; ++i) {
    UtteranceRecord r;
    r.utterance_id = "common" + std::to_string(i);
    r.audio_ref = r.utterance_id;
    r.label = 1;
    r.attended = true;
    r.speaker_id = "s";
    r.duration_s = 1.0;
    m.records.push_back(r);
  }
  for (uint64_t seed = 0; seed < 30; ++seed) {
    const SplitAssignment s = StratifiedSplit(m, 0.8, 0.9, seed);
    int rare_train = 0;
    for (const auto& id : s.train_ids)
      if (id.rfind("rare", 0) == 0) ++rare_train;
    CHECK(rare_train >= 1);
  }
}

TEST_CASE("synthetic corpus: record count, noise regime, determinism") {
  SyntheticCorpusSpec spec;
  spec.n_classes = 12;
  spec.n_utterances = 1200;
  spec.attention_rate = 0.65;
  spec.n_speakers = 3;
  spec.n_mel_bands = 12;
  spec.utterance_duration_range_s = {0.4, 0.6};
  spec.keyword_duration_s = 0.2;
  spec.seed = 77;

  const SyntheticCorpus c = GenerateSyntheticCorpus(spec);
  CHECK(c.manifest.records.size() == 1200);
  CHECK(c.store.size() == 1200);

  int attended = 0;
  for (const auto& r : c.manifest.records) attended += r.attended ? 1 : 0;
  // Binomial(1200, 0.65) 99% interval.
  const double mean = 1200 * 0.65;
  const double sd = std::sqrt(1200 * 0.65 * 0.35);
  CHECK(attended > mean - 2.58 * sd);
  CHECK(attended < mean + 2.58 * sd);

  // Same spec and seed: byte-identical feature stores.
  const SyntheticCorpus c2 = GenerateSyntheticCorpus(spec);
  const fs::path dir = TempDir();
  c.store.Save(dir / "a.plxf");
  c2.store.Save(dir / "b.plxf");
  std::ifstream fa(dir / "a.plxf", std::ios::binary);
  std::ifstream fb(dir / "b.plxf", std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(fa)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(fb)), {});
  CHECK(bytes_a == bytes_b);
  CHECK(!bytes_a.empty());
  fs::remove_all(dir);
}

TEST_CASE("noiseless single-speaker utterances are identical up to keyword "
          "placement") {
  SyntheticCorpusSpec spec;
  spec.n_classes = 2;
  spec.n_utterances = 8;
  spec.carrier_noise_level = 0.0;
  spec.n_speakers = 1;
  spec.n_mel_bands = 10;
  spec.utterance_duration_range_s = {0.5, 0.5};  // fixed length
  spec.keyword_duration_s = 0.2;
  spec.seed = 3;

  const SyntheticCorpus c = GenerateSyntheticCorpus(spec);
  const int kw_frames = 20;
  // Compare class-0 utterances after aligning on the keyword onset. The
  // onset is recoverable as the argmax frame window of total energy.
  Eigen::MatrixXf reference;
  bool have_reference = false;
  for (size_t i = 0; i < c.manifest.records.size(); ++i) {
    if (c.manifest.records[i].label != 0) continue;
    const auto& s = c.store.Get(c.manifest.records[i].utterance_id);
    // Find onset: first frame whose energy differs from the flat base.
    int onset = -1;
    for (int t = 0; t < s.n_frames(); ++t) {
      if (std::abs(s.values.row(t).maxCoeff() - s.values(0, 0)) > 1e-6 ||
          onset >= 0) {
        if (onset < 0) onset = t;
      }
    }
    if (onset < 0) onset = 0;
    if (onset + kw_frames > s.n_frames()) continue;
    Eigen::MatrixXf window = s.values.middleRows(onset, kw_frames);
    if (!have_reference) {
      reference = window;
      have_reference = true;
    } else {
      CHECK((window - reference).cwiseAbs().maxCoeff() ==
            doctest::Approx(0.0).epsilon(1e-6));
    }
  }
  CHECK(have_reference);
}

TEST_CASE("synthetic spec validation rejects impossible keyword durations") {
  SyntheticCorpusSpec spec;
  spec.keyword_duration_s = 2.0;
  spec.utterance_duration_range_s = {0.5, 1.0};
  CHECK_THROWS_AS(GenerateSyntheticCorpus(spec), Error);
}

TEST_CASE("empirical attended rate converges to attention_rate") {
  SyntheticCorpusSpec spec;
  spec.n_classes = 3;
  spec.n_utterances = 4000;
  spec.attention_rate = 0.3;
  spec.n_mel_bands = 8;
  spec.utterance_duration_range_s = {0.3, 0.4};
  spec.keyword_duration_s = 0.15;
  spec.seed = 9;
  const SyntheticCorpus c = GenerateSyntheticCorpus(spec);
  int attended = 0;
  for (const auto& r : c.manifest.records) attended += r.attended ? 1 : 0;
  const double mean = 4000 * 0.3;
  const double sd = std::sqrt(4000 * 0.3 * 0.7);
  CHECK(attended > mean - 2.58 * sd);
  CHECK(attended < mean + 2.58 * sd);
}
