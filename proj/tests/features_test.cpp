// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/features/logmel.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "protolex/features/feature_store.hpp"
#include "protolex/util/errors.hpp"
#include "protolex/util/rng.hpp"

namespace fs = std::filesystem;
using namespace protolex;
using namespace protolex::features;

namespace {

std::vector<float> Sine(double freq_hz, double seconds, int sample_rate) {
  std::vector<float> w(static_cast<size_t>(seconds * sample_rate));
  for (size_t i = 0; i < w.size(); ++i)
    w[i] = static_cast<float>(
        0.5 * std::sin(2.0 * M_PI * freq_hz * i / sample_rate));
  return w;
}

// Band center frequencies of the triangular filterbank, derived on the Mel
// scale exactly as documented.
double BandCenterHz(const FeatureParams& p, int band) {
  auto mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  auto hz = [](double m) {
    return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
  };
  const double lo = mel(p.mel_fmin_hz), hi = mel(p.mel_fmax_hz);
  return hz(lo + (hi - lo) * (band + 1) / (p.n_mel_bands + 1));
}

}  // namespace

TEST_CASE("silence at defaults: 98 frames, 24 bands, every value floored") {
  const FeatureParams p;
  const std::vector<float> w(16000, 0.0f);
  const LogMelSpectrogram s = ComputeLogMel(w, p);
  CHECK(s.n_frames() == 98);
  CHECK(s.n_bands() == 24);
  CHECK(s.valid_frames == 98);
  const float expected = static_cast<float>(std::log(1e-10));
  CHECK((s.values.array() == expected).all());
}

TEST_CASE("frame count follows 1 + floor((len - win) / hop)") {
  const FeatureParams p;
  for (int extra : {0, 1, 159, 160, 480}) {
    const std::vector<float> w(static_cast<size_t>(400 + extra), 0.1f);
    const LogMelSpectrogram s = ComputeLogMel(w, p);
    CHECK(s.n_frames() == 1 + extra / 160);
  }
}

TEST_CASE("too-short waveform is rejected") {
  const FeatureParams p;
  const std::vector<float> w(399, 0.0f);
  CHECK_THROWS_AS(ComputeLogMel(w, p), Error);
}

TEST_CASE("a sine at a band center peaks in that band in every frame") {
  const FeatureParams p;
  for (int band : {6, 11, 17}) {
    const auto w = Sine(BandCenterHz(p, band), 0.5, p.sample_rate_hz);
    const LogMelSpectrogram s = ComputeLogMel(w, p);
    for (int t = 0; t < s.n_frames(); ++t) {
      Eigen::Index argmax;
      s.values.row(t).maxCoeff(&argmax);
      CHECK(argmax == band);
    }
  }
}

TEST_CASE("doubling the amplitude shifts unfloored values by log 4") {
  const FeatureParams p;
  Rng rng(5);
  std::vector<float> w(8000);
  for (auto& v : w) v = static_cast<float>(0.2 * rng.Normal());
  std::vector<float> w2(w);
  for (auto& v : w2) v *= 2.0f;

  const LogMelSpectrogram a = ComputeLogMel(w, p);
  const LogMelSpectrogram b = ComputeLogMel(w2, p);
  const float floor_val = p.PadValue();
  const double shift = std::log(4.0);  // power scales with amplitude^2
  for (int t = 0; t < a.n_frames(); ++t)
    for (int m = 0; m < a.n_bands(); ++m) {
      if (a.values(t, m) <= floor_val + 1.0f) continue;  // near the floor
      CHECK(b.values(t, m) - a.values(t, m) ==
            doctest::Approx(shift).epsilon(1e-4));
    }
}

TEST_CASE("pad_or_clip meets its contract") {
  FeatureParams p;
  p.n_mel_bands = 4;
  LogMelSpectrogram s;
  s.params = p;
  s.values = Eigen::MatrixXf::Constant(100, 4, 1.5f);
  s.valid_frames = 100;

  SUBCASE("shorter input is padded with silent masked rows") {
    const LogMelSpectrogram out = PadOrClip(s, 512);
    CHECK(out.n_frames() == 512);
    CHECK(out.valid_frames == 100);
    CHECK(out.values(99, 0) == 1.5f);
    CHECK(out.values(100, 0) == p.PadValue());
    CHECK(out.values(511, 3) == p.PadValue());
  }
  SUBCASE("longer input keeps the onset") {
    LogMelSpectrogram big;
    big.params = p;
    big.values.resize(600, 4);
    for (int t = 0; t < 600; ++t) big.values.row(t).setConstant(float(t));
    big.valid_frames = 600;
    const LogMelSpectrogram out = PadOrClip(big, 512);
    CHECK(out.n_frames() == 512);
    CHECK(out.valid_frames == 512);
    CHECK(out.values(0, 0) == 0.0f);
    CHECK(out.values(511, 0) == 511.0f);
  }
  SUBCASE("exact length is the identity") {
    const LogMelSpectrogram once = PadOrClip(s, 100);
    CHECK(once.n_frames() == 100);
    CHECK(once.valid_frames == 100);
    CHECK((once.values.array() == s.values.array()).all());
  }
  SUBCASE("idempotent at the target length") {
    const LogMelSpectrogram once = PadOrClip(s, 512);
    const LogMelSpectrogram twice = PadOrClip(once, 512);
    CHECK((once.values.array() == twice.values.array()).all());
    CHECK(once.valid_frames == twice.valid_frames);
  }
}

TEST_CASE("feature store round-trips bit-exactly") {
  Rng rng(17);
  FeatureStore store;
  FeatureParams p;
  p.n_mel_bands = 6;
  for (int i = 0; i < 5; ++i) {
    LogMelSpectrogram s;
    s.params = p;
    s.values.resize(10 + i, 6);
    for (int t = 0; t < s.n_frames(); ++t)
      for (int m = 0; m < 6; ++m)
        s.values(t, m) = static_cast<float>(rng.Normal());
    s.valid_frames = 10 + i;
    store.Put("utt" + std::to_string(i), std::move(s));
  }

  const fs::path dir = fs::temp_directory_path() / "protolex_store_test";
  fs::create_directories(dir);
  const fs::path file = dir / "store.plxf";
  store.Save(file);
  const FeatureStore loaded = FeatureStore::Load(file);
  REQUIRE(loaded.size() == store.size());
  for (const auto& id : store.ids()) {
    const auto& a = store.Get(id);
    const auto& b = loaded.Get(id);
    CHECK(a.valid_frames == b.valid_frames);
    REQUIRE(a.values.rows() == b.values.rows());
    // Bit-exact: compare through the float representation directly.
    CHECK((a.values.array() == b.values.array()).all());
    CHECK(a.params.log_floor == b.params.log_floor);
  }

  // Write twice: identical bytes.
  const fs::path file2 = dir / "store2.plxf";
  loaded.Save(file2);
  store.Save(file);
  std::ifstream fa(file, std::ios::binary), fb(file2, std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(fa)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(fb)), {});
  CHECK(bytes_a == bytes_b);
  fs::remove_all(dir);
}

TEST_CASE("feature store guards its format") {
  const fs::path dir = fs::temp_directory_path() / "protolex_store_guards";
  fs::create_directories(dir);
  const fs::path bad = dir / "bad.plxf";
  std::ofstream(bad, std::ios::binary) << "NOTAFORMAT";
  CHECK_THROWS_AS(FeatureStore::Load(bad), Error);

  // Truncated file: write a valid store, chop bytes off the end.
  FeatureStore store;
  FeatureParams p;
  p.n_mel_bands = 3;
  LogMelSpectrogram s;
  s.params = p;
  s.values = Eigen::MatrixXf::Ones(8, 3);
  s.valid_frames = 8;
  store.Put("x", std::move(s));
  const fs::path good = dir / "good.plxf";
  store.Save(good);
  std::ifstream in(good, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  in.close();
  bytes.resize(bytes.size() - 7);
  std::ofstream(dir / "trunc.plxf", std::ios::binary) << bytes;
  try {
    FeatureStore::Load(dir / "trunc.plxf");
    FAIL("expected corrupt-payload error");
  } catch (const Error& e) {
    CHECK(e.code() == err::kCorruptPayload);
  }
  fs::remove_all(dir);
}
