// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/corpus/synth.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "protolex/util/errors.hpp"
#include "protolex/util/rng.hpp"

namespace protolex::corpus {

namespace {

constexpr double kFloorLog = -10.0;  // ambient floor and pad level
constexpr double kBaseLevel = -9.0;

struct Atom {
  double t0, f0;        // center (frames, bands)
  double sigma_t, sigma_f;
  double omega_t, omega_f;  // modulation (cycles per frame / band)
  double phase;
  double amplitude;
};

// Renders an atom into grid rows [t_begin, t_end). Keyword atoms are clipped
// to their keyword span so that placement is a pure shift of the pattern.
void RenderAtom(Eigen::MatrixXf& grid, const Atom& a, int t_offset,
                int t_begin, int t_end, double band_shift, double gain) {
  const int B = static_cast<int>(grid.cols());
  for (int t = t_begin; t < t_end; ++t) {
    const double dt = (t - t_offset) - a.t0;
    if (std::abs(dt) > 4.0 * a.sigma_t) continue;
    for (int f = 0; f < B; ++f) {
      const double df = f - (a.f0 + band_shift);
      if (std::abs(df) > 4.0 * a.sigma_f) continue;
      const double envelope =
          std::exp(-0.5 * (dt * dt / (a.sigma_t * a.sigma_t) +
                           df * df / (a.sigma_f * a.sigma_f)));
      const double carrier =
          0.55 + 0.45 * std::cos(2.0 * M_PI *
                                     (a.omega_t * dt + a.omega_f * df) +
                                 a.phase);
      grid(t, f) += static_cast<float>(gain * a.amplitude * envelope *
                                       carrier);
    }
  }
}

// Keyword pattern of one class: a strong anchor atom whose center band and
// chirp are spread over classes by a low-discrepancy sequence, plus two
// class-random support atoms.
std::vector<Atom> ClassTemplate(const SyntheticCorpusSpec& spec, int c,
                                int kw_frames) {
  constexpr double kGolden = 0.61803398874989484820;
  std::vector<Atom> atoms;
  const double band_span = std::max(1.0, spec.n_mel_bands - 5.0);
  const double center =
      2.0 + band_span * std::fmod(0.5 + c * kGolden, 1.0);
  Atom anchor;
  anchor.t0 = kw_frames / 2.0;
  anchor.f0 = center;
  anchor.sigma_t = kw_frames / 3.5;
  anchor.sigma_f = 1.2 + 0.6 * (c % 3);
  anchor.omega_t = 0.05 + 0.04 * (c % 4);
  anchor.omega_f = 0.15 * ((c % 3) - 1);
  anchor.phase = 0.0;
  anchor.amplitude = 3.2;
  atoms.push_back(anchor);

  Rng rng(Rng::Derive(spec.seed, {1, static_cast<uint64_t>(c)}));
  for (int i = 0; i < 2; ++i) {
    Atom a;
    a.t0 = rng.Uniform(0.25, 0.75) * kw_frames;
    a.f0 = rng.Uniform(1.5, spec.n_mel_bands - 2.5);
    a.sigma_t = rng.Uniform(kw_frames / 8.0, kw_frames / 4.0);
    a.sigma_f = rng.Uniform(0.8, 1.8);
    a.omega_t = rng.Uniform(0.0, 0.12);
    a.omega_f = rng.Uniform(-0.2, 0.2);
    a.phase = rng.Uniform(0.0, 2.0 * M_PI);
    a.amplitude = rng.Uniform(1.6, 2.4);
    atoms.push_back(a);
  }
  return atoms;
}

// Smoothed Gaussian noise carrier; separable box blur keeps it cheap.
void AddCarrier(Eigen::MatrixXf& grid, double level, Rng& rng) {
  if (level <= 0.0) return;
  const int T = static_cast<int>(grid.rows());
  const int B = static_cast<int>(grid.cols());
  Eigen::MatrixXd noise(T, B);
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < B; ++f) noise(t, f) = rng.Normal();
  Eigen::MatrixXd blurred = Eigen::MatrixXd::Zero(T, B);
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < B; ++f) {
      double acc = 0.0;
      int n = 0;
      for (int dt = -2; dt <= 2; ++dt) {
        const int tt = t + dt;
        if (tt < 0 || tt >= T) continue;
        for (int df = -1; df <= 1; ++df) {
          const int ff = f + df;
          if (ff < 0 || ff >= B) continue;
          acc += noise(tt, ff);
          ++n;
        }
      }
      blurred(t, f) = acc / n;
    }
  }
  // Box blur shrinks the variance; rescale so `level` is the output sigma.
  grid += (level * std::sqrt(15.0) * blurred).cast<float>();
}

}  // namespace

void SyntheticCorpusSpec::Validate() const {
  require(n_classes >= 2, err::kValidation, "n_classes must be >= 2");
  require(n_utterances >= 1, err::kValidation, "n_utterances must be >= 1");
  require(attention_rate >= 0.0 && attention_rate <= 1.0, err::kValidation,
          "attention_rate must be in [0,1]");
  require(utterance_duration_range_s.first > 0.0 &&
              utterance_duration_range_s.second >=
                  utterance_duration_range_s.first,
          err::kValidation, "utterance duration range must be positive and "
                            "ordered");
  require(keyword_duration_s > 0.0 &&
              keyword_duration_s <= utterance_duration_range_s.first,
          err::kValidation, "keyword duration ", keyword_duration_s,
          "s exceeds the minimum utterance duration ",
          utterance_duration_range_s.first, "s");
  require(n_speakers >= 1, err::kValidation, "n_speakers must be >= 1");
  require(carrier_noise_level >= 0.0, err::kValidation,
          "carrier_noise_level must be >= 0");
  require(n_mel_bands >= 6, err::kValidation,
          "need at least 6 bands for discriminable templates");
  require(hop_ms > 0.0, err::kValidation, "hop_ms must be > 0");
}

SyntheticCorpus GenerateSyntheticCorpus(const SyntheticCorpusSpec& spec) {
  spec.Validate();

  const int kw_frames = std::max(
      2, static_cast<int>(std::lround(spec.keyword_duration_s * 1000.0 /
                                      spec.hop_ms)));

  std::vector<std::vector<Atom>> templates;
  templates.reserve(spec.n_classes);
  for (int c = 0; c < spec.n_classes; ++c)
    templates.push_back(ClassTemplate(spec, c, kw_frames));

  // Speaker affine perturbations; a single speaker is the identity.
  std::vector<double> band_shift(spec.n_speakers, 0.0);
  std::vector<double> gain(spec.n_speakers, 1.0);
  if (spec.n_speakers > 1) {
    for (int s = 0; s < spec.n_speakers; ++s) {
      const double d = 2.0 * s / (spec.n_speakers - 1) - 1.0;
      band_shift[s] = spec.speaker_shift_strength * d;
      gain[s] = 1.0 + 0.1 * spec.speaker_shift_strength * d;
    }
  }

  features::FeatureParams params;
  params.sample_rate_hz = 16000;
  params.window_ms = 25.0;
  params.hop_ms = spec.hop_ms;
  params.n_mel_bands = spec.n_mel_bands;
  params.mel_fmin_hz = 0.0;
  params.mel_fmax_hz = 8000.0;
  params.log_floor = std::exp(kFloorLog);

  std::vector<std::string> class_names;
  class_names.reserve(spec.n_classes);
  for (int c = 0; c < spec.n_classes; ++c) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "obj%02d", c);
    class_names.emplace_back(buf);
  }

  SyntheticCorpus out;
  out.manifest.vocabulary = VisualVocabulary(class_names);
  out.manifest.metadata["generator"] = "synthetic";
  out.manifest.metadata["seed"] = std::to_string(spec.seed);

  for (int u = 0; u < spec.n_utterances; ++u) {
    Rng rng(Rng::Derive(spec.seed, {3, static_cast<uint64_t>(u)}));
    const int label = u % spec.n_classes;  // balanced class coverage
    const int speaker = static_cast<int>(rng.UniformInt(spec.n_speakers));
    const double duration = rng.Uniform(spec.utterance_duration_range_s.first,
                                        spec.utterance_duration_range_s.second);
    const int frames = std::max(
        kw_frames, static_cast<int>(std::lround(duration * 1000.0 /
                                                spec.hop_ms)));
    const bool attended = rng.Bernoulli(spec.attention_rate);
    const int onset =
        static_cast<int>(rng.UniformInt(frames - kw_frames + 1));

    Eigen::MatrixXf grid(frames, spec.n_mel_bands);
    grid.setConstant(static_cast<float>(kBaseLevel));
    AddCarrier(grid, spec.carrier_noise_level, rng);

    const int n_distractors = 1 + static_cast<int>(rng.UniformInt(3));
    for (int k = 0; k < n_distractors; ++k) {
      Atom a;
      a.t0 = rng.Uniform(0.0, frames);
      a.f0 = rng.Uniform(1.0, spec.n_mel_bands - 2.0);
      a.sigma_t = rng.Uniform(2.0, kw_frames / 3.0);
      a.sigma_f = rng.Uniform(0.7, 1.6);
      a.omega_t = rng.Uniform(0.0, 0.15);
      a.omega_f = rng.Uniform(-0.25, 0.25);
      a.phase = rng.Uniform(0.0, 2.0 * M_PI);
      // Distractors ride on the noise budget: a clean corpus has none.
      a.amplitude = 1.5 * spec.carrier_noise_level;
      if (a.amplitude > 0.0) RenderAtom(grid, a, 0, 0, frames, 0.0, 1.0);
    }

    for (const Atom& a : templates[static_cast<size_t>(label)])
      RenderAtom(grid, a, onset, onset, onset + kw_frames,
                 band_shift[static_cast<size_t>(speaker)],
                 gain[static_cast<size_t>(speaker)]);

    grid = grid.cwiseMax(static_cast<float>(kFloorLog));

    char idbuf[24];
    std::snprintf(idbuf, sizeof(idbuf), "synth-%05d", u);
    UtteranceRecord r;
    r.utterance_id = idbuf;
    r.audio_ref = idbuf;  // features are materialized, no audio backing
    r.label = label;
    r.attended = attended;
    r.speaker_id = "spk" + std::to_string(speaker);
    r.duration_s = frames * spec.hop_ms / 1000.0;
    out.manifest.records.push_back(std::move(r));

    features::LogMelSpectrogram s;
    s.values = std::move(grid);
    s.valid_frames = frames;
    s.params = params;
    out.store.Put(idbuf, std::move(s));
  }
  out.manifest.Validate();
  return out;
}

}  // namespace protolex::corpus
