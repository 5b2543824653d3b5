// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/evaluation/metrics.hpp"

#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "protolex/util/errors.hpp"
#include "protolex/util/rng.hpp"

using namespace protolex;
using namespace protolex::evaluation;
using corpus::VisualVocabulary;

TEST_CASE("detection thresholds are strict") {
  Eigen::MatrixXd post(2, 2);
  post << 0.30, 0.70, 0.0, 1.0;

  SUBCASE("gamma 0 detects every positive posterior") {
    const auto det = DetectWords(post, 0.0);
    CHECK(det(0, 0));
    CHECK(det(0, 1));
    CHECK_FALSE(det(1, 0));  // exactly zero is not "exceeded"
    CHECK(det(1, 1));
  }
  SUBCASE("gamma 1 detects nothing") {
    const auto det = DetectWords(post, 1.0);
    CHECK_FALSE(det.any());
  }
  SUBCASE("posterior equal to gamma is not detected") {
    const auto det = DetectWords(post, 0.30);
    CHECK_FALSE(det(0, 0));
    CHECK(det(0, 1));
  }
}

TEST_CASE("score reproduces the two-word hand count") {
  // Word A: 2 targets, both detected, plus 1 false alarm.
  // Word B: 1 target, missed, no detections.
  const VisualVocabulary vocab({"A", "B"});
  Eigen::MatrixXd post(4, 2);
  std::vector<int> labels = {0, 0, 1, 1};
  post << 0.9, 0.1,   // A target, detected as A
          0.8, 0.2,   // A target, detected as A
          0.7, 0.3,   // B target, false alarm for A, miss for B
          0.1, 0.2;   // B target, no detections
  const MetricsRow row = Score(post, labels, vocab, 0.5);

  const WordMetrics& a = row.words[0];
  CHECK(a.recall == doctest::Approx(1.0));
  CHECK(a.precision == doctest::Approx(2.0 / 3.0));
  CHECK(a.f_score == doctest::Approx(0.8));
  const WordMetrics& b = row.words[1];
  CHECK(b.recall == doctest::Approx(0.0));
  CHECK(b.precision == doctest::Approx(0.0));
  CHECK(b.f_score == doctest::Approx(0.0));
  CHECK(row.macro_f == doctest::Approx(0.4));
}

TEST_CASE("perfect separation scores 1 everywhere") {
  const VisualVocabulary vocab({"x", "y", "z"});
  Eigen::MatrixXd post = Eigen::MatrixXd::Zero(9, 3);
  std::vector<int> labels(9);
  for (int i = 0; i < 9; ++i) {
    labels[static_cast<size_t>(i)] = i % 3;
    post(i, i % 3) = 1.0;
  }
  const MetricsRow row = Score(post, labels, vocab, 0.5);
  CHECK(row.macro_precision == doctest::Approx(1.0));
  CHECK(row.macro_recall == doctest::Approx(1.0));
  CHECK(row.macro_f == doctest::Approx(1.0));
}

TEST_CASE("recall counts are integer multiples of 1/support") {
  Rng rng(3);
  const VisualVocabulary vocab({"a", "b", "c", "d"});
  Eigen::MatrixXd post(40, 4);
  std::vector<int> labels(40);
  for (int i = 0; i < 40; ++i) {
    labels[static_cast<size_t>(i)] = static_cast<int>(rng.UniformInt(4));
    for (int c = 0; c < 4; ++c) post(i, c) = rng.Uniform();
  }
  const MetricsRow row = Score(post, labels, vocab, 0.4);
  for (const auto& w : row.words) {
    if (w.support == 0) continue;
    const double scaled = w.recall * w.support;
    CHECK(std::abs(scaled - std::round(scaled)) < 1e-9);
  }
}

TEST_CASE("macro recall is non-increasing in gamma") {
  Rng rng(11);
  const VisualVocabulary vocab({"a", "b", "c", "d", "e"});
  Eigen::MatrixXd post(120, 5);
  std::vector<int> labels(120);
  for (int i = 0; i < 120; ++i) {
    labels[static_cast<size_t>(i)] = static_cast<int>(rng.UniformInt(5));
    for (int c = 0; c < 5; ++c) post(i, c) = rng.Uniform();
  }
  const SweepResult sweep =
      GammaSweep(post, labels, vocab, DetectionConfig::Default());
  REQUIRE(sweep.rows.size() == 19);
  for (size_t i = 1; i < sweep.rows.size(); ++i)
    CHECK(sweep.rows[i].macro_recall <=
          sweep.rows[i - 1].macro_recall + 1e-12);

  // Detections shrink monotonically too.
  const auto d_small = DetectWords(post, 0.2);
  const auto d_large = DetectWords(post, 0.6);
  for (int u = 0; u < 120; ++u)
    for (int c = 0; c < 5; ++c)
      if (d_large(u, c)) CHECK(d_small(u, c));
}

TEST_CASE("single-gamma sweep equals score") {
  Rng rng(13);
  const VisualVocabulary vocab({"a", "b"});
  Eigen::MatrixXd post(10, 2);
  std::vector<int> labels(10);
  for (int i = 0; i < 10; ++i) {
    labels[static_cast<size_t>(i)] = static_cast<int>(rng.UniformInt(2));
    post(i, 0) = rng.Uniform();
    post(i, 1) = rng.Uniform();
  }
  DetectionConfig cfg;
  cfg.gamma_grid = {0.3};
  const SweepResult sweep = GammaSweep(post, labels, vocab, cfg);
  const MetricsRow direct = Score(post, labels, vocab, 0.3);
  CHECK(sweep.rows.size() == 1);
  CHECK(sweep.best_gamma == 0.3);
  CHECK(sweep.rows[0].macro_f == doctest::Approx(direct.macro_f));
}

TEST_CASE("gamma ties resolve to the smallest gamma") {
  // All posteriors far from every grid point: metrics identical across
  // gammas in a range, so the best must be the first one.
  const VisualVocabulary vocab({"a", "b"});
  Eigen::MatrixXd post(4, 2);
  post << 0.99, 0.01, 0.99, 0.01, 0.01, 0.99, 0.01, 0.99;
  std::vector<int> labels = {0, 0, 1, 1};
  const SweepResult sweep =
      GammaSweep(post, labels, vocab, DetectionConfig::Default());
  CHECK(sweep.best_gamma == doctest::Approx(0.05));
}

TEST_CASE("per-word and macro metrics are invariant to duplicating every "
          "word's utterance set") {
  const VisualVocabulary vocab({"a", "b"});
  Eigen::MatrixXd post(6, 2);
  std::vector<int> labels = {0, 0, 1, 1, 1, 1};
  post << 0.9, 0.3, 0.4, 0.2, 0.3, 0.6, 0.2, 0.9, 0.5, 0.1, 0.6, 0.7;
  const MetricsRow base = Score(post, labels, vocab, 0.45);

  Eigen::MatrixXd post2(12, 2);
  post2 << post, post;
  std::vector<int> labels2 = labels;
  labels2.insert(labels2.end(), labels.begin(), labels.end());
  const MetricsRow dup = Score(post2, labels2, vocab, 0.45);
  for (size_t w = 0; w < base.words.size(); ++w) {
    CHECK(dup.words[w].precision == doctest::Approx(base.words[w].precision));
    CHECK(dup.words[w].recall == doctest::Approx(base.words[w].recall));
    CHECK(dup.words[w].f_score == doctest::Approx(base.words[w].f_score));
  }
  CHECK(dup.macro_f == doctest::Approx(base.macro_f));
  CHECK(dup.macro_precision == doctest::Approx(base.macro_precision));
  CHECK(dup.macro_recall == doctest::Approx(base.macro_recall));
}

TEST_CASE("confusion matrix: chance level, identity, row sums") {
  SUBCASE("chance level annotation") {
    Eigen::MatrixXd post = Eigen::MatrixXd::Constant(2, 60, 1.0 / 60);
    post(0, 3) = 0.5;
    post(1, 7) = 0.5;
    const ConfusionMatrix cm = Confusion(post, {3, 7}, 60);
    CHECK(cm.chance_level == doctest::Approx(1.0 / 60));
    CHECK(cm.chance_level * 100 == doctest::Approx(1.7).epsilon(0.02));
  }
  SUBCASE("perfect classifier is identity-supported") {
    Eigen::MatrixXd post = Eigen::MatrixXd::Zero(12, 4);
    std::vector<int> labels(12);
    for (int i = 0; i < 12; ++i) {
      labels[static_cast<size_t>(i)] = i % 4;
      post(i, i % 4) = 1.0;
    }
    const ConfusionMatrix cm = Confusion(post, labels, 4);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        CHECK(cm.counts(r, c) == (r == c ? 3 : 0));
  }
  SUBCASE("row counts equal class supports") {
    Rng rng(23);
    Eigen::MatrixXd post(200, 5);
    std::vector<int> labels(200);
    std::vector<int> support(5, 0);
    for (int i = 0; i < 200; ++i) {
      labels[static_cast<size_t>(i)] = static_cast<int>(rng.UniformInt(5));
      ++support[static_cast<size_t>(labels[static_cast<size_t>(i)])];
      for (int c = 0; c < 5; ++c) post(i, c) = rng.Uniform();
    }
    const ConfusionMatrix cm = Confusion(post, labels, 5);
    for (int r = 0; r < 5; ++r)
      CHECK(cm.counts.row(r).sum() == support[static_cast<size_t>(r)]);
  }
}

TEST_CASE("uniform random posteriors yield near-uniform confusion rows") {
  Rng rng(31);
  const int n = 20000, d = 6;
  Eigen::MatrixXd post(n, d);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[static_cast<size_t>(i)] = static_cast<int>(rng.UniformInt(d));
    for (int c = 0; c < d; ++c) post(i, c) = rng.Uniform();
  }
  const ConfusionMatrix cm = Confusion(post, labels, d);
  // Chi-squared goodness of fit per row against the uniform expectation.
  boost::math::chi_squared chi2(d - 1);
  for (int r = 0; r < d; ++r) {
    const double total = cm.counts.row(r).sum();
    const double expected = total / d;
    double stat = 0.0;
    for (int c = 0; c < d; ++c) {
      const double diff = cm.counts(r, c) - expected;
      stat += diff * diff / expected;
    }
    const double p = 1.0 - boost::math::cdf(chi2, stat);
    CHECK(p > 0.01);
  }
}

TEST_CASE("boundaries fall where the argmax changes") {
  SUBCASE("constant trajectory has no boundaries") {
    Eigen::MatrixXd fp(6, 3);
    for (int i = 0; i < 6; ++i) fp.row(i) << 0.7, 0.2, 0.1;
    CHECK(ExtractBoundaries(fp, 4, 10.0).empty());
  }
  SUBCASE("[a,a,b,b] with 40-ms frames puts one boundary at 0.08 s") {
    Eigen::MatrixXd fp(4, 2);
    fp << 0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.2, 0.8;
    const auto b = ExtractBoundaries(fp, 4, 10.0);
    REQUIRE(b.size() == 1);
    CHECK(b[0] == doctest::Approx(0.08));
  }
  SUBCASE("maximal alternation yields T-1 boundaries") {
    Eigen::MatrixXd fp(5, 2);
    for (int i = 0; i < 5; ++i)
      fp.row(i) << (i % 2 ? 0.9 : 0.1), (i % 2 ? 0.1 : 0.9);
    CHECK(ExtractBoundaries(fp, 4, 10.0).size() == 4);
  }
}
