// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/evaluation/metrics.hpp"

#include <cmath>

#include "protolex/util/errors.hpp"

namespace protolex::evaluation {

DetectionConfig DetectionConfig::Default() {
  DetectionConfig c;
  for (int i = 1; i <= 19; ++i) c.gamma_grid.push_back(0.05 * i);
  return c;
}

void DetectionConfig::Validate() const {
  require(!gamma_grid.empty(), err::kValidation, "gamma grid is empty");
  for (size_t i = 0; i < gamma_grid.size(); ++i) {
    require(gamma_grid[i] > 0.0 && gamma_grid[i] < 1.0, err::kValidation,
            "gamma must be in (0,1), got ", gamma_grid[i]);
    require(i == 0 || gamma_grid[i] > gamma_grid[i - 1], err::kValidation,
            "gamma grid must be strictly increasing");
  }
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> DetectWords(
    const Eigen::MatrixXd& utterance_posteriors, double gamma) {
  require(utterance_posteriors.minCoeff() >= 0.0 &&
              utterance_posteriors.maxCoeff() <= 1.0,
          err::kValidation, "posteriors must lie in [0,1]");
  return utterance_posteriors.array() > gamma;
}

MetricsRow Score(const Eigen::MatrixXd& utterance_posteriors,
                 const std::vector<int>& labels,
                 const corpus::VisualVocabulary& vocabulary, double gamma) {
  const Eigen::Index n = utterance_posteriors.rows();
  const int d = vocabulary.size();
  require(n >= 1, err::kValidation, "empty evaluation set");
  require(utterance_posteriors.cols() == d, err::kConfigMismatch,
          "posterior width ", utterance_posteriors.cols(),
          " != vocabulary size ", d);
  require(labels.size() == static_cast<size_t>(n), err::kConfigMismatch,
          "labels/posteriors size mismatch");

  const auto detections = DetectWords(utterance_posteriors, gamma);

  MetricsRow row;
  row.gamma = gamma;
  row.words.resize(static_cast<size_t>(d));
  for (int c = 0; c < d; ++c) row.words[static_cast<size_t>(c)].word =
      vocabulary.NameOf(c);

  for (Eigen::Index u = 0; u < n; ++u) {
    const int label = labels[static_cast<size_t>(u)];
    require(label >= 0 && label < d, err::kValidation,
            "label out of range: ", label);
    ++row.words[static_cast<size_t>(label)].support;
    for (int c = 0; c < d; ++c) {
      if (!detections(u, c)) continue;
      auto& w = row.words[static_cast<size_t>(c)];
      ++w.detections;
      if (c == label) ++w.hits;
    }
  }

  double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0;
  int counted = 0;
  for (auto& w : row.words) {
    w.recall = w.support > 0 ? static_cast<double>(w.hits) / w.support : 0.0;
    // Zero detections count as precision 0 for F purposes.
    w.precision =
        w.detections > 0 ? static_cast<double>(w.hits) / w.detections : 0.0;
    const double pr = w.precision + w.recall;
    w.f_score = pr > 0.0 ? 2.0 * w.precision * w.recall / pr : 0.0;
    if (w.support > 0) {  // words absent from the set stay out of the macro
      sum_p += w.precision;
      sum_r += w.recall;
      sum_f += w.f_score;
      ++counted;
    }
  }
  require(counted > 0, err::kValidation, "no word has a test target");
  row.macro_precision = sum_p / counted;
  row.macro_recall = sum_r / counted;
  row.macro_f = sum_f / counted;
  row.words_in_macro = counted;
  return row;
}

SweepResult GammaSweep(const Eigen::MatrixXd& utterance_posteriors,
                       const std::vector<int>& labels,
                       const corpus::VisualVocabulary& vocabulary,
                       const DetectionConfig& config) {
  config.Validate();
  SweepResult sweep;
  for (double gamma : config.gamma_grid)
    sweep.rows.push_back(Score(utterance_posteriors, labels, vocabulary,
                               gamma));
  double best = -1.0;
  for (size_t i = 0; i < sweep.rows.size(); ++i) {
    if (sweep.rows[i].macro_f > best) {  // strict >: ties keep smaller gamma
      best = sweep.rows[i].macro_f;
      sweep.best_index = static_cast<int>(i);
    }
  }
  sweep.best_gamma = sweep.rows[static_cast<size_t>(sweep.best_index)].gamma;
  return sweep;
}

Eigen::MatrixXd ConfusionMatrix::RowNormalized() const {
  Eigen::MatrixXd out = counts.cast<double>();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double s = out.row(r).sum();
    if (s > 0.0) out.row(r) /= s;
  }
  return out;
}

ConfusionMatrix Confusion(const Eigen::MatrixXd& utterance_posteriors,
                          const std::vector<int>& labels, int n_classes) {
  require(utterance_posteriors.rows() >= 1, err::kValidation,
          "need at least one utterance");
  require(labels.size() == static_cast<size_t>(utterance_posteriors.rows()),
          err::kConfigMismatch, "labels/posteriors size mismatch");
  ConfusionMatrix cm;
  cm.counts = Eigen::MatrixXi::Zero(n_classes, n_classes);
  cm.chance_level = 1.0 / n_classes;
  for (Eigen::Index u = 0; u < utterance_posteriors.rows(); ++u) {
    Eigen::Index pred;
    utterance_posteriors.row(u).maxCoeff(&pred);
    cm.counts(labels[static_cast<size_t>(u)], pred) += 1;
  }
  return cm;
}

std::vector<double> ExtractBoundaries(const Eigen::MatrixXd& frame_posteriors,
                                      int bottleneck_stride, double hop_ms) {
  require(bottleneck_stride >= 1 && hop_ms > 0.0, err::kValidation,
          "invalid bottleneck grid");
  std::vector<double> boundaries;
  if (frame_posteriors.rows() < 2) return boundaries;
  Eigen::Index prev;
  frame_posteriors.row(0).maxCoeff(&prev);
  for (Eigen::Index i = 1; i < frame_posteriors.rows(); ++i) {
    Eigen::Index cur;
    frame_posteriors.row(i).maxCoeff(&cur);
    if (cur != prev)
      boundaries.push_back(static_cast<double>(i) * bottleneck_stride *
                           hop_ms / 1000.0);
    prev = cur;
  }
  return boundaries;
}

}  // namespace protolex::evaluation
