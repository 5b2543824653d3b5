// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_EVALUATION_METRICS_HPP_
#define PROTOLEX_EVALUATION_METRICS_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "protolex/corpus/corpus.hpp"

namespace protolex::evaluation {

struct DetectionConfig {
  std::vector<double> gamma_grid;  // strictly increasing, in (0,1)

  static DetectionConfig Default();  // 0.05 : 0.05 : 0.95
  void Validate() const;
};

// detection(u, c) = posterior(u, c) > gamma (strictly).
Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> DetectWords(
    const Eigen::MatrixXd& utterance_posteriors, double gamma);

struct WordMetrics {
  std::string word;
  int support = 0;     // true targets in the evaluated set
  int detections = 0;  // all detections of this word
  int hits = 0;        // detections that are true targets
  double recall = 0.0;
  double precision = 0.0;
  double f_score = 0.0;
};

// One row of the metrics table: per-word measures at a threshold plus their
// unweighted (macro) means over words with at least one target.
struct MetricsRow {
  double gamma = 0.0;
  std::vector<WordMetrics> words;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f = 0.0;
  int words_in_macro = 0;
};

MetricsRow Score(const Eigen::MatrixXd& utterance_posteriors,
                 const std::vector<int>& labels,
                 const corpus::VisualVocabulary& vocabulary, double gamma);

struct SweepResult {
  std::vector<MetricsRow> rows;
  double best_gamma = 0.0;  // argmax macro F, ties to the smallest gamma
  int best_index = -1;
};

SweepResult GammaSweep(const Eigen::MatrixXd& utterance_posteriors,
                       const std::vector<int>& labels,
                       const corpus::VisualVocabulary& vocabulary,
                       const DetectionConfig& config);

struct ConfusionMatrix {
  Eigen::MatrixXi counts;  // rows = true class, cols = argmax prediction
  double chance_level = 0.0;

  Eigen::MatrixXd RowNormalized() const;
};

ConfusionMatrix Confusion(const Eigen::MatrixXd& utterance_posteriors,
                          const std::vector<int>& labels, int n_classes);

// Boundary times (seconds) where the frame-wise argmax referent changes
// between consecutive bottleneck frames. Frame i covers
// [i * stride * hop_ms, ...), so a change between frames i-1 and i puts the
// boundary at i * stride * hop_ms.
std::vector<double> ExtractBoundaries(const Eigen::MatrixXd& frame_posteriors,
                                      int bottleneck_stride, double hop_ms);

}  // namespace protolex::evaluation

#endif  // PROTOLEX_EVALUATION_METRICS_HPP_
