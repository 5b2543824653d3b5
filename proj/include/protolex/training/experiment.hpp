// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_TRAINING_EXPERIMENT_HPP_
#define PROTOLEX_TRAINING_EXPERIMENT_HPP_

#include <optional>
#include <string>
#include <vector>

#include "protolex/corpus/corpus.hpp"
#include "protolex/evaluation/metrics.hpp"
#include "protolex/features/feature_store.hpp"
#include "protolex/model/network.hpp"
#include "protolex/training/trainer.hpp"

namespace protolex::training {

// One experiment: a shared data protocol (stratified split, then
// attention-conditioned label noise on the train and validation records
// only; test labels stay clean) and a grid of (variant, training seed) runs.
struct ExperimentConfig {
  model::ModelConfig model;  // d_visual is filled from the manifest
  OptimizerConfig optimizer;
  std::vector<model::Variant> variants;
  std::vector<uint64_t> seeds;
  uint64_t data_seed = 1;  // split + label noise, shared across runs
  double train_frac = 0.8;
  double val_frac_of_train = 0.2;
  bool apply_attention_noise = true;
  DataGeometry geometry;
  evaluation::DetectionConfig detection =
      evaluation::DetectionConfig::Default();
  int n_threads = 1;

  void Validate() const;
};

struct RunResult {
  model::Variant variant = model::Variant::kFull;
  uint64_t seed = 0;
  bool failed = false;
  std::string error;
  TrainState state;
  evaluation::SweepResult sweep;  // test split, full gamma grid
  Eigen::MatrixXd test_posteriors;
  std::optional<model::Network> net;
};

struct ExperimentReport {
  corpus::SplitAssignment split;
  std::vector<int> test_labels;
  std::vector<std::string> test_ids;
  std::vector<int> train_label_counts;  // post-noise, for weights and priors
  std::vector<RunResult> runs;
};

// Trains every (variant, seed) pair and evaluates it on the clean test
// split. A diverging run is flagged as failed and the remaining runs
// continue. Logs go to `log` when given.
ExperimentReport RunExperiment(const corpus::CorpusManifest& manifest,
                               const features::FeatureStore& store,
                               const ExperimentConfig& config,
                               std::ostream* log);

// Seed-averaged macro curves per variant over the surviving runs.
struct AveragedCurve {
  model::Variant variant = model::Variant::kFull;
  int n_runs = 0;  // surviving runs averaged
  std::vector<double> gammas;
  std::vector<double> macro_precision;
  std::vector<double> macro_recall;
  std::vector<double> macro_f;
};

std::vector<AveragedCurve> AverageByVariant(
    const std::vector<RunResult>& runs);

}  // namespace protolex::training

#endif  // PROTOLEX_TRAINING_EXPERIMENT_HPP_
