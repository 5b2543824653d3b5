// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_SRC_CLI_COMMON_HPP_
#define PROTOLEX_SRC_CLI_COMMON_HPP_

#include <Eigen/Dense>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "protolex/corpus/corpus.hpp"
#include "protolex/corpus/synth.hpp"
#include "protolex/evaluation/metrics.hpp"
#include "protolex/features/logmel.hpp"
#include "protolex/training/experiment.hpp"

namespace protolex::cli {

namespace fs = std::filesystem;
using nlohmann::json;

json LoadJsonFile(const fs::path& path, const char* what);

// Configuration objects reject unknown keys so typos fail loudly.
void CheckKeys(const json& j, const std::vector<std::string>& allowed,
               const char* context);

corpus::SyntheticCorpusSpec ParseSynthSpec(const json& j);
features::FeatureParams ParseFeatureParams(const json& j);
model::ModelConfig ParseModelConfig(const json& j);
training::OptimizerConfig ParseOptimizerConfig(const json& j);
training::ExperimentConfig ParseRunConfig(const json& j);

// FNV-1a over the canonical (sorted-key) dump; stable across platforms.
uint64_t ConfigHash(const json& j);

// Every command leaves a sidecar with enough information to re-run it.
void WriteProvenance(const fs::path& out_dir, const std::string& command,
                     const json& inputs, const json& config);

// Split files: {"train_ids": [...], "val_ids": [...], "test_ids": [...]}.
void WriteSplit(const corpus::SplitAssignment& split, const fs::path& path);
corpus::SplitAssignment ReadSplit(const fs::path& path);

// Posterior dump: utterance_id, label, then one column per class.
void WritePosteriors(const fs::path& path,
                     const std::vector<std::string>& ids,
                     const std::vector<int>& labels,
                     const Eigen::MatrixXd& posteriors,
                     const std::vector<std::string>& class_names);

struct PosteriorDump {
  std::vector<std::string> ids;
  std::vector<int> labels;
  Eigen::MatrixXd posteriors;
  std::vector<std::string> class_names;
};
PosteriorDump ReadPosteriors(const fs::path& path);

// Per-word metric rows: word, gamma, precision, recall, f, support.
void WriteMetricsTable(const fs::path& path,
                       const std::vector<evaluation::MetricsRow>& rows);

void WriteConfusion(const fs::path& path, const evaluation::ConfusionMatrix& cm,
                    const std::vector<std::string>& class_names);

json SweepToJson(const evaluation::SweepResult& sweep);

}  // namespace protolex::cli

#endif  // PROTOLEX_SRC_CLI_COMMON_HPP_
