// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_SRC_CLI_COMMANDS_HPP_
#define PROTOLEX_SRC_CLI_COMMANDS_HPP_

#include <filesystem>
#include <string>
#include <vector>

namespace protolex::cli {

namespace fs = std::filesystem;

struct EvaluateOptions {
  fs::path checkpoint;
  fs::path manifest;
  fs::path features;
  fs::path out_dir;
  fs::path split_file;       // optional
  std::string subset = "all";  // all | train | val | test
  std::vector<double> gamma_grid;  // empty = default grid
  int threads = 0;
};

struct ProbeOptions {
  fs::path checkpoint;
  fs::path features;
  fs::path alignments;
  fs::path out_dir;
  std::vector<std::string> layers;  // empty = all capturable layers
  std::string scalarize = "mean";   // mean | max
  double alpha = 0.05;
  int min_samples = 10;
};

struct QualityOptions {
  fs::path posteriors;
  fs::path out_file;
  std::string prior = "";   // "uniform" | "empirical" | "" (use prior_file)
  fs::path prior_file;      // JSON array of training-split label counts
};

void CmdSynth(const fs::path& spec_file, const fs::path& out_dir);
void CmdPrepare(const fs::path& manifest_path, const fs::path& audio_root,
                const fs::path& params_file, const fs::path& out_file);
void CmdTrain(const fs::path& config_file, const fs::path& manifest_path,
              const fs::path& features_path, const fs::path& out_dir,
              int threads);
void CmdEvaluate(const EvaluateOptions& options);
void CmdProbe(const ProbeOptions& options);
void CmdQuality(const QualityOptions& options);
void CmdReport(const fs::path& run_dir, const fs::path& out_dir);

// Entry point used by the binary; maps Error to a one-line JSON object on
// stderr and a nonzero exit status.
int Main(int argc, char** argv);

}  // namespace protolex::cli

#endif  // PROTOLEX_SRC_CLI_COMMANDS_HPP_
