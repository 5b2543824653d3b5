// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>

#include "commands.hpp"
#include "protolex/util/errors.hpp"

namespace protolex::cli {

int Main(int argc, char** argv) {
  CLI::App app{"protolex: weakly-supervised audiovisual word learning"};
  app.require_subcommand(1);

  std::string spec_file, out_dir, manifest, features, audio_root;
  std::string params_file, config_file, checkpoint, split_file, subset = "all";
  std::string alignments, posteriors, prior, prior_file, out_file, scalarize =
      "mean";
  std::string run_dir;
  std::vector<double> gamma_grid;
  std::vector<std::string> layers;
  double alpha = 0.05;
  int min_samples = 10;
  int threads = 0;

  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic corpus (manifest + feature store)");
  synth->add_option("--spec", spec_file, "synthesis spec JSON")->required();
  synth->add_option("--out", out_dir, "output directory")->required();

  auto* prepare = app.add_subcommand(
      "prepare", "Extract log-Mel features for every manifest record");
  prepare->add_option("--manifest", manifest, "corpus manifest")->required();
  prepare->add_option("--audio-root", audio_root,
                      "directory resolving audio_ref paths")
      ->required();
  prepare->add_option("--params", params_file, "feature params JSON");
  prepare->add_option("--out", out_file, "output feature store")->required();

  auto* train = app.add_subcommand(
      "train", "Run the (variant x seed) training grid with evaluation");
  train->add_option("--config", config_file, "run config JSON")->required();
  train->add_option("--manifest", manifest, "corpus manifest")->required();
  train->add_option("--features", features, "feature store")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--threads", threads, "worker threads (default: env "
                                          "PROTOLEX_THREADS or hardware)");

  auto* evaluate = app.add_subcommand(
      "evaluate", "Score a checkpoint: metrics, confusion, posterior dump");
  evaluate->add_option("--checkpoint", checkpoint, "model checkpoint")
      ->required();
  evaluate->add_option("--manifest", manifest, "corpus manifest")->required();
  evaluate->add_option("--features", features, "feature store")->required();
  evaluate->add_option("--out", out_dir, "output directory")->required();
  evaluate->add_option("--split-file", split_file, "split assignment JSON");
  evaluate->add_option("--subset", subset, "train|val|test|all");
  evaluate->add_option("--gamma-grid", gamma_grid,
                       "explicit detection thresholds");
  evaluate->add_option("--threads", threads, "worker threads");

  auto* probe = app.add_subcommand(
      "probe", "Phone-selectivity analysis of hidden layers");
  probe->add_option("--checkpoint", checkpoint, "model checkpoint")
      ->required();
  probe->add_option("--features", features, "feature store")->required();
  probe->add_option("--alignments", alignments, "phone alignment file")
      ->required();
  probe->add_option("--out", out_dir, "output directory")->required();
  probe->add_option("--layers", layers, "layer ids (default: all)");
  probe->add_option("--scalarize", scalarize, "conv node scalar: mean|max");
  probe->add_option("--alpha", alpha, "t-test significance level");
  probe->add_option("--min-samples", min_samples,
                    "minimum samples per (node, phone)");

  auto* quality = app.add_subcommand(
      "quality", "Lexicon quality (normalized mutual information)");
  quality->add_option("--posteriors", posteriors, "posterior dump")
      ->required();
  quality->add_option("--prior", prior, "uniform|empirical");
  quality->add_option("--prior-file", prior_file,
                      "training label counts JSON");
  quality->add_option("--out", out_file, "output report JSON")->required();

  auto* report = app.add_subcommand(
      "report", "Aggregate seed-averaged curves over a training directory");
  report->add_option("--run-dir", run_dir, "cmd_train output directory")
      ->required();
  report->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) CmdSynth(spec_file, out_dir);
    if (prepare->parsed())
      CmdPrepare(manifest, audio_root, params_file, out_file);
    if (train->parsed())
      CmdTrain(config_file, manifest, features, out_dir, threads);
    if (evaluate->parsed()) {
      EvaluateOptions options;
      options.checkpoint = checkpoint;
      options.manifest = manifest;
      options.features = features;
      options.out_dir = out_dir;
      options.split_file = split_file;
      options.subset = subset;
      options.gamma_grid = gamma_grid;
      options.threads = threads;
      CmdEvaluate(options);
    }
    if (probe->parsed()) {
      ProbeOptions options;
      options.checkpoint = checkpoint;
      options.features = features;
      options.alignments = alignments;
      options.out_dir = out_dir;
      options.layers = layers;
      options.scalarize = scalarize;
      options.alpha = alpha;
      options.min_samples = min_samples;
      CmdProbe(options);
    }
    if (quality->parsed()) {
      QualityOptions options;
      options.posteriors = posteriors;
      options.prior = prior;
      options.prior_file = prior_file;
      options.out_file = out_file;
      CmdQuality(options);
    }
    if (report->parsed()) CmdReport(run_dir, out_dir);
  } catch (const Error& e) {
    nlohmann::json j{{"error", e.code()}, {"message", e.what()}};
    std::cerr << j.dump() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    nlohmann::json j{{"error", "internal"}, {"message", e.what()}};
    std::cerr << j.dump() << std::endl;
    return 2;
  }
  return 0;
}

}  // namespace protolex::cli

int main(int argc, char** argv) { return protolex::cli::Main(argc, argv); }
