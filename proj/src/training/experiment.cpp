// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/training/experiment.hpp"

#include <ostream>

#include "protolex/util/errors.hpp"
#include "protolex/util/parallel.hpp"
#include "protolex/util/rng.hpp"

namespace protolex::training {

void ExperimentConfig::Validate() const {
  require(!variants.empty(), err::kValidation, "no variants requested");
  require(!seeds.empty(), err::kValidation, "no seeds requested");
  optimizer.Validate();
  detection.Validate();
  require(train_frac > 0.0 && train_frac < 1.0, err::kValidation,
          "train_frac must be in (0,1)");
  require(val_frac_of_train >= 0.0 && val_frac_of_train < 1.0,
          err::kValidation, "val_frac_of_train must be in [0,1)");
}

ExperimentReport RunExperiment(const corpus::CorpusManifest& manifest,
                               const features::FeatureStore& store,
                               const ExperimentConfig& config,
                               std::ostream* log) {
  config.Validate();
  manifest.Validate();
  model::ModelConfig model_config = config.model;
  model_config.d_visual = manifest.vocabulary.size();
  model_config.Validate();

  ExperimentReport report;
  report.split = corpus::StratifiedSplit(manifest, config.train_frac,
                                         config.val_frac_of_train,
                                         config.data_seed);

  // The data protocol is fixed once: noise hits train and validation labels
  // (the model never sees clean supervision), the test labels stay clean.
  corpus::CorpusManifest noisy_pool;
  noisy_pool.vocabulary = manifest.vocabulary;
  {
    corpus::CorpusManifest pool = noisy_pool;
    std::vector<std::string> pool_ids = report.split.train_ids;
    pool_ids.insert(pool_ids.end(), report.split.val_ids.begin(),
                    report.split.val_ids.end());
    pool.records = corpus::SelectRecords(manifest, pool_ids);
    noisy_pool = config.apply_attention_noise
                     ? corpus::ApplyAttentionNoise(
                           pool, Rng::Derive(config.data_seed, {0x4e4f495345}))
                     : pool;
  }

  std::vector<corpus::UtteranceRecord> train_records =
      corpus::SelectRecords(noisy_pool, report.split.train_ids);
  std::vector<corpus::UtteranceRecord> val_records =
      corpus::SelectRecords(noisy_pool, report.split.val_ids);
  std::vector<corpus::UtteranceRecord> test_records =
      corpus::SelectRecords(manifest, report.split.test_ids);

  report.train_label_counts.assign(manifest.vocabulary.size(), 0);
  for (const auto& r : train_records) ++report.train_label_counts[r.label];
  const ClassWeights weights =
      ComputeClassWeights(report.train_label_counts);

  const std::vector<TrainItem> train_items =
      BuildItems(train_records, store, model_config);
  const std::vector<TrainItem> val_items =
      BuildItems(val_records, store, model_config);
  const std::vector<TrainItem> test_items =
      BuildItems(test_records, store, model_config);
  for (const auto& r : test_records) {
    report.test_labels.push_back(r.label);
    report.test_ids.push_back(r.utterance_id);
  }

  for (model::Variant variant : config.variants) {
    for (uint64_t seed : config.seeds) {
      RunResult run;
      run.variant = variant;
      run.seed = seed;
      if (log)
        (*log) << "--- run variant=" << model::VariantName(variant)
               << " seed=" << seed << "\n";
      try {
        model::ModelConfig run_config = model_config;
        run_config.variant = variant;
        model::Network net(run_config, seed);

        OptimizerConfig opt = config.optimizer;
        opt.seed = Rng::Derive(seed, {0x545241494e});
        run.state = Train(net, train_items, val_items, weights, opt,
                          config.geometry, config.n_threads, log);

        // Clean-test evaluation.
        run.test_posteriors.resize(static_cast<Eigen::Index>(
                                       test_items.size()),
                                   model_config.d_visual);
        ParallelFor(test_items.size(), config.n_threads,
                    [&](size_t i, int) {
                      const model::ForwardOutputs out =
                          net.Forward(test_items[i].input);
                      run.test_posteriors.row(static_cast<Eigen::Index>(i)) =
                          out.utterance_posterior.transpose();
                    });
        run.sweep = evaluation::GammaSweep(run.test_posteriors,
                                           report.test_labels,
                                           manifest.vocabulary,
                                           config.detection);
        run.net.emplace(std::move(net));
      } catch (const Error& e) {
        run.failed = true;
        run.error = std::string(e.code()) + ": " + e.what();
        if (log) (*log) << "run failed: " << run.error << "\n";
      }
      report.runs.push_back(std::move(run));
    }
  }
  return report;
}

std::vector<AveragedCurve> AverageByVariant(
    const std::vector<RunResult>& runs) {
  std::vector<AveragedCurve> curves;
  for (const RunResult& run : runs) {
    if (run.failed) continue;
    AveragedCurve* curve = nullptr;
    for (auto& c : curves)
      if (c.variant == run.variant) curve = &c;
    if (!curve) {
      curves.push_back({});
      curve = &curves.back();
      curve->variant = run.variant;
      for (const auto& row : run.sweep.rows) {
        curve->gammas.push_back(row.gamma);
        curve->macro_precision.push_back(0.0);
        curve->macro_recall.push_back(0.0);
        curve->macro_f.push_back(0.0);
      }
    }
    require(curve->gammas.size() == run.sweep.rows.size(),
            err::kValidation, "gamma grids differ between runs");
    for (size_t i = 0; i < run.sweep.rows.size(); ++i) {
      curve->macro_precision[i] += run.sweep.rows[i].macro_precision;
      curve->macro_recall[i] += run.sweep.rows[i].macro_recall;
      curve->macro_f[i] += run.sweep.rows[i].macro_f;
    }
    ++curve->n_runs;
  }
  for (auto& c : curves) {
    for (size_t i = 0; i < c.gammas.size(); ++i) {
      c.macro_precision[i] /= c.n_runs;
      c.macro_recall[i] /= c.n_runs;
      c.macro_f[i] /= c.n_runs;
    }
  }
  return curves;
}

}  // namespace protolex::training
