// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_TRAINING_TRAINER_HPP_
#define PROTOLEX_TRAINING_TRAINER_HPP_

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "protolex/corpus/corpus.hpp"
#include "protolex/features/feature_store.hpp"
#include "protolex/model/network.hpp"
#include "protolex/training/losses.hpp"

namespace protolex::training {

struct OptimizerConfig {
  double alpha = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int minibatch_size = 50;
  int patience = 10;
  int max_epochs = 200;  // divergence backstop per training phase
  double loss_mix = 1.0;  // lambda_AE, weight of the reconstruction term
  uint64_t seed = 1;

  void Validate() const;
};

struct TrainItem {
  model::BatchItem input;
  Eigen::VectorXd target;  // distribution over classes
};

// Target hop of the underlying features; the AE-pred shift is defined in
// milliseconds and must be converted on this grid.
struct DataGeometry {
  double hop_ms = 10.0;
};

struct EpochRow {
  int epoch = 0;  // 1-based, contiguous across pretrain and joint phases
  double vp_loss = 0.0;
  double ae_loss = 0.0;
  double val_loss = 0.0;
  double wall_s = 0.0;
};

struct TrainState {
  std::vector<EpochRow> history;
  int joint_start_epoch = 1;  // first epoch of the jointly-optimized phase
  int best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::string stopping_reason;

  // best_val must equal the minimum monitored loss over the joint phase.
  void Validate() const;
};

// Patience-based stopping on a monitored loss; improvement is a strictly
// smaller value. Record() returns true when `patience` consecutive epochs
// failed to improve.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  bool Record(double loss) {
    ++epoch_;
    if (loss < best_loss_) {
      best_loss_ = loss;
      best_epoch_ = epoch_;
      bad_streak_ = 0;
      return false;
    }
    return ++bad_streak_ >= patience_;
  }

  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int epoch_ = 0;
  int bad_streak_ = 0;
  int best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct ItemLossTerms {
  double vp = 0.0;
  double ae = 0.0;
};

// Loss (and optionally parameter gradients) of a single item under the
// current parameters: vp + loss_mix * ae, with the AE target being the input
// spectrum itself, or the pred_shift_ms-ahead spectrum for AE-pred. Pass
// dropout_seed = 0 for the deterministic loss (validation, gradient
// verification). `vp_enabled` is cleared during AE pretraining.
ItemLossTerms ComputeItem(const model::Network& net, const TrainItem& item,
                          const ClassWeights& weights, double loss_mix,
                          bool vp_enabled, const DataGeometry& geometry,
                          model::Network::Cache& cache, uint64_t dropout_seed,
                          model::GradientSet* grads);

// Full optimization loop: minibatch Adam on vp + loss_mix * ae + L2, with
// dropout at the three standard sites, early stopping on the validation
// loss, and best-epoch parameter restoration. The AE-pretrain variant first
// optimizes the AE path alone to early stopping, then the joint objective.
// Deterministic for a fixed seed, also when n_threads > 1.
TrainState Train(model::Network& net, const std::vector<TrainItem>& train,
                 const std::vector<TrainItem>& val,
                 const ClassWeights& weights, const OptimizerConfig& opt,
                 const DataGeometry& geometry, int n_threads,
                 std::ostream* log);

// Pads the records' spectrograms to the model geometry and attaches one-hot
// targets.
std::vector<TrainItem> BuildItems(
    const std::vector<corpus::UtteranceRecord>& records,
    const features::FeatureStore& store, const model::ModelConfig& config);

void WriteHistory(const TrainState& state, std::ostream& os);

}  // namespace protolex::training

#endif  // PROTOLEX_TRAINING_TRAINER_HPP_
