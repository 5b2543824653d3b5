// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_TRAINING_LOSSES_HPP_
#define PROTOLEX_TRAINING_LOSSES_HPP_

#include <Eigen/Dense>
#include <vector>

namespace protolex::training {

// Inverse-frequency class weights rescaled to mean 1.
struct ClassWeights {
  Eigen::VectorXd weight;

  static ClassWeights Uniform(int n);
};

ClassWeights ComputeClassWeights(const std::vector<int>& label_counts);

// Weighted categorical cross-entropy against the utterance-level posterior
// (natural log; posteriors clamped at kPosteriorEpsilon before the log).
inline constexpr double kPosteriorEpsilon = 1e-12;

double VpLoss(const Eigen::VectorXd& posterior, const Eigen::VectorXd& target,
              const ClassWeights& weights);
Eigen::VectorXd VpLossGrad(const Eigen::VectorXd& posterior,
                           const Eigen::VectorXd& target,
                           const ClassWeights& weights);

// RMSE over the first valid_rows rows (padded frames are excluded).
double AeLoss(const Eigen::MatrixXd& reconstruction,
              const Eigen::MatrixXd& target, int valid_rows);
Eigen::MatrixXd AeLossGrad(const Eigen::MatrixXd& reconstruction,
                           const Eigen::MatrixXd& target, int valid_rows);

// Builds a one-hot (or, for multi-referent label bags, uniform multi-hot)
// target distribution.
Eigen::VectorXd OneHotTarget(int label, int n_classes);
Eigen::VectorXd BagTarget(const std::vector<int>& labels, int n_classes);

}  // namespace protolex::training

#endif  // PROTOLEX_TRAINING_LOSSES_HPP_
