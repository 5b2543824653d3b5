// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/training/losses.hpp"

#include <cmath>

#include "protolex/util/errors.hpp"

namespace protolex::training {

ClassWeights ClassWeights::Uniform(int n) {
  ClassWeights w;
  w.weight = Eigen::VectorXd::Ones(n);
  return w;
}

ClassWeights ComputeClassWeights(const std::vector<int>& label_counts) {
  require(!label_counts.empty(), err::kValidation, "no label counts");
  Eigen::VectorXd inv(static_cast<Eigen::Index>(label_counts.size()));
  for (size_t c = 0; c < label_counts.size(); ++c) {
    require(label_counts[c] >= 1, err::kValidation, "class ", c,
            " has no training records; cannot weight an absent class");
    inv(static_cast<Eigen::Index>(c)) = 1.0 / label_counts[c];
  }
  ClassWeights w;
  w.weight = inv * (static_cast<double>(inv.size()) / inv.sum());
  return w;
}

double VpLoss(const Eigen::VectorXd& posterior, const Eigen::VectorXd& target,
              const ClassWeights& weights) {
  require(posterior.size() == target.size() &&
              posterior.size() == weights.weight.size(),
          err::kConfigMismatch, "vp_loss dimension mismatch");
  require(target.minCoeff() >= 0.0 &&
              std::abs(target.sum() - 1.0) <= 1e-6,
          err::kValidation, "vp_loss target must be a distribution");
  double loss = 0.0;
  for (Eigen::Index c = 0; c < posterior.size(); ++c) {
    if (target(c) <= 0.0) continue;
    loss -= weights.weight(c) * target(c) *
            std::log(std::max(posterior(c), kPosteriorEpsilon));
  }
  return loss;
}

Eigen::VectorXd VpLossGrad(const Eigen::VectorXd& posterior,
                           const Eigen::VectorXd& target,
                           const ClassWeights& weights) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(posterior.size());
  for (Eigen::Index c = 0; c < posterior.size(); ++c) {
    if (target(c) <= 0.0) continue;
    if (posterior(c) <= kPosteriorEpsilon) continue;  // clamped region
    grad(c) = -weights.weight(c) * target(c) / posterior(c);
  }
  return grad;
}

double AeLoss(const Eigen::MatrixXd& reconstruction,
              const Eigen::MatrixXd& target, int valid_rows) {
  require(reconstruction.rows() == target.rows() &&
              reconstruction.cols() == target.cols(),
          err::kConfigMismatch, "ae_loss shape mismatch");
  require(valid_rows >= 1 && valid_rows <= reconstruction.rows(),
          err::kValidation, "ae_loss needs at least one unmasked frame");
  const auto diff = (reconstruction.topRows(valid_rows) -
                     target.topRows(valid_rows));
  const double n = static_cast<double>(valid_rows) * reconstruction.cols();
  return std::sqrt(diff.squaredNorm() / n);
}

Eigen::MatrixXd AeLossGrad(const Eigen::MatrixXd& reconstruction,
                           const Eigen::MatrixXd& target, int valid_rows) {
  const double rmse = AeLoss(reconstruction, target, valid_rows);
  Eigen::MatrixXd grad =
      Eigen::MatrixXd::Zero(reconstruction.rows(), reconstruction.cols());
  if (rmse <= 0.0) return grad;  // exact match: flat minimum
  const double n = static_cast<double>(valid_rows) * reconstruction.cols();
  grad.topRows(valid_rows) =
      (reconstruction.topRows(valid_rows) - target.topRows(valid_rows)) /
      (n * rmse);
  return grad;
}

Eigen::VectorXd OneHotTarget(int label, int n_classes) {
  require(label >= 0 && label < n_classes, err::kValidation,
          "label out of range: ", label);
  Eigen::VectorXd t = Eigen::VectorXd::Zero(n_classes);
  t(label) = 1.0;
  return t;
}

Eigen::VectorXd BagTarget(const std::vector<int>& labels, int n_classes) {
  require(!labels.empty(), err::kValidation, "empty label bag");
  Eigen::VectorXd t = Eigen::VectorXd::Zero(n_classes);
  for (int label : labels) {
    require(label >= 0 && label < n_classes, err::kValidation,
            "label out of range: ", label);
    t(label) += 1.0;
  }
  t /= t.sum();
  return t;
}

}  // namespace protolex::training
