// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/infotheory/infotheory.hpp"

#include <cmath>

#include "protolex/util/errors.hpp"

namespace protolex::infotheory {

void JointDistribution::Validate(double tol) const {
  require(p.rows() >= 1 && p.cols() >= 1, err::kValidation,
          "joint distribution must be non-empty");
  require(p.minCoeff() >= 0.0, err::kValidation,
          "joint distribution has a negative entry");
  const double total = p.sum();
  require(std::abs(total - 1.0) <= tol, err::kValidation,
          "joint distribution sums to ", total, ", expected 1");
}

double MutualInformationBits(const JointDistribution& joint) {
  joint.Validate();
  const Eigen::VectorXd row_marginal = joint.p.rowwise().sum();
  const Eigen::VectorXd col_marginal = joint.p.colwise().sum();
  double mi = 0.0;
  for (Eigen::Index w = 0; w < joint.p.rows(); ++w) {
    for (Eigen::Index c = 0; c < joint.p.cols(); ++c) {
      const double pwc = joint.p(w, c);
      if (pwc <= 0.0) continue;  // 0 log 0 == 0
      mi += pwc * std::log2(pwc / (row_marginal(w) * col_marginal(c)));
    }
  }
  // Tiny negative values are roundoff around independence.
  return mi < 0.0 && mi > -1e-12 ? 0.0 : mi;
}

LexiconQuality LexiconQualityOfJoint(const JointDistribution& joint) {
  const double rows = static_cast<double>(joint.p.rows());
  const double cols = static_cast<double>(joint.p.cols());
  const double normalizer = std::max(std::log2(rows), std::log2(cols));
  require(normalizer > 0.0, err::kValidation,
          "degenerate 1x1 joint: normalizer is 0");
  LexiconQuality out;
  out.mi_bits = MutualInformationBits(joint);
  out.normalizer_bits = normalizer;
  out.q = out.mi_bits / normalizer;
  return out;
}

LexiconQuality ModelQualityFromPosteriors(const Eigen::MatrixXd& posteriors,
                                          const Eigen::VectorXd& class_prior) {
  const Eigen::Index n = posteriors.rows();
  const Eigen::Index d = posteriors.cols();
  require(n >= 1, err::kValidation, "no utterances in posterior matrix");
  require(d >= 2, err::kValidation, "need at least 2 classes");
  require(class_prior.size() == d, err::kConfigMismatch,
          "prior size ", class_prior.size(), " != posterior classes ", d);
  require(class_prior.minCoeff() >= 0.0, err::kValidation,
          "class prior has a negative entry");
  require(std::abs(class_prior.sum() - 1.0) <= 1e-6, err::kValidation,
          "class prior must sum to 1");

  LexiconQuality out;
  out.renormalized = true;
  double mi = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd row = posteriors.row(i).cwiseMax(0.0);
    const double s = row.sum();
    require(s > 0.0, err::kValidation, "posterior row ", i, " sums to 0");
    row /= s;
    for (Eigen::Index c = 0; c < d; ++c) {
      const double pc = row(c);
      if (pc <= 0.0) continue;
      if (class_prior(c) <= 0.0) {
        ++out.skipped_cells;
        continue;
      }
      mi += pc * std::log2(pc / class_prior(c));
    }
  }
  mi /= static_cast<double>(n);
  if (mi < 0.0 && mi > -1e-12) mi = 0.0;
  out.mi_bits = mi;
  out.normalizer_bits = std::log2(static_cast<double>(d));
  out.q = out.mi_bits / out.normalizer_bits;
  return out;
}

JointDistribution EmpiricalPredictionJoint(const Eigen::MatrixXd& posteriors,
                                           const std::vector<int>& labels,
                                           int n_classes) {
  require(posteriors.rows() == static_cast<Eigen::Index>(labels.size()),
          err::kConfigMismatch, "posteriors/labels size mismatch");
  require(n_classes >= 2, err::kValidation, "need at least 2 classes");
  JointDistribution joint;
  joint.p = Eigen::MatrixXd::Zero(n_classes, n_classes);
  for (Eigen::Index i = 0; i < posteriors.rows(); ++i) {
    Eigen::Index pred;
    posteriors.row(i).maxCoeff(&pred);
    const int label = labels[static_cast<size_t>(i)];
    require(label >= 0 && label < n_classes, err::kValidation,
            "label out of range: ", label);
    joint.p(pred, label) += 1.0;
  }
  joint.p /= joint.p.sum();
  return joint;
}

}  // namespace protolex::infotheory
