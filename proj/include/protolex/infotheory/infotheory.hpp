// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_INFOTHEORY_INFOTHEORY_HPP_
#define PROTOLEX_INFOTHEORY_INFOTHEORY_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace protolex::infotheory {

// Discrete joint distribution over (word, referent) pairs. Rows are words,
// columns are referents; entries must be nonnegative and sum to 1.
struct JointDistribution {
  Eigen::MatrixXd p;
  std::vector<std::string> row_labels;  // optional, may be empty
  std::vector<std::string> col_labels;  // optional, may be empty

  void Validate(double tol = 1e-9) const;
};

// Normalized lexicon quality. q = mi_bits / normalizer_bits, in [0, 1].
struct LexiconQuality {
  double mi_bits = 0.0;
  double normalizer_bits = 0.0;
  double q = 0.0;
  // Estimator bookkeeping for the model-based variant.
  int skipped_cells = 0;
  bool renormalized = false;
};

// Mutual information of the joint, in bits. Cells with p = 0 contribute 0.
double MutualInformationBits(const JointDistribution& joint);

// Quality of an explicit lexicon: MI normalized by max(log2 |L|, log2 |C|).
LexiconQuality LexiconQualityOfJoint(const JointDistribution& joint);

// Plug-in quality estimate for a trained model from per-utterance referent
// posteriors. Rows of `posteriors` are renormalized to sum to 1 (the
// utterance-level scores come from max-pooling and are not a distribution),
// then MI is estimated as the empirical average of
//   sum_c P(c|X_i) log2( P(c|X_i) / prior(c) )
// and normalized by log2 |C|. `class_prior` is typically the training-split
// label frequency. Cells with a zero prior but nonzero posterior mass are
// skipped and counted in the result.
LexiconQuality ModelQualityFromPosteriors(const Eigen::MatrixXd& posteriors,
                                          const Eigen::VectorXd& class_prior);

// Empirical joint of (argmax prediction, true label), normalized to sum to 1.
// Used as a discrete companion estimate next to the plug-in value.
JointDistribution EmpiricalPredictionJoint(const Eigen::MatrixXd& posteriors,
                                           const std::vector<int>& labels,
                                           int n_classes);

}  // namespace protolex::infotheory

#endif  // PROTOLEX_INFOTHEORY_INFOTHEORY_HPP_
