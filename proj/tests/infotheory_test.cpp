// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/infotheory/infotheory.hpp"

#include <doctest.h>

#include <cmath>

#include "common/test_oracles.hpp"
#include "protolex/util/errors.hpp"
#include "protolex/util/rng.hpp"

using protolex::Rng;
using namespace protolex::infotheory;

namespace {

JointDistribution MakeJoint(const Eigen::MatrixXd& p) {
  JointDistribution j;
  j.p = p;
  return j;
}

}  // namespace

TEST_CASE("product distribution has zero mutual information") {
  Eigen::VectorXd pw(3), pc(4);
  pw << 0.2, 0.5, 0.3;
  pc << 0.1, 0.4, 0.25, 0.25;
  const JointDistribution j = MakeJoint(pw * pc.transpose());
  CHECK(MutualInformationBits(j) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("diagonal uniform KxK carries log2 K bits and q = 1") {
  for (int k : {2, 4, 7}) {
    const JointDistribution j =
        MakeJoint(Eigen::MatrixXd::Identity(k, k) / k);
    CHECK(MutualInformationBits(j) ==
          doctest::Approx(std::log2(k)).epsilon(1e-12));
    const LexiconQuality q = LexiconQualityOfJoint(j);
    CHECK(q.q == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("2x2 worked example") {
  Eigen::MatrixXd p(2, 2);
  p << 0.4, 0.1, 0.1, 0.4;
  const JointDistribution j = MakeJoint(p);
  const double mi = MutualInformationBits(j);
  CHECK(mi == doctest::Approx(0.27807190511263774).epsilon(1e-10));
  const LexiconQuality q = LexiconQualityOfJoint(j);
  CHECK(q.normalizer_bits == doctest::Approx(1.0));
  CHECK(q.q == doctest::Approx(mi));
}

TEST_CASE("matches the brute-force double-sum oracle on random joints") {
  Rng rng(20260810);
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = 2 + static_cast<int>(rng.UniformInt(19));
    const int cols = 2 + static_cast<int>(rng.UniformInt(19));
    Eigen::MatrixXd p(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        p(r, c) = rng.Uniform() < 0.15 ? 0.0 : rng.Uniform();
    p(0, 0) += 1e-3;  // ensure a nonzero mass
    p /= p.sum();
    const JointDistribution j = MakeJoint(p);
    const double got = MutualInformationBits(j);
    const double want = protolex::testing::BruteForceMiBits(p);
    CHECK(std::abs(got - want) < 1e-9);
    CHECK(got >= 0.0);
    CHECK(got <= std::min(std::log2(rows), std::log2(cols)) + 1e-9);
  }
}

TEST_CASE("mutual information is symmetric under transposition") {
  Rng rng(7);
  Eigen::MatrixXd p(5, 3);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 3; ++c) p(r, c) = rng.Uniform();
  p /= p.sum();
  CHECK(MutualInformationBits(MakeJoint(p)) ==
        doctest::Approx(MutualInformationBits(MakeJoint(p.transpose())))
            .epsilon(1e-12));
}

TEST_CASE("invalid joints are rejected") {
  Eigen::MatrixXd p(2, 2);
  p << 0.5, 0.5, 0.5, 0.5;  // sums to 2
  CHECK_THROWS_AS(MutualInformationBits(MakeJoint(p)), protolex::Error);
  CHECK_THROWS_AS(
      LexiconQualityOfJoint(MakeJoint(Eigen::MatrixXd::Ones(1, 1))),
      protolex::Error);
}

TEST_CASE("model quality: one-hot oracle posteriors reach q = 1") {
  const int n = 40, d = 8;
  Eigen::MatrixXd post = Eigen::MatrixXd::Zero(n, d);
  for (int i = 0; i < n; ++i) post(i, i % d) = 1.0;
  const Eigen::VectorXd prior = Eigen::VectorXd::Constant(d, 1.0 / d);
  const LexiconQuality q = ModelQualityFromPosteriors(post, prior);
  CHECK(q.q == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("model quality: posterior equal to the prior gives q = 0") {
  const int n = 10, d = 6;
  Eigen::VectorXd prior(d);
  prior << 0.3, 0.2, 0.2, 0.1, 0.1, 0.1;
  Eigen::MatrixXd post(n, d);
  for (int i = 0; i < n; ++i) post.row(i) = prior.transpose();
  const LexiconQuality q = ModelQualityFromPosteriors(post, prior);
  CHECK(q.q == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("model quality skips zero-prior cells and reports them") {
  Eigen::MatrixXd post(2, 3);
  post << 0.8, 0.1, 0.1, 0.2, 0.7, 0.1;
  Eigen::VectorXd prior(3);
  prior << 0.5, 0.5, 0.0;
  const LexiconQuality q = ModelQualityFromPosteriors(post, prior);
  CHECK(q.skipped_cells == 2);
}

TEST_CASE("plug-in estimate agrees with the empirical joint when posteriors "
          "are near-deterministic") {
  Rng rng(99);
  const int n = 600, d = 5;
  std::vector<int> labels(n);
  Eigen::MatrixXd post(n, d);
  Eigen::VectorXd prior = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) {
    labels[static_cast<size_t>(i)] = static_cast<int>(rng.UniformInt(d));
    prior(labels[static_cast<size_t>(i)]) += 1.0;
    // Predict the true label with 99.9% concentration.
    post.row(i).setConstant(0.001 / (d - 1));
    post(i, labels[static_cast<size_t>(i)]) = 0.999;
  }
  prior /= prior.sum();
  const LexiconQuality plugin = ModelQualityFromPosteriors(post, prior);
  const JointDistribution joint =
      EmpiricalPredictionJoint(post, labels, d);
  const LexiconQuality discrete = LexiconQualityOfJoint(joint);
  CHECK(std::abs(plugin.q - discrete.q) < 0.05);
}
