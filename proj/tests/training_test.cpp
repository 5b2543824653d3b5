// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/training/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "common/fd_check.hpp"
#include "common/tiny_model.hpp"
#include "protolex/training/losses.hpp"
#include "protolex/util/errors.hpp"

using namespace protolex;
using namespace protolex::training;
using model::Network;
using model::Variant;
using protolex::testing::TinyConfig;
using protolex::testing::TinyItems;

TEST_CASE("class weights are inverse frequency with mean 1") {
  SUBCASE("uniform counts give uniform weights") {
    const ClassWeights w = ComputeClassWeights({50, 50});
    CHECK(w.weight(0) == doctest::Approx(1.0));
    CHECK(w.weight(1) == doctest::Approx(1.0));
  }
  SUBCASE("counts 50/100 give 4/3 and 2/3") {
    const ClassWeights w = ComputeClassWeights({50, 100});
    CHECK(w.weight(0) == doctest::Approx(4.0 / 3.0));
    CHECK(w.weight(1) == doctest::Approx(2.0 / 3.0));
    CHECK(w.weight.mean() == doctest::Approx(1.0));
  }
  SUBCASE("zero counts are rejected") {
    CHECK_THROWS_AS(ComputeClassWeights({50, 0}), Error);
  }
}

TEST_CASE("vp loss: perfect prediction, ln 2 case, weight linearity") {
  const ClassWeights uniform = ClassWeights::Uniform(2);
  Eigen::VectorXd target(2), posterior(2);
  target << 1.0, 0.0;

  posterior << 1.0, 0.3;
  CHECK(VpLoss(posterior, target, uniform) ==
        doctest::Approx(0.0).epsilon(1e-10));

  posterior << 0.5, 0.5;
  CHECK(VpLoss(posterior, target, uniform) ==
        doctest::Approx(std::log(2.0)));

  ClassWeights doubled = uniform;
  doubled.weight(0) = 2.0;
  CHECK(VpLoss(posterior, target, doubled) ==
        doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("ae loss: identity, closed form, masking") {
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(6, 4);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(6, 4);

  CHECK(AeLoss(ones, ones, 6) == doctest::Approx(0.0));
  CHECK(AeLoss(ones, zeros, 6) == doctest::Approx(1.0));

  // Error confined to masked rows contributes nothing.
  Eigen::MatrixXd recon = zeros;
  recon.bottomRows(2).setConstant(99.0);
  CHECK(AeLoss(recon, zeros, 4) == doctest::Approx(0.0));

  CHECK_THROWS_AS(AeLoss(ones, zeros, 0), Error);
}

TEST_CASE("multi-referent label bags become uniform target mass") {
  const Eigen::VectorXd t = BagTarget({1, 3, 3}, 5);
  CHECK(t(1) == doctest::Approx(1.0 / 3.0));
  CHECK(t(3) == doctest::Approx(2.0 / 3.0));
  CHECK(t.sum() == doctest::Approx(1.0));
}

TEST_CASE("early stopping: 10 worsening epochs after epoch 1 stop at 11") {
  EarlyStopping es(10);
  CHECK_FALSE(es.Record(1.0));  // epoch 1, best
  for (int k = 0; k < 9; ++k) CHECK_FALSE(es.Record(1.1 + 0.1 * k));
  CHECK(es.Record(2.5));  // epoch 11: tenth consecutive non-improvement
  CHECK(es.best_epoch() == 1);
  CHECK(es.best_loss() == doctest::Approx(1.0));
}

TEST_CASE("with loss_mix 0 the full variant follows the no-AE gradient path "
          "on shared tensors") {
  const auto items = TinyItems(TinyConfig(Variant::kFull), 3, 2);
  const ClassWeights weights = ClassWeights::Uniform(2);
  const DataGeometry geometry;

  Network full(TinyConfig(Variant::kFull), 42);
  Network lean(TinyConfig(Variant::kNoAe), 42);

  model::GradientSet g_full = full.ZeroGradients();
  model::GradientSet g_lean = lean.ZeroGradients();
  Network::Cache cache;
  for (const auto& item : items) {
    ComputeItem(full, item, weights, /*loss_mix=*/0.0, true, geometry, cache,
                0, &g_full);
    ComputeItem(lean, item, weights, /*loss_mix=*/0.0, true, geometry, cache,
                0, &g_lean);
  }
  // Shared tensors occupy the same leading indices in both registries.
  for (int i = 0; i < lean.n_tensors(); ++i) {
    REQUIRE(lean.tensor(i).name == full.tensor(i).name);
    CHECK((g_full[static_cast<size_t>(i)] - g_lean[static_cast<size_t>(i)])
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("analytic gradients match central finite differences on the tiny "
          "model, every trainable variant") {
  const ClassWeights weights = ClassWeights::Uniform(2);
  const DataGeometry geometry;

  for (Variant variant : {Variant::kFull, Variant::kNoAe, Variant::kAeNoBn,
                          Variant::kAePred}) {
    CAPTURE(model::VariantName(variant));
    const model::ModelConfig config = TinyConfig(variant);
    Network net(config, 2026);
    const auto items = TinyItems(config, 8, 2);
    const double loss_mix = 1.0;

    Network::Cache cache;
    auto loss = [&]() {
      double total = net.L2Penalty();
      for (const auto& item : items) {
        const ItemLossTerms t = ComputeItem(net, item, weights, loss_mix,
                                            true, geometry, cache, 0,
                                            nullptr);
        total += t.vp + loss_mix * t.ae;
      }
      return total;
    };

    model::GradientSet grads = net.ZeroGradients();
    for (const auto& item : items)
      ComputeItem(net, item, weights, loss_mix, true, geometry, cache, 0,
                  &grads);
    net.AddL2Gradient(grads);

    const auto result = protolex::testing::FiniteDifferenceCheck(
        net, loss, grads, /*n_samples=*/80, /*seed=*/55);
    CAPTURE(result.worst_tensor);
    CAPTURE(result.worst_analytic);
    CAPTURE(result.worst_numeric);
    CHECK(result.max_rel_err < 1e-4);
  }
}

TEST_CASE("training reduces the loss and is deterministic per seed") {
  const model::ModelConfig config = TinyConfig(Variant::kFull);
  const auto train_items = TinyItems(config, 101, 12);
  const auto val_items = TinyItems(config, 102, 4);
  const ClassWeights weights = ClassWeights::Uniform(2);

  OptimizerConfig opt;
  opt.alpha = 0.003;
  opt.minibatch_size = 4;
  opt.max_epochs = 6;
  opt.patience = 10;
  opt.seed = 9;

  Network net_a(config, 1);
  const TrainState a =
      Train(net_a, train_items, val_items, weights, opt, {}, 1, nullptr);
  a.Validate();
  REQUIRE(a.history.size() == 6);
  CHECK(a.history.back().val_loss < a.history.front().val_loss);

  Network net_b(config, 1);
  const TrainState b =
      Train(net_b, train_items, val_items, weights, opt, {}, 1, nullptr);
  REQUIRE(b.history.size() == a.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].vp_loss == b.history[i].vp_loss);
    CHECK(a.history[i].ae_loss == b.history[i].ae_loss);
    CHECK(a.history[i].val_loss == b.history[i].val_loss);
  }
  for (int i = 0; i < net_a.n_tensors(); ++i)
    CHECK(net_a.tensor(i).master == net_b.tensor(i).master);
}

TEST_CASE("restored parameters reproduce the recorded best validation loss") {
  const model::ModelConfig config = TinyConfig(Variant::kFull);
  const auto train_items = TinyItems(config, 201, 10);
  const auto val_items = TinyItems(config, 202, 4);
  const ClassWeights weights = ClassWeights::Uniform(2);

  OptimizerConfig opt;
  opt.alpha = 0.02;  // deliberately jumpy so the best epoch is interior
  opt.minibatch_size = 5;
  opt.max_epochs = 8;
  opt.patience = 20;
  opt.seed = 3;

  Network net(config, 6);
  const TrainState state =
      Train(net, train_items, val_items, weights, opt, {}, 1, nullptr);

  Network::Cache cache;
  double val = 0.0;
  for (const auto& item : val_items) {
    const ItemLossTerms t = ComputeItem(net, item, weights, opt.loss_mix,
                                        true, {}, cache, 0, nullptr);
    val += t.vp + opt.loss_mix * t.ae;
  }
  val /= static_cast<double>(val_items.size());
  CHECK(val == doctest::Approx(state.best_val).epsilon(1e-6));
}

TEST_CASE("AE-pretrain runs both phases") {
  const model::ModelConfig config = TinyConfig(Variant::kAePretrain);
  const auto train_items = TinyItems(config, 301, 8);
  const auto val_items = TinyItems(config, 302, 4);

  OptimizerConfig opt;
  opt.alpha = 0.005;
  opt.minibatch_size = 4;
  opt.max_epochs = 3;
  opt.patience = 10;

  Network net(config, 2);
  const TrainState state = Train(net, train_items, val_items,
                                 ClassWeights::Uniform(2), opt, {}, 1,
                                 nullptr);
  CHECK(state.joint_start_epoch == 4);  // three pretrain epochs first
  CHECK(state.history.size() == 6);
  CHECK(state.stopping_reason.find("pretrain:") != std::string::npos);
  CHECK(state.stopping_reason.find("joint:") != std::string::npos);
  state.Validate();
}

TEST_CASE("non-finite losses carry epoch and batch provenance") {
  const model::ModelConfig config = TinyConfig(Variant::kNoAe);
  auto items = TinyItems(config, 401, 4);
  items[2].input.features(3, 3) = std::numeric_limits<double>::quiet_NaN();

  OptimizerConfig opt;
  opt.minibatch_size = 4;
  opt.max_epochs = 2;

  Network net(config, 3);
  try {
    Train(net, items, {}, ClassWeights::Uniform(2), opt, {}, 1, nullptr);
    FAIL("expected divergence error");
  } catch (const Error& e) {
    CHECK(e.code() == err::kDivergence);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
  }
}
