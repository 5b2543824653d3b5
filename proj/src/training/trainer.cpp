// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "protolex/util/errors.hpp"
#include "protolex/util/parallel.hpp"
#include "protolex/util/rng.hpp"

namespace protolex::training {

using model::GradientSet;
using model::Network;

void OptimizerConfig::Validate() const {
  require(alpha > 0.0, err::kValidation, "alpha must be > 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
          err::kValidation, "betas must be in [0,1)");
  require(adam_epsilon > 0.0, err::kValidation, "adam_epsilon must be > 0");
  require(minibatch_size >= 1, err::kValidation, "minibatch_size must be >= 1");
  require(patience >= 1, err::kValidation, "patience must be >= 1");
  require(max_epochs >= 1, err::kValidation, "max_epochs must be >= 1");
  require(loss_mix >= 0.0, err::kValidation, "loss_mix must be >= 0");
}

void TrainState::Validate() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& row : history)
    if (row.epoch >= joint_start_epoch) best = std::min(best, row.val_loss);
  require(history.empty() || std::abs(best - best_val) <= 1e-12,
          err::kValidation, "best validation loss does not match history");
}

ItemLossTerms ComputeItem(const Network& net, const TrainItem& item,
                          const ClassWeights& weights, double loss_mix,
                          bool vp_enabled, const DataGeometry& geometry,
                          Network::Cache& cache, uint64_t dropout_seed,
                          GradientSet* grads) {
  const model::ModelConfig& config = net.config();
  const model::ForwardOutputs out =
      net.ForwardTraining(item.input, cache, dropout_seed);

  ItemLossTerms terms;
  Eigen::VectorXd d_utt = Eigen::VectorXd::Zero(config.d_visual);
  if (vp_enabled) {
    terms.vp = VpLoss(out.utterance_posterior, item.target, weights);
    if (grads) d_utt = VpLossGrad(out.utterance_posterior, item.target,
                                  weights);
  }

  Eigen::MatrixXd d_recon;
  bool have_recon_grad = false;
  if (config.HasDecoder() && loss_mix > 0.0) {
    const int L = item.input.valid_frames;
    int shift = 0;
    if (config.variant == model::Variant::kAePred)
      shift = config.PredShiftFrames(geometry.hop_ms);
    if (L - shift >= 1) {
      Eigen::MatrixXd target;
      if (shift == 0) {
        target = item.input.features;
      } else {
        target = Eigen::MatrixXd::Zero(config.input_frames,
                                       config.input_bands);
        target.topRows(config.input_frames - shift) =
            item.input.features.bottomRows(config.input_frames - shift);
      }
      const int valid_rows = L - shift;
      terms.ae = AeLoss(*out.reconstruction, target, valid_rows);
      if (grads) {
        d_recon =
            loss_mix * AeLossGrad(*out.reconstruction, target, valid_rows);
        have_recon_grad = true;
      }
    }
  }

  if (grads)
    net.Backward(cache, d_utt, have_recon_grad ? &d_recon : nullptr, *grads);
  return terms;
}

std::vector<TrainItem> BuildItems(
    const std::vector<corpus::UtteranceRecord>& records,
    const features::FeatureStore& store, const model::ModelConfig& config) {
  std::vector<TrainItem> items;
  items.reserve(records.size());
  for (const auto& r : records) {
    TrainItem item;
    item.input = model::MakeBatchItem(store.Get(r.audio_ref.empty()
                                                    ? r.utterance_id
                                                    : r.audio_ref),
                                      config);
    item.target = OneHotTarget(r.label, config.d_visual);
    items.push_back(std::move(item));
  }
  return items;
}

namespace {

// Adam with float32 master weights: moments and the step are double, the
// assignment rounds through the master (see Network).
class Adam {
 public:
  Adam(const Network& net, const OptimizerConfig& opt)
      : opt_(opt), m_(net.ZeroGradients()), v_(net.ZeroGradients()) {}

  void Step(Network& net, const GradientSet& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, t_);
    const double bc2 = 1.0 - std::pow(opt_.beta2, t_);
    for (int i = 0; i < net.n_tensors(); ++i) {
      auto& m = m_[static_cast<size_t>(i)];
      auto& v = v_[static_cast<size_t>(i)];
      const auto& g = grads[static_cast<size_t>(i)];
      m = opt_.beta1 * m + (1.0 - opt_.beta1) * g;
      v = opt_.beta2 * v + (1.0 - opt_.beta2) * g.cwiseProduct(g);
      const Eigen::MatrixXd update =
          (opt_.alpha * (m / bc1).array() /
           ((v / bc2).array().sqrt() + opt_.adam_epsilon))
              .matrix();
      net.AssignTensor(i, net.tensor(i).mirror - update);
    }
  }

 private:
  OptimizerConfig opt_;
  GradientSet m_, v_;
  long t_ = 0;
};

struct Snapshot {
  std::vector<std::vector<float>> masters;

  static Snapshot Of(const Network& net) {
    Snapshot s;
    s.masters.reserve(static_cast<size_t>(net.n_tensors()));
    for (int i = 0; i < net.n_tensors(); ++i)
      s.masters.push_back(net.tensor(i).master);
    return s;
  }
  void RestoreTo(Network& net) const {
    for (int i = 0; i < net.n_tensors(); ++i)
      net.SetTensorMaster(i, masters[static_cast<size_t>(i)]);
  }
};

double EvaluateSet(const Network& net, const std::vector<TrainItem>& items,
                   const ClassWeights& weights, double loss_mix,
                   bool vp_enabled, const DataGeometry& geometry,
                   int n_threads, double* vp_out, double* ae_out) {
  if (items.empty()) return 0.0;
  std::vector<ItemLossTerms> terms(items.size());
  std::vector<Network::Cache> caches(static_cast<size_t>(n_threads));
  ParallelFor(items.size(), n_threads, [&](size_t i, int worker) {
    terms[i] = ComputeItem(net, items[i], weights, loss_mix, vp_enabled,
                           geometry, caches[static_cast<size_t>(worker)],
                           /*dropout_seed=*/0, nullptr);
  });
  double vp = 0.0, ae = 0.0;
  for (const auto& t : terms) {  // fixed order reduction
    vp += t.vp;
    ae += t.ae;
  }
  vp /= static_cast<double>(items.size());
  ae /= static_cast<double>(items.size());
  if (vp_out) *vp_out = vp;
  if (ae_out) *ae_out = ae;
  return (vp_enabled ? vp : 0.0) + loss_mix * ae;
}

struct Phase {
  bool vp_enabled = true;
  const char* name = "joint";
};

}  // namespace

TrainState Train(Network& net, const std::vector<TrainItem>& train,
                 const std::vector<TrainItem>& val,
                 const ClassWeights& weights, const OptimizerConfig& opt,
                 const DataGeometry& geometry, int n_threads,
                 std::ostream* log) {
  opt.Validate();
  require(!train.empty(), err::kValidation, "no training items");
  require(weights.weight.size() == net.config().d_visual,
          err::kConfigMismatch, "class weights do not match d_visual");
  const double loss_mix =
      net.config().HasDecoder() ? opt.loss_mix : 0.0;

  std::vector<Phase> phases;
  if (net.config().variant == model::Variant::kAePretrain)
    phases.push_back({/*vp_enabled=*/false, "pretrain"});
  phases.push_back({/*vp_enabled=*/true, "joint"});

  TrainState state;
  std::string reasons;
  int global_epoch = 0;

  const size_t batch_count =
      (train.size() + static_cast<size_t>(opt.minibatch_size) - 1) /
      static_cast<size_t>(opt.minibatch_size);

  std::vector<Network::Cache> caches(static_cast<size_t>(n_threads));
  std::vector<GradientSet> item_grads(
      static_cast<size_t>(opt.minibatch_size), net.ZeroGradients());
  std::vector<ItemLossTerms> item_terms(
      static_cast<size_t>(opt.minibatch_size));

  for (const Phase& phase : phases) {
    Adam adam(net, opt);
    EarlyStopping stopper(opt.patience);
    Snapshot best = Snapshot::Of(net);
    int best_epoch_global = global_epoch + 1;
    std::string reason = "max-epochs";
    if (phase.vp_enabled) state.joint_start_epoch = global_epoch + 1;

    for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      ++global_epoch;

      std::vector<size_t> order(train.size());
      std::iota(order.begin(), order.end(), 0);
      Rng shuffle_rng(Rng::Derive(opt.seed,
                                  {0x45504f43, (uint64_t)global_epoch}));
      shuffle_rng.Shuffle(order);

      double vp_sum = 0.0, ae_sum = 0.0;
      for (size_t b = 0; b < batch_count; ++b) {
        const size_t begin = b * static_cast<size_t>(opt.minibatch_size);
        const size_t end =
            std::min(train.size(), begin + (size_t)opt.minibatch_size);
        const size_t n = end - begin;

        ParallelFor(n, n_threads, [&](size_t k, int worker) {
          const size_t idx = order[begin + k];
          for (auto& g : item_grads[k]) g.setZero();
          // Seed from the dataset index so scheduling cannot matter.
          uint64_t drop = Rng::Derive(
              opt.seed, {0x44524f50, (uint64_t)global_epoch, (uint64_t)idx});
          if (drop == 0) drop = 1;
          item_terms[k] = ComputeItem(
              net, train[idx], weights, loss_mix, phase.vp_enabled, geometry,
              caches[static_cast<size_t>(worker)], drop, &item_grads[k]);
        });

        GradientSet batch_grads = net.ZeroGradients();
        double batch_loss = 0.0;
        for (size_t k = 0; k < n; ++k) {  // ordered reduction
          for (size_t gi = 0; gi < batch_grads.size(); ++gi)
            batch_grads[gi] += item_grads[k][gi];
          batch_loss += (phase.vp_enabled ? item_terms[k].vp : 0.0) +
                        loss_mix * item_terms[k].ae;
          vp_sum += item_terms[k].vp;
          ae_sum += item_terms[k].ae;
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        for (auto& g : batch_grads) g *= inv_n;
        batch_loss = batch_loss * inv_n + net.L2Penalty();
        net.AddL2Gradient(batch_grads);

        if (!std::isfinite(batch_loss))
          fail(err::kDivergence, "non-finite loss in phase '", phase.name,
               "', epoch ", epoch, ", batch ", b + 1, " of ", batch_count);

        adam.Step(net, batch_grads);
      }

      const double train_vp = vp_sum / static_cast<double>(train.size());
      const double train_ae = ae_sum / static_cast<double>(train.size());

      // Monitored loss: validation when available, else the epoch's
      // training loss.
      double val_loss;
      if (!val.empty()) {
        val_loss = EvaluateSet(net, val, weights, loss_mix, phase.vp_enabled,
                               geometry, n_threads, nullptr, nullptr);
      } else {
        val_loss = (phase.vp_enabled ? train_vp : 0.0) + loss_mix * train_ae;
      }
      require(std::isfinite(val_loss), err::kDivergence,
              "non-finite validation loss at epoch ", global_epoch);

      EpochRow row;
      row.epoch = global_epoch;
      row.vp_loss = train_vp;
      row.ae_loss = train_ae;
      row.val_loss = val_loss;
      row.wall_s = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
      state.history.push_back(row);
      if (log)
        (*log) << "epoch " << global_epoch << " [" << phase.name
               << "] vp=" << train_vp << " ae=" << train_ae
               << " val=" << val_loss << "\n";

      const double prev_best = stopper.best_loss();
      const bool stop = stopper.Record(val_loss);
      if (val_loss < prev_best) {
        best = Snapshot::Of(net);
        best_epoch_global = global_epoch;
      }
      if (stop) {
        reason = "early-stopping";
        break;
      }
    }

    best.RestoreTo(net);
    if (!reasons.empty()) reasons += ";";
    reasons += std::string(phase.name) + ":" + reason;
    if (phase.vp_enabled) {
      state.best_epoch = best_epoch_global;
      state.best_val = stopper.best_loss();
    }
  }

  state.stopping_reason = reasons;
  return state;
}

void WriteHistory(const TrainState& state, std::ostream& os) {
  os.precision(17);  // loss columns must compare exactly across reruns
  os << "epoch\tvp_loss\tae_loss\tval_loss\twall_s\n";
  for (const auto& row : state.history)
    os << row.epoch << "\t" << row.vp_loss << "\t" << row.ae_loss << "\t"
       << row.val_loss << "\t" << row.wall_s << "\n";
}

}  // namespace protolex::training
