// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0
//
// CRNN forward and backward passes. Convolutions run as im2col GEMMs; the
// GRU keeps per-step gate caches for BPTT; every max pool stores its argmax
// for the backward scatter. Master weights are float32, arithmetic is
// double (see network.hpp).

#include "protolex/model/network.hpp"

#include <cmath>

#include "protolex/util/errors.hpp"
#include "protolex/util/rng.hpp"

namespace protolex::model {

namespace {

inline double Elu(double x) { return x > 0.0 ? x : std::expm1(x); }

// Vectorized in-place ELU (alpha = 1).
inline void EluInPlace(Eigen::MatrixXd& m) {
  m = (m.array() > 0.0).select(m, m.array().exp() - 1.0);
}

// ELU'(pre) expressed through the activation value: 1 above zero, y+1 below
// (alpha = 1, C1-smooth at the origin).
inline double EluDerivFromAct(double y) { return y > 0.0 ? 1.0 : y + 1.0; }

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// col[(ci*kt*kf + dti*kf + dfi), t*F + f] = act(ci, (t+dt)*F + (f+df)),
// zero outside the grid; same padding, stride 1.
void Im2Col(const Eigen::MatrixXd& act, int T, int F, int kt, int kf,
            Eigen::MatrixXd& col) {
  const int c_in = static_cast<int>(act.rows());
  const int pad_t = kt / 2, pad_f = kf / 2;
  col.resize(static_cast<Eigen::Index>(c_in) * kt * kf,
             static_cast<Eigen::Index>(T) * F);
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      const Eigen::Index p = static_cast<Eigen::Index>(t) * F + f;
      Eigen::Index row = 0;
      for (int ci = 0; ci < c_in; ++ci) {
        for (int dti = 0; dti < kt; ++dti) {
          const int tt = t + dti - pad_t;
          if (tt < 0 || tt >= T) {
            for (int dfi = 0; dfi < kf; ++dfi) col(row++, p) = 0.0;
            continue;
          }
          for (int dfi = 0; dfi < kf; ++dfi) {
            const int ff = f + dfi - pad_f;
            col(row++, p) =
                (ff < 0 || ff >= F)
                    ? 0.0
                    : act(ci, static_cast<Eigen::Index>(tt) * F + ff);
          }
        }
      }
    }
  }
}

void Col2ImAdd(const Eigen::MatrixXd& dcol, int T, int F, int kt, int kf,
               Eigen::MatrixXd& dact) {
  const int c_in = static_cast<int>(dact.rows());
  const int pad_t = kt / 2, pad_f = kf / 2;
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      const Eigen::Index p = static_cast<Eigen::Index>(t) * F + f;
      Eigen::Index row = 0;
      for (int ci = 0; ci < c_in; ++ci) {
        for (int dti = 0; dti < kt; ++dti) {
          const int tt = t + dti - pad_t;
          if (tt < 0 || tt >= T) {
            row += kf;
            continue;
          }
          for (int dfi = 0; dfi < kf; ++dfi) {
            const int ff = f + dfi - pad_f;
            if (ff >= 0 && ff < F)
              dact(ci, static_cast<Eigen::Index>(tt) * F + ff) += dcol(row, p);
            ++row;
          }
        }
      }
    }
  }
}

// Inverted dropout multiplier mask: entries are 0 with probability `rate`
// and 1/(1-rate) otherwise.
void FillDropoutMask(Eigen::MatrixXd& mask, Eigen::Index rows,
                     Eigen::Index cols, double rate, Rng& rng) {
  mask.resize(rows, cols);
  const double inv_keep = 1.0 / (1.0 - rate);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r)
      mask(r, c) = rng.Uniform() < rate ? 0.0 : inv_keep;
}

}  // namespace

// Everything the backward pass needs from the forward pass. Activation
// matrices hold post-ELU, post-dropout values (the tensors actually consumed
// downstream); `*_mask` matrices are empty when dropout is off.
struct Network::CacheImpl {
  Eigen::MatrixXd input_map;  // [1 x T*F]

  std::vector<Eigen::MatrixXd> enc_act;
  std::vector<Eigen::MatrixXd> enc_mask;
  Eigen::MatrixXd mel;         // [C x T]
  Eigen::MatrixXi mel_argmax;  // [C x T]

  Eigen::MatrixXd gru_z, gru_r, gru_c, gru_h, gru_q;  // [H x T]
  Eigen::MatrixXd gru_out;                            // post-dropout h
  Eigen::MatrixXd gru_mask;

  Eigen::MatrixXd pooled;      // [H x T_bn]
  Eigen::MatrixXi pool_argmax; // [H x T_bn]

  Eigen::MatrixXd dense_act;  // [D x T_bn]
  Eigen::MatrixXd dense_mask;

  Eigen::MatrixXd softmax;  // [d x T_bn]
  std::vector<int> time_argmax;
  int valid_bn = 0;

  Eigen::MatrixXd up;              // [D x T]
  Eigen::MatrixXd dec_pre_act;     // [C x T]
  Eigen::MatrixXd dec_expand_act;  // [C x T*F]
  std::vector<Eigen::MatrixXd> dec_act;
  Eigen::MatrixXd dec_final;  // [1 x T*F]
  Eigen::MatrixXd recon;      // [1 x T*F]

  bool dropout_applied = false;
  double keep = 1.0;

  // Scratch reused across items.
  Eigen::MatrixXd col, dcol;
};

Network::Cache::Cache() : impl(new CacheImpl) {}
Network::Cache::~Cache() = default;
Network::Cache::Cache(Cache&&) noexcept = default;
Network::Cache& Network::Cache::operator=(Cache&&) noexcept = default;

int ValidPooledFrames(const ModelConfig& config, int valid_frames) {
  const int L = std::min(std::max(valid_frames, 1), config.input_frames);
  if (!config.HasBottleneck()) return L;
  const int s = config.bottleneck_stride;
  return std::min(config.BottleneckFrames(), (L + s - 1) / s);
}

BatchItem MakeBatchItem(const features::LogMelSpectrogram& spec,
                        const ModelConfig& config) {
  require(spec.n_bands() == config.input_bands, err::kConfigMismatch,
          "spectrogram has ", spec.n_bands(), " bands, model expects ",
          config.input_bands);
  require(spec.valid_frames >= 1, err::kValidation,
          "spectrogram has no valid frames");
  const features::LogMelSpectrogram fixed =
      features::PadOrClip(spec, config.input_frames);
  BatchItem item;
  item.valid_frames = fixed.valid_frames;
  item.features = fixed.values.cast<double>();
  // Canonicalize masked rows so stray values behind the mask cannot reach
  // the network.
  const double pad = fixed.params.PadValue();
  for (int t = fixed.valid_frames; t < config.input_frames; ++t)
    item.features.row(t).setConstant(pad);
  return item;
}

Network::Network(const ModelConfig& config, uint64_t seed)
    : config_(config), init_seed_(seed) {
  config_.Validate();
  const int C = config_.conv_channels;
  const int F = config_.input_bands;
  const int H = config_.recurrent_units;
  const int D = config_.dense_units;
  const int d = config_.d_visual;
  const int kt = config_.conv_kernel_t, kf = config_.conv_kernel_f;

  for (int l = 0; l < config_.n_conv_layers; ++l) {
    const int c_in = l == 0 ? 1 : C;
    const std::string name = "enc_conv" + std::to_string(l + 1);
    idx_.enc_w.push_back(AddTensor(name + ".weight", {C, c_in, kt, kf}, C,
                                   c_in * kt * kf, /*l2=*/true));
    idx_.enc_b.push_back(AddTensor(name + ".bias", {C}, 1, C, false));
  }

  idx_.gru_wz = AddTensor("gru.w_z", {H, C}, H, C, false);
  idx_.gru_wr = AddTensor("gru.w_r", {H, C}, H, C, false);
  idx_.gru_wc = AddTensor("gru.w_c", {H, C}, H, C, false);
  idx_.gru_uz = AddTensor("gru.u_z", {H, H}, H, H, false);
  idx_.gru_ur = AddTensor("gru.u_r", {H, H}, H, H, false);
  idx_.gru_uc = AddTensor("gru.u_c", {H, H}, H, H, false);
  idx_.gru_bz = AddTensor("gru.b_z", {H}, 1, H, false);
  idx_.gru_br = AddTensor("gru.b_r", {H}, 1, H, false);
  idx_.gru_bc = AddTensor("gru.b_c", {H}, 1, H, false);

  idx_.dense_w = AddTensor("dense.weight", {D, H}, D, H, true);
  idx_.dense_b = AddTensor("dense.bias", {D}, 1, D, false);
  idx_.vp_w = AddTensor("vp.weight", {d, D}, d, D, false);  // softmax: no L2
  idx_.vp_b = AddTensor("vp.bias", {d}, 1, d, false);

  if (config_.HasDecoder()) {
    idx_.dec_pre_w = AddTensor("dec_pre.weight", {C, D, kt, 1}, C, D * kt,
                               true);
    idx_.dec_pre_b = AddTensor("dec_pre.bias", {C}, 1, C, false);
    idx_.dec_expand_w =
        AddTensor("dec_expand.weight", {C * F, C}, C * F, C, true);
    idx_.dec_expand_b = AddTensor("dec_expand.bias", {C * F}, 1, C * F,
                                  false);
    for (int l = 0; l + 1 < config_.n_conv_layers; ++l) {
      const std::string name = "dec_conv" + std::to_string(l + 1);
      idx_.dec_w.push_back(AddTensor(name + ".weight", {C, C, kt, kf}, C,
                                     C * kt * kf, true));
      idx_.dec_b.push_back(AddTensor(name + ".bias", {C}, 1, C, false));
    }
    idx_.dec_final_w = AddTensor("dec_final.weight", {1, C, kt, kf}, 1,
                                 C * kt * kf, true);
    idx_.dec_final_b = AddTensor("dec_final.bias", {1}, 1, 1, false);
    idx_.dec_post_w = AddTensor("dec_post.weight", {1, 1, kt, kf}, 1, kt * kf,
                                true);
    idx_.dec_post_b = AddTensor("dec_post.bias", {1}, 1, 1, false);
  }

  InitParams(seed);
}

int Network::AddTensor(const std::string& name, std::vector<int> shape,
                       int rows, int cols, bool l2) {
  ParamTensor t;
  t.name = name;
  t.shape = std::move(shape);
  t.rows = rows;
  t.cols = cols;
  t.l2 = l2;
  t.master.assign(static_cast<size_t>(rows) * cols, 0.0f);
  t.mirror = Eigen::MatrixXd::Zero(rows, cols);
  tensors_.push_back(std::move(t));
  return static_cast<int>(tensors_.size()) - 1;
}

void Network::InitParams(uint64_t seed) {
  for (size_t i = 0; i < tensors_.size(); ++i) {
    ParamTensor& t = tensors_[i];
    const bool is_bias =
        t.name.ends_with(".bias") || t.name.rfind("gru.b", 0) == 0;
    if (is_bias) continue;  // biases start at zero
    // Fan-in scaled uniform init; fan-in is the mirror column count.
    const double bound = std::sqrt(6.0 / static_cast<double>(t.cols));
    Rng rng(Rng::Derive(seed, {0x494e4954, i}));
    for (auto& v : t.master)
      v = static_cast<float>(rng.Uniform(-bound, bound));
    RefreshMirror(static_cast<int>(i));
  }
}

void Network::RefreshMirror(int i) {
  ParamTensor& t = tensors_[static_cast<size_t>(i)];
  for (int r = 0; r < t.rows; ++r)
    for (int c = 0; c < t.cols; ++c)
      t.mirror(r, c) =
          static_cast<double>(t.master[static_cast<size_t>(r) * t.cols + c]);
}

size_t Network::TotalParams() const {
  size_t n = 0;
  for (const auto& t : tensors_) n += t.master.size();
  return n;
}

void Network::SetTensorMaster(int i, const std::vector<float>& data) {
  ParamTensor& t = tensors_[static_cast<size_t>(i)];
  require(data.size() == t.master.size(), err::kConfigMismatch,
          "tensor '", t.name, "' expects ", t.master.size(), " values, got ",
          data.size());
  t.master = data;
  RefreshMirror(i);
}

void Network::AssignTensor(int i, const Eigen::MatrixXd& values) {
  ParamTensor& t = tensors_[static_cast<size_t>(i)];
  require(values.rows() == t.rows && values.cols() == t.cols,
          err::kConfigMismatch, "tensor '", t.name, "' shape mismatch");
  for (int r = 0; r < t.rows; ++r)
    for (int c = 0; c < t.cols; ++c) {
      const auto f = static_cast<float>(values(r, c));
      t.master[static_cast<size_t>(r) * t.cols + c] = f;
      t.mirror(r, c) = static_cast<double>(f);
    }
}

void Network::SetParam(int tensor, int flat_index, float value) {
  ParamTensor& t = tensors_[static_cast<size_t>(tensor)];
  t.master[static_cast<size_t>(flat_index)] = value;
  t.mirror(flat_index / t.cols, flat_index % t.cols) =
      static_cast<double>(value);
}

float Network::GetParam(int tensor, int flat_index) const {
  return tensors_[static_cast<size_t>(tensor)]
      .master[static_cast<size_t>(flat_index)];
}

GradientSet Network::ZeroGradients() const {
  GradientSet g;
  g.reserve(tensors_.size());
  for (const auto& t : tensors_)
    g.push_back(Eigen::MatrixXd::Zero(t.rows, t.cols));
  return g;
}

std::vector<std::string> Network::LayerIds() const {
  std::vector<std::string> ids;
  for (int l = 1; l <= config_.n_conv_layers; ++l)
    ids.push_back("conv" + std::to_string(l));
  ids.push_back("gru");
  ids.push_back("dense");
  ids.push_back("softmax");
  if (config_.HasDecoder()) {
    ids.push_back("dec_pre");
    ids.push_back("dec_expand");
    for (int l = 1; l < config_.n_conv_layers; ++l)
      ids.push_back("dec_conv" + std::to_string(l));
  }
  return ids;
}

ForwardOutputs Network::Forward(const BatchItem& item,
                                const std::set<std::string>* capture) const {
  Cache cache;
  return Run(item, &cache, 0, capture);
}

ForwardOutputs Network::ForwardTraining(const BatchItem& item, Cache& cache,
                                        uint64_t dropout_seed) const {
  return Run(item, &cache, dropout_seed, nullptr);
}

ForwardOutputs Network::Run(const BatchItem& item, Cache* cache,
                            uint64_t dropout_seed,
                            const std::set<std::string>* capture) const {
  const int T = config_.input_frames;
  const int F = config_.input_bands;
  const int C = config_.conv_channels;
  const int H = config_.recurrent_units;
  const int D = config_.dense_units;
  const int d = config_.d_visual;
  const int kt = config_.conv_kernel_t, kf = config_.conv_kernel_f;
  const int T_bn = config_.BottleneckFrames();

  require(item.features.rows() == T && item.features.cols() == F,
          err::kConfigMismatch, "batch item geometry ", item.features.rows(),
          "x", item.features.cols(), " does not match model ", T, "x", F);
  require(item.valid_frames >= 1 && item.valid_frames <= T,
          err::kValidation, "batch item valid_frames out of range");

  CacheImpl& cc = *cache->impl;
  const bool dropout =
      dropout_seed != 0 && config_.dropout_rate > 0.0;
  cc.dropout_applied = dropout;
  cc.keep = dropout ? 1.0 - config_.dropout_rate : 1.0;

  // Input as a 1-channel grid map.
  cc.input_map.resize(1, static_cast<Eigen::Index>(T) * F);
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f)
      cc.input_map(0, static_cast<Eigen::Index>(t) * F + f) =
          item.features(t, f);

  // --- Encoder conv stack ---
  cc.enc_act.resize(static_cast<size_t>(config_.n_conv_layers));
  cc.enc_mask.assign(static_cast<size_t>(config_.n_conv_layers), {});
  const Eigen::MatrixXd* prev = &cc.input_map;
  for (int l = 0; l < config_.n_conv_layers; ++l) {
    Im2Col(*prev, T, F, kt, kf, cc.col);
    Eigen::MatrixXd& act = cc.enc_act[static_cast<size_t>(l)];
    act.noalias() = tensors_[idx_.enc_w[l]].mirror * cc.col;
    act.colwise() += tensors_[idx_.enc_b[l]].mirror.row(0).transpose();
    EluInPlace(act);
    if (dropout) {
      Rng rng(Rng::Derive(dropout_seed, {0x64726f70, 1, (uint64_t)l}));
      FillDropoutMask(cc.enc_mask[static_cast<size_t>(l)], act.rows(),
                      act.cols(), config_.dropout_rate, rng);
      act = act.cwiseProduct(cc.enc_mask[static_cast<size_t>(l)]);
    }
    prev = &act;
  }

  // --- Max pool across the Mel axis ---
  const Eigen::MatrixXd& top = cc.enc_act.back();
  cc.mel.resize(C, T);
  cc.mel_argmax.resize(C, T);
  for (int c = 0; c < C; ++c) {
    for (int t = 0; t < T; ++t) {
      double best = top(c, static_cast<Eigen::Index>(t) * F);
      int best_f = 0;
      for (int f = 1; f < F; ++f) {
        const double v = top(c, static_cast<Eigen::Index>(t) * F + f);
        if (v > best) {
          best = v;
          best_f = f;
        }
      }
      cc.mel(c, t) = best;
      cc.mel_argmax(c, t) = best_f;
    }
  }

  // --- GRU over time ---
  const Eigen::MatrixXd& Wz = tensors_[idx_.gru_wz].mirror;
  const Eigen::MatrixXd& Wr = tensors_[idx_.gru_wr].mirror;
  const Eigen::MatrixXd& Wc = tensors_[idx_.gru_wc].mirror;
  const Eigen::MatrixXd& Uz = tensors_[idx_.gru_uz].mirror;
  const Eigen::MatrixXd& Ur = tensors_[idx_.gru_ur].mirror;
  const Eigen::MatrixXd& Uc = tensors_[idx_.gru_uc].mirror;
  const Eigen::VectorXd bz = tensors_[idx_.gru_bz].mirror.row(0).transpose();
  const Eigen::VectorXd br = tensors_[idx_.gru_br].mirror.row(0).transpose();
  const Eigen::VectorXd bc = tensors_[idx_.gru_bc].mirror.row(0).transpose();

  cc.gru_z.resize(H, T);
  cc.gru_r.resize(H, T);
  cc.gru_c.resize(H, T);
  cc.gru_h.resize(H, T);
  cc.gru_q.resize(H, T);

  // Input projections for the whole sequence in one GEMM per gate.
  Eigen::MatrixXd az_in = Wz * cc.mel;
  Eigen::MatrixXd ar_in = Wr * cc.mel;
  Eigen::MatrixXd ac_in = Wc * cc.mel;
  az_in.colwise() += bz;
  ar_in.colwise() += br;
  ac_in.colwise() += bc;

  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(H);
  for (int t = 0; t < T; ++t) {
    const Eigen::VectorXd z =
        (az_in.col(t) + Uz * h_prev).unaryExpr([](double x) {
          return Sigmoid(x);
        });
    const Eigen::VectorXd r =
        (ar_in.col(t) + Ur * h_prev).unaryExpr([](double x) {
          return Sigmoid(x);
        });
    const Eigen::VectorXd q = r.cwiseProduct(h_prev);
    const Eigen::VectorXd c_tilde =
        (ac_in.col(t) + Uc * q).array().tanh().matrix();
    const Eigen::VectorXd h =
        (Eigen::VectorXd::Ones(H) - z).cwiseProduct(h_prev) +
        z.cwiseProduct(c_tilde);
    cc.gru_z.col(t) = z;
    cc.gru_r.col(t) = r;
    cc.gru_q.col(t) = q;
    cc.gru_c.col(t) = c_tilde;
    cc.gru_h.col(t) = h;
    h_prev = h;
  }

  cc.gru_out = cc.gru_h;
  if (dropout) {
    Rng rng(Rng::Derive(dropout_seed, {0x64726f70, 2}));
    FillDropoutMask(cc.gru_mask, H, T, config_.dropout_rate, rng);
    cc.gru_out = cc.gru_out.cwiseProduct(cc.gru_mask);
  }

  // --- Temporal bottleneck (overlapping max pool) ---
  if (config_.HasBottleneck()) {
    const int s = config_.bottleneck_stride, w = config_.bottleneck_window;
    cc.pooled.resize(H, T_bn);
    cc.pool_argmax.resize(H, T_bn);
    for (int i = 0; i < T_bn; ++i) {
      const int begin = i * s;
      const int end = std::min(begin + w, T);
      for (int u = 0; u < H; ++u) {
        double best = cc.gru_out(u, begin);
        int best_t = begin;
        for (int t = begin + 1; t < end; ++t) {
          if (cc.gru_out(u, t) > best) {
            best = cc.gru_out(u, t);
            best_t = t;
          }
        }
        cc.pooled(u, i) = best;
        cc.pool_argmax(u, i) = best_t;
      }
    }
  } else {
    cc.pooled = cc.gru_out;
  }

  // --- Time-distributed dense ReLU ---
  cc.dense_act.noalias() = tensors_[idx_.dense_w].mirror * cc.pooled;
  cc.dense_act.colwise() +=
      tensors_[idx_.dense_b].mirror.row(0).transpose();
  cc.dense_act = cc.dense_act.cwiseMax(0.0);
  if (dropout) {
    Rng rng(Rng::Derive(dropout_seed, {0x64726f70, 3}));
    FillDropoutMask(cc.dense_mask, D, T_bn, config_.dropout_rate, rng);
    cc.dense_act = cc.dense_act.cwiseProduct(cc.dense_mask);
  }

  // --- VP head: time-distributed softmax, max over valid frames ---
  Eigen::MatrixXd logits =
      tensors_[idx_.vp_w].mirror * cc.dense_act;
  logits.colwise() += tensors_[idx_.vp_b].mirror.row(0).transpose();
  cc.softmax.resize(d, T_bn);
  for (int i = 0; i < T_bn; ++i) {
    const double m = logits.col(i).maxCoeff();
    const Eigen::VectorXd e = (logits.col(i).array() - m).exp();
    cc.softmax.col(i) = e / e.sum();
  }

  cc.valid_bn = ValidPooledFrames(config_, item.valid_frames);
  cc.time_argmax.assign(static_cast<size_t>(d), 0);
  ForwardOutputs out;
  out.valid_pooled_frames = cc.valid_bn;
  out.utterance_posterior.resize(d);
  for (int c = 0; c < d; ++c) {
    double best = cc.softmax(c, 0);
    int best_i = 0;
    for (int i = 1; i < cc.valid_bn; ++i) {
      if (cc.softmax(c, i) > best) {
        best = cc.softmax(c, i);
        best_i = i;
      }
    }
    out.utterance_posterior(c) = best;
    cc.time_argmax[static_cast<size_t>(c)] = best_i;
  }
  out.frame_posteriors = cc.softmax.transpose();

  // --- Decoder ---
  if (config_.HasDecoder()) {
    if (config_.HasBottleneck()) {
      const int s = config_.bottleneck_stride;
      cc.up.resize(D, T);
      for (int t = 0; t < T; ++t) cc.up.col(t) = cc.dense_act.col(t / s);
    } else {
      cc.up = cc.dense_act;
    }

    // Temporal pre-filter conv (kernel kt x 1 on a [D x T] grid).
    Im2Col(cc.up, T, 1, kt, 1, cc.col);
    cc.dec_pre_act.noalias() = tensors_[idx_.dec_pre_w].mirror * cc.col;
    cc.dec_pre_act.colwise() +=
        tensors_[idx_.dec_pre_b].mirror.row(0).transpose();
    EluInPlace(cc.dec_pre_act);

    // Expansion back to the 2-D grid: linear C -> C*F per frame, then ELU.
    Eigen::MatrixXd expanded =
        tensors_[idx_.dec_expand_w].mirror * cc.dec_pre_act;
    expanded.colwise() +=
        tensors_[idx_.dec_expand_b].mirror.row(0).transpose();
    cc.dec_expand_act.resize(C, static_cast<Eigen::Index>(T) * F);
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c)
        for (int f = 0; f < F; ++f)
          cc.dec_expand_act(c, static_cast<Eigen::Index>(t) * F + f) =
              Elu(expanded(static_cast<Eigen::Index>(c) * F + f, t));

    // Mirror conv stack.
    cc.dec_act.resize(idx_.dec_w.size());
    const Eigen::MatrixXd* dprev = &cc.dec_expand_act;
    for (size_t l = 0; l < idx_.dec_w.size(); ++l) {
      Im2Col(*dprev, T, F, kt, kf, cc.col);
      Eigen::MatrixXd& act = cc.dec_act[l];
      act.noalias() = tensors_[idx_.dec_w[l]].mirror * cc.col;
      act.colwise() += tensors_[idx_.dec_b[l]].mirror.row(0).transpose();
      EluInPlace(act);
      dprev = &act;
    }

    // Linear output conv and post-filter.
    Im2Col(*dprev, T, F, kt, kf, cc.col);
    cc.dec_final.noalias() = tensors_[idx_.dec_final_w].mirror * cc.col;
    cc.dec_final.array() += tensors_[idx_.dec_final_b].mirror(0, 0);
    Im2Col(cc.dec_final, T, F, kt, kf, cc.col);
    cc.recon.noalias() = tensors_[idx_.dec_post_w].mirror * cc.col;
    cc.recon.array() += tensors_[idx_.dec_post_b].mirror(0, 0);

    Eigen::MatrixXd recon_tf(T, F);
    for (int t = 0; t < T; ++t)
      for (int f = 0; f < F; ++f)
        recon_tf(t, f) = cc.recon(0, static_cast<Eigen::Index>(t) * F + f);
    out.reconstruction = std::move(recon_tf);
  }

  // --- Activation capture ---
  if (capture && !capture->empty()) {
    auto want = [&](const std::string& id) { return capture->count(id) > 0; };
    for (int l = 0; l < config_.n_conv_layers; ++l) {
      const std::string id = "conv" + std::to_string(l + 1);
      if (!want(id)) continue;
      CapturedActivation a;
      a.values = cc.enc_act[static_cast<size_t>(l)];
      a.frames = T;
      a.bands = F;
      a.time_downsample = 1;
      out.activations.emplace(id, std::move(a));
    }
    if (want("gru")) {
      CapturedActivation a;
      a.values = cc.gru_out;
      a.frames = T;
      a.bands = 1;
      a.time_downsample = 1;
      out.activations.emplace("gru", std::move(a));
    }
    if (want("dense")) {
      CapturedActivation a;
      a.values = cc.dense_act;
      a.frames = T_bn;
      a.bands = 1;
      a.time_downsample = config_.TimeDownsample();
      out.activations.emplace("dense", std::move(a));
    }
    if (want("softmax")) {
      CapturedActivation a;
      a.values = cc.softmax;
      a.frames = T_bn;
      a.bands = 1;
      a.time_downsample = config_.TimeDownsample();
      out.activations.emplace("softmax", std::move(a));
    }
    if (config_.HasDecoder()) {
      if (want("dec_pre")) {
        CapturedActivation a;
        a.values = cc.dec_pre_act;
        a.frames = T;
        a.bands = 1;
        a.time_downsample = 1;
        out.activations.emplace("dec_pre", std::move(a));
      }
      if (want("dec_expand")) {
        CapturedActivation a;
        a.values = cc.dec_expand_act;
        a.frames = T;
        a.bands = F;
        a.time_downsample = 1;
        out.activations.emplace("dec_expand", std::move(a));
      }
      for (size_t l = 0; l < cc.dec_act.size(); ++l) {
        const std::string id = "dec_conv" + std::to_string(l + 1);
        if (!want(id)) continue;
        CapturedActivation a;
        a.values = cc.dec_act[l];
        a.frames = T;
        a.bands = F;
        a.time_downsample = 1;
        out.activations.emplace(id, std::move(a));
      }
    }
    for (const auto& id : *capture)
      require(out.activations.count(id) > 0, err::kValidation,
              "unknown capture layer '", id, "'");
  }

  return out;
}

void Network::Backward(Cache& cache, const Eigen::VectorXd& d_utterance,
                       const Eigen::MatrixXd* d_reconstruction,
                       GradientSet& grads) const {
  CacheImpl& cc = *cache.impl;
  const int T = config_.input_frames;
  const int F = config_.input_bands;
  const int C = config_.conv_channels;
  const int H = config_.recurrent_units;
  const int D = config_.dense_units;
  const int d = config_.d_visual;
  const int kt = config_.conv_kernel_t, kf = config_.conv_kernel_f;
  const int T_bn = config_.BottleneckFrames();

  require(d_utterance.size() == d, err::kConfigMismatch,
          "utterance gradient size mismatch");
  require(grads.size() == tensors_.size(), err::kConfigMismatch,
          "gradient set does not match the network");

  Eigen::MatrixXd& col = cc.col;
  Eigen::MatrixXd& dcol = cc.dcol;

  // VP head: route each class gradient to its pooled frame, then softmax.
  Eigen::MatrixXd d_soft = Eigen::MatrixXd::Zero(d, T_bn);
  for (int c = 0; c < d; ++c)
    d_soft(c, cc.time_argmax[static_cast<size_t>(c)]) += d_utterance(c);
  Eigen::MatrixXd d_logits(d, T_bn);
  for (int i = 0; i < T_bn; ++i) {
    const Eigen::VectorXd p = cc.softmax.col(i);
    const Eigen::VectorXd dp = d_soft.col(i);
    const double dot = p.dot(dp);
    d_logits.col(i) = p.cwiseProduct(dp) - p * dot;
  }
  grads[idx_.vp_w].noalias() += d_logits * cc.dense_act.transpose();
  grads[idx_.vp_b].row(0) += d_logits.rowwise().sum().transpose();
  Eigen::MatrixXd d_dense =
      tensors_[idx_.vp_w].mirror.transpose() * d_logits;

  // Decoder backward feeds additional gradient into the dense activation.
  if (d_reconstruction) {
    require(config_.HasDecoder(), err::kValidation,
            "reconstruction gradient on a no-AE model");
    Eigen::MatrixXd d_recon_map(1, static_cast<Eigen::Index>(T) * F);
    for (int t = 0; t < T; ++t)
      for (int f = 0; f < F; ++f)
        d_recon_map(0, static_cast<Eigen::Index>(t) * F + f) =
            (*d_reconstruction)(t, f);

    // Post-filter (linear 1 -> 1 conv).
    Im2Col(cc.dec_final, T, F, kt, kf, col);
    grads[idx_.dec_post_w].noalias() += d_recon_map * col.transpose();
    grads[idx_.dec_post_b](0, 0) += d_recon_map.sum();
    dcol.noalias() =
        tensors_[idx_.dec_post_w].mirror.transpose() * d_recon_map;
    Eigen::MatrixXd d_final =
        Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(T) * F);
    Col2ImAdd(dcol, T, F, kt, kf, d_final);

    // Final mirror conv (linear C -> 1).
    const Eigen::MatrixXd& final_in =
        idx_.dec_w.empty() ? cc.dec_expand_act : cc.dec_act.back();
    Im2Col(final_in, T, F, kt, kf, col);
    grads[idx_.dec_final_w].noalias() += d_final * col.transpose();
    grads[idx_.dec_final_b](0, 0) += d_final.sum();
    dcol.noalias() =
        tensors_[idx_.dec_final_w].mirror.transpose() * d_final;
    Eigen::MatrixXd d_cur =
        Eigen::MatrixXd::Zero(C, static_cast<Eigen::Index>(T) * F);
    Col2ImAdd(dcol, T, F, kt, kf, d_cur);

    // Mirror stack, deepest first.
    for (int l = static_cast<int>(idx_.dec_w.size()) - 1; l >= 0; --l) {
      const Eigen::MatrixXd& act = cc.dec_act[static_cast<size_t>(l)];
      Eigen::MatrixXd d_pre = d_cur.cwiseProduct(
          act.unaryExpr([](double y) { return EluDerivFromAct(y); }));
      const Eigen::MatrixXd& in =
          l == 0 ? cc.dec_expand_act : cc.dec_act[static_cast<size_t>(l - 1)];
      Im2Col(in, T, F, kt, kf, col);
      grads[idx_.dec_w[static_cast<size_t>(l)]].noalias() +=
          d_pre * col.transpose();
      grads[idx_.dec_b[static_cast<size_t>(l)]].row(0) +=
          d_pre.rowwise().sum().transpose();
      dcol.noalias() =
          tensors_[idx_.dec_w[static_cast<size_t>(l)]].mirror.transpose() *
          d_pre;
      d_cur.setZero();
      Col2ImAdd(dcol, T, F, kt, kf, d_cur);
    }

    // Expansion backward: ELU, then the per-frame linear map.
    Eigen::MatrixXd d_expanded(static_cast<Eigen::Index>(C) * F, T);
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c)
        for (int f = 0; f < F; ++f) {
          const double y =
              cc.dec_expand_act(c, static_cast<Eigen::Index>(t) * F + f);
          d_expanded(static_cast<Eigen::Index>(c) * F + f, t) =
              d_cur(c, static_cast<Eigen::Index>(t) * F + f) *
              EluDerivFromAct(y);
        }
    grads[idx_.dec_expand_w].noalias() +=
        d_expanded * cc.dec_pre_act.transpose();
    grads[idx_.dec_expand_b].row(0) +=
        d_expanded.rowwise().sum().transpose();
    Eigen::MatrixXd d_dec_pre =
        tensors_[idx_.dec_expand_w].mirror.transpose() * d_expanded;

    // Temporal pre-filter backward.
    Eigen::MatrixXd d_pre_pre = d_dec_pre.cwiseProduct(
        cc.dec_pre_act.unaryExpr([](double y) { return EluDerivFromAct(y); }));
    Im2Col(cc.up, T, 1, kt, 1, col);
    grads[idx_.dec_pre_w].noalias() += d_pre_pre * col.transpose();
    grads[idx_.dec_pre_b].row(0) += d_pre_pre.rowwise().sum().transpose();
    dcol.noalias() =
        tensors_[idx_.dec_pre_w].mirror.transpose() * d_pre_pre;
    Eigen::MatrixXd d_up = Eigen::MatrixXd::Zero(D, T);
    Col2ImAdd(dcol, T, 1, kt, 1, d_up);

    // Upsample backward: sum the gradient over each repeated column.
    if (config_.HasBottleneck()) {
      const int s = config_.bottleneck_stride;
      for (int t = 0; t < T; ++t) d_dense.col(t / s) += d_up.col(t);
    } else {
      d_dense += d_up;
    }
  }

  // Dense ReLU backward (post-dropout activation: entries > 0 exactly where
  // the unit survived and its preactivation was positive).
  Eigen::MatrixXd d_dense_pre = d_dense;
  if (cc.dropout_applied) d_dense_pre = d_dense_pre.cwiseProduct(cc.dense_mask);
  d_dense_pre = d_dense_pre.cwiseProduct(
      (cc.dense_act.array() > 0.0).cast<double>().matrix());
  grads[idx_.dense_w].noalias() += d_dense_pre * cc.pooled.transpose();
  grads[idx_.dense_b].row(0) += d_dense_pre.rowwise().sum().transpose();
  Eigen::MatrixXd d_pooled =
      tensors_[idx_.dense_w].mirror.transpose() * d_dense_pre;

  // Bottleneck backward: scatter to the argmax GRU frames.
  Eigen::MatrixXd d_gru_out = Eigen::MatrixXd::Zero(H, T);
  if (config_.HasBottleneck()) {
    for (int i = 0; i < T_bn; ++i)
      for (int u = 0; u < H; ++u)
        d_gru_out(u, cc.pool_argmax(u, i)) += d_pooled(u, i);
  } else {
    d_gru_out = d_pooled;
  }
  if (cc.dropout_applied)
    d_gru_out = d_gru_out.cwiseProduct(cc.gru_mask);

  // --- GRU BPTT ---
  Eigen::MatrixXd d_az = Eigen::MatrixXd::Zero(H, T);
  Eigen::MatrixXd d_ar = Eigen::MatrixXd::Zero(H, T);
  Eigen::MatrixXd d_ac = Eigen::MatrixXd::Zero(H, T);
  const Eigen::MatrixXd& Uz = tensors_[idx_.gru_uz].mirror;
  const Eigen::MatrixXd& Ur = tensors_[idx_.gru_ur].mirror;
  const Eigen::MatrixXd& Uc = tensors_[idx_.gru_uc].mirror;

  Eigen::VectorXd carry = Eigen::VectorXd::Zero(H);
  for (int t = T - 1; t >= 0; --t) {
    const Eigen::VectorXd dh = d_gru_out.col(t) + carry;
    const Eigen::VectorXd z = cc.gru_z.col(t);
    const Eigen::VectorXd r = cc.gru_r.col(t);
    const Eigen::VectorXd ctil = cc.gru_c.col(t);
    const Eigen::VectorXd h_prev =
        t == 0 ? Eigen::VectorXd::Zero(H) : Eigen::VectorXd(cc.gru_h.col(t - 1));

    const Eigen::VectorXd dctil = dh.cwiseProduct(z);
    const Eigen::VectorXd dz = dh.cwiseProduct(ctil - h_prev);
    Eigen::VectorXd dh_prev = dh.cwiseProduct(Eigen::VectorXd::Ones(H) - z);

    const Eigen::VectorXd dac =
        dctil.cwiseProduct((1.0 - ctil.array().square()).matrix());
    d_ac.col(t) = dac;
    const Eigen::VectorXd dq = Uc.transpose() * dac;
    const Eigen::VectorXd dr = dq.cwiseProduct(h_prev);
    dh_prev += dq.cwiseProduct(r);

    const Eigen::VectorXd daz = dz.cwiseProduct(
        z.cwiseProduct(Eigen::VectorXd::Ones(H) - z));
    d_az.col(t) = daz;
    dh_prev.noalias() += Uz.transpose() * daz;

    const Eigen::VectorXd dar = dr.cwiseProduct(
        r.cwiseProduct(Eigen::VectorXd::Ones(H) - r));
    d_ar.col(t) = dar;
    dh_prev.noalias() += Ur.transpose() * dar;

    carry = dh_prev;
  }

  grads[idx_.gru_wz].noalias() += d_az * cc.mel.transpose();
  grads[idx_.gru_wr].noalias() += d_ar * cc.mel.transpose();
  grads[idx_.gru_wc].noalias() += d_ac * cc.mel.transpose();
  grads[idx_.gru_bz].row(0) += d_az.rowwise().sum().transpose();
  grads[idx_.gru_br].row(0) += d_ar.rowwise().sum().transpose();
  grads[idx_.gru_bc].row(0) += d_ac.rowwise().sum().transpose();
  if (T > 1) {
    grads[idx_.gru_uz].noalias() +=
        d_az.rightCols(T - 1) * cc.gru_h.leftCols(T - 1).transpose();
    grads[idx_.gru_ur].noalias() +=
        d_ar.rightCols(T - 1) * cc.gru_h.leftCols(T - 1).transpose();
  }
  grads[idx_.gru_uc].noalias() += d_ac * cc.gru_q.transpose();

  Eigen::MatrixXd d_mel =
      tensors_[idx_.gru_wz].mirror.transpose() * d_az +
      tensors_[idx_.gru_wr].mirror.transpose() * d_ar +
      tensors_[idx_.gru_wc].mirror.transpose() * d_ac;

  // Mel pool backward.
  Eigen::MatrixXd d_cur =
      Eigen::MatrixXd::Zero(C, static_cast<Eigen::Index>(T) * F);
  for (int c = 0; c < C; ++c)
    for (int t = 0; t < T; ++t)
      d_cur(c, static_cast<Eigen::Index>(t) * F + cc.mel_argmax(c, t)) +=
          d_mel(c, t);

  // Encoder conv stack backward.
  for (int l = config_.n_conv_layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& act = cc.enc_act[static_cast<size_t>(l)];
    Eigen::MatrixXd d_pre = d_cur;
    if (cc.dropout_applied) {
      d_pre = d_pre.cwiseProduct(cc.enc_mask[static_cast<size_t>(l)]);
      const double keep = cc.keep;
      d_pre = d_pre.cwiseProduct(act.unaryExpr(
          [keep](double y) { return EluDerivFromAct(y * keep); }));
    } else {
      d_pre = d_pre.cwiseProduct(
          act.unaryExpr([](double y) { return EluDerivFromAct(y); }));
    }
    const Eigen::MatrixXd& in =
        l == 0 ? cc.input_map : cc.enc_act[static_cast<size_t>(l - 1)];
    Im2Col(in, T, F, kt, kf, col);
    grads[idx_.enc_w[static_cast<size_t>(l)]].noalias() +=
        d_pre * col.transpose();
    grads[idx_.enc_b[static_cast<size_t>(l)]].row(0) +=
        d_pre.rowwise().sum().transpose();
    if (l > 0) {
      dcol.noalias() =
          tensors_[idx_.enc_w[static_cast<size_t>(l)]].mirror.transpose() *
          d_pre;
      d_cur = Eigen::MatrixXd::Zero(C, static_cast<Eigen::Index>(T) * F);
      Col2ImAdd(dcol, T, F, kt, kf, d_cur);
    }
  }
}

double Network::L2Penalty() const {
  if (config_.l2_lambda <= 0.0) return 0.0;
  double sum = 0.0;
  for (const auto& t : tensors_)
    if (t.l2) sum += t.mirror.squaredNorm();
  return config_.l2_lambda * sum;
}

void Network::AddL2Gradient(GradientSet& grads) const {
  if (config_.l2_lambda <= 0.0) return;
  for (size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].l2)
      grads[i] += 2.0 * config_.l2_lambda * tensors_[i].mirror;
}

}  // namespace protolex::model
