// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_MODEL_NETWORK_HPP_
#define PROTOLEX_MODEL_NETWORK_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "protolex/features/logmel.hpp"
#include "protolex/model/config.hpp"

namespace protolex::model {

// One network input: a fixed-geometry feature matrix with the number of
// real (unmasked) leading frames. Masked rows are canonicalized to the pad
// value when the item is built, so their stored values can never leak into
// the outputs.
struct BatchItem {
  Eigen::MatrixXd features;  // [input_frames x input_bands]
  int valid_frames = 0;
};

BatchItem MakeBatchItem(const features::LogMelSpectrogram& spec,
                        const ModelConfig& config);

// Activation snapshot of one layer for probing. Conv-grid layers keep the
// full [channels x frames*bands] map; vector layers use bands == 1.
struct CapturedActivation {
  Eigen::MatrixXd values;  // [nodes x frames * bands]
  int frames = 0;
  int bands = 1;
  int time_downsample = 1;  // input frames per activation frame
};

struct ForwardOutputs {
  Eigen::MatrixXd frame_posteriors;     // [T_bn x d_visual], rows sum to 1
  Eigen::VectorXd utterance_posterior;  // column-wise max over valid frames
  std::optional<Eigen::MatrixXd> reconstruction;  // [frames x bands]
  std::map<std::string, CapturedActivation> activations;
  int valid_pooled_frames = 0;  // bottleneck frames considered by the max
};

// Master weights are float32 (the checkpoint payload is exactly this data,
// so save/load round-trips are bit-exact); all arithmetic runs on a double
// mirror refreshed whenever the master changes.
struct ParamTensor {
  std::string name;
  std::vector<int> shape;     // logical shape, row-major
  std::vector<float> master;  // serialized truth
  Eigen::MatrixXd mirror;     // [rows x cols] compute layout
  int rows = 0, cols = 0;
  bool l2 = false;  // participates in the L2 penalty
};

// Per-tensor gradient accumulators matching the mirrors' layouts.
using GradientSet = std::vector<Eigen::MatrixXd>;

class Network {
 public:
  Network(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  uint64_t init_seed() const { return init_seed_; }

  int n_tensors() const { return static_cast<int>(tensors_.size()); }
  const ParamTensor& tensor(int i) const { return tensors_[i]; }
  size_t TotalParams() const;
  void SetTensorMaster(int i, const std::vector<float>& data);
  void SetParam(int tensor, int flat_index, float value);
  float GetParam(int tensor, int flat_index) const;
  // Rounds `values` through the float32 master and refreshes the mirror.
  void AssignTensor(int i, const Eigen::MatrixXd& values);

  GradientSet ZeroGradients() const;

  // Capturable layers in encoder-to-decoder order.
  std::vector<std::string> LayerIds() const;

  // Inference forward pass (no dropout). `capture` may list layer ids whose
  // activations should be returned.
  ForwardOutputs Forward(const BatchItem& item,
                         const std::set<std::string>* capture = nullptr) const;

  // Training path. The cache keeps every intermediate needed by Backward and
  // is reusable across calls to avoid reallocation. When dropout_seed is
  // nonzero and the config has a positive rate, inverted dropout is applied
  // at the three standard sites.
  struct Cache;
  ForwardOutputs ForwardTraining(const BatchItem& item, Cache& cache,
                                 uint64_t dropout_seed) const;

  // Accumulates parameter gradients for one item given the loss gradients
  // with respect to the utterance posterior and (optionally) the
  // reconstruction. Must be called with the cache of the matching forward;
  // the cache is mutated only through its scratch buffers.
  void Backward(Cache& cache, const Eigen::VectorXd& d_utterance,
                const Eigen::MatrixXd* d_reconstruction,
                GradientSet& grads) const;

  double L2Penalty() const;
  void AddL2Gradient(GradientSet& grads) const;

  // Opaque to callers; defined in the implementation.
  struct CacheImpl;
  struct Cache {
    Cache();
    ~Cache();
    Cache(Cache&&) noexcept;
    Cache& operator=(Cache&&) noexcept;
    std::unique_ptr<CacheImpl> impl;
  };

 private:
  friend struct CacheImpl;

  int AddTensor(const std::string& name, std::vector<int> shape, int rows,
                int cols, bool l2);
  void InitParams(uint64_t seed);
  void RefreshMirror(int i);

  ForwardOutputs Run(const BatchItem& item, Cache* cache,
                     uint64_t dropout_seed,
                     const std::set<std::string>* capture) const;

  ModelConfig config_;
  uint64_t init_seed_ = 0;
  std::vector<ParamTensor> tensors_;

  // Tensor registry indices, laid out once at construction.
  struct Layout {
    std::vector<int> enc_w, enc_b;
    int gru_wz, gru_wr, gru_wc;
    int gru_uz, gru_ur, gru_uc;
    int gru_bz, gru_br, gru_bc;
    int dense_w, dense_b;
    int vp_w, vp_b;
    int dec_pre_w = -1, dec_pre_b = -1;
    int dec_expand_w = -1, dec_expand_b = -1;
    std::vector<int> dec_w, dec_b;
    int dec_final_w = -1, dec_final_b = -1;
    int dec_post_w = -1, dec_post_b = -1;
  } idx_;
};

// Number of bottleneck frames whose pooling window overlaps at least one
// valid input frame.
int ValidPooledFrames(const ModelConfig& config, int valid_frames);

}  // namespace protolex::model

#endif  // PROTOLEX_MODEL_NETWORK_HPP_
