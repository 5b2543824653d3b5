// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/model/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "protolex/util/binio.hpp"
#include "protolex/util/errors.hpp"

namespace protolex::model {

using nlohmann::json;

namespace {
constexpr char kMagic[4] = {'P', 'L', 'X', 'C'};
constexpr uint32_t kVersion = 1;
}  // namespace

std::string ModelConfigToJson(const ModelConfig& c) {
  json j;
  j["n_conv_layers"] = c.n_conv_layers;
  j["conv_channels"] = c.conv_channels;
  j["conv_kernel_t"] = c.conv_kernel_t;
  j["conv_kernel_f"] = c.conv_kernel_f;
  j["recurrent_units"] = c.recurrent_units;
  j["bottleneck_window"] = c.bottleneck_window;
  j["bottleneck_stride"] = c.bottleneck_stride;
  j["dense_units"] = c.dense_units;
  j["d_visual"] = c.d_visual;
  j["input_frames"] = c.input_frames;
  j["input_bands"] = c.input_bands;
  j["dropout_rate"] = c.dropout_rate;
  j["l2_lambda"] = c.l2_lambda;
  j["variant"] = VariantName(c.variant);
  j["pred_shift_ms"] = c.pred_shift_ms;
  return j.dump();
}

ModelConfig ModelConfigFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(err::kParse, "model config: ", e.what());
  }
  ModelConfig c;
  try {
    c.n_conv_layers = j.at("n_conv_layers").get<int>();
    c.conv_channels = j.at("conv_channels").get<int>();
    c.conv_kernel_t = j.at("conv_kernel_t").get<int>();
    c.conv_kernel_f = j.at("conv_kernel_f").get<int>();
    c.recurrent_units = j.at("recurrent_units").get<int>();
    c.bottleneck_window = j.at("bottleneck_window").get<int>();
    c.bottleneck_stride = j.at("bottleneck_stride").get<int>();
    c.dense_units = j.at("dense_units").get<int>();
    c.d_visual = j.at("d_visual").get<int>();
    c.input_frames = j.at("input_frames").get<int>();
    c.input_bands = j.at("input_bands").get<int>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.l2_lambda = j.at("l2_lambda").get<double>();
    c.variant = VariantFromName(j.at("variant").get<std::string>());
    c.pred_shift_ms = j.at("pred_shift_ms").get<double>();
  } catch (const json::exception& e) {
    fail(err::kParse, "model config: ", e.what());
  }
  c.Validate();
  return c;
}

void SaveCheckpoint(const Network& net, const CheckpointMeta& meta,
                    const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), err::kIo, "cannot write checkpoint '", path.string(),
          "'");
  os.write(kMagic, 4);
  binio::WriteU32(os, kVersion);
  binio::WriteString(os, ModelConfigToJson(net.config()));
  binio::WriteU64(os, meta.seed);
  binio::WriteU32(os, static_cast<uint32_t>(meta.epoch));
  binio::WriteF64(os, meta.validation_loss);
  binio::WriteString(os, meta.variant);
  binio::WriteU32(os, static_cast<uint32_t>(net.n_tensors()));
  for (int i = 0; i < net.n_tensors(); ++i) {
    const ParamTensor& t = net.tensor(i);
    binio::WriteString(os, t.name);
    binio::WriteU32(os, static_cast<uint32_t>(t.shape.size()));
    for (int dim : t.shape) binio::WriteU32(os, static_cast<uint32_t>(dim));
    binio::WriteF32Array(os, t.master.data(), t.master.size());
  }
  require(os.good(), err::kIo, "write failed for '", path.string(), "'");
}

LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), err::kIo, "cannot open checkpoint '", path.string(),
          "'");
  char magic[4];
  binio::ReadExact(is, magic, 4, "checkpoint magic");
  require(std::equal(magic, magic + 4, kMagic), err::kCorruptPayload,
          "'", path.string(), "' is not a checkpoint");
  const uint32_t version = binio::ReadU32(is, "checkpoint version");
  require(version == kVersion, err::kVersionMismatch, "checkpoint version ",
          version, ", expected ", kVersion);
  const ModelConfig config =
      ModelConfigFromJson(binio::ReadString(is, "checkpoint config"));

  CheckpointMeta meta;
  meta.seed = binio::ReadU64(is, "checkpoint seed");
  meta.epoch = static_cast<int>(binio::ReadU32(is, "checkpoint epoch"));
  meta.validation_loss = binio::ReadF64(is, "checkpoint val loss");
  meta.variant = binio::ReadString(is, "checkpoint variant");

  LoadedCheckpoint out{Network(config, meta.seed), meta};
  const uint32_t n_tensors = binio::ReadU32(is, "tensor count");
  require(n_tensors == static_cast<uint32_t>(out.net.n_tensors()),
          err::kCorruptPayload, "checkpoint holds ", n_tensors,
          " tensors, model defines ", out.net.n_tensors());
  std::vector<float> data;
  for (uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = binio::ReadString(is, "tensor name");
    const ParamTensor& expect = out.net.tensor(static_cast<int>(i));
    require(name == expect.name, err::kCorruptPayload,
            "tensor order mismatch: got '", name, "', expected '",
            expect.name, "'");
    const uint32_t ndim = binio::ReadU32(is, "tensor rank");
    require(ndim == expect.shape.size(), err::kCorruptPayload,
            "tensor '", name, "' rank mismatch");
    size_t numel = 1;
    for (uint32_t k = 0; k < ndim; ++k) {
      const uint32_t dim = binio::ReadU32(is, "tensor dim");
      require(dim == static_cast<uint32_t>(expect.shape[k]),
              err::kCorruptPayload, "tensor '", name, "' shape mismatch");
      numel *= dim;
    }
    data.resize(numel);
    binio::ReadF32Array(is, data.data(), numel, "tensor payload");
    out.net.SetTensorMaster(static_cast<int>(i), data);
  }
  return out;
}

}  // namespace protolex::model
