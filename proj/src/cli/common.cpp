// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "common.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "protolex/util/errors.hpp"

namespace protolex::cli {

json LoadJsonFile(const fs::path& path, const char* what) {
  std::ifstream in(path);
  require(in.good(), err::kIo, "cannot open ", what, " '", path.string(),
          "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(err::kParse, what, " '", path.string(), "': ", e.what());
  }
}

void CheckKeys(const json& j, const std::vector<std::string>& allowed,
               const char* context) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    (void)value;
    require(ok.count(key) > 0, err::kValidation, context,
            ": unknown key '", key, "'");
  }
}

namespace {

template <typename T>
void Maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(err::kParse, "key '", key, "': ", e.what());
    }
  }
}

}  // namespace

corpus::SyntheticCorpusSpec ParseSynthSpec(const json& j) {
  CheckKeys(j,
            {"n_classes", "n_utterances", "carrier_noise_level",
             "keyword_duration_s", "utterance_duration_range_s", "n_speakers",
             "speaker_shift_strength", "attention_rate", "seed",
             "n_mel_bands", "hop_ms"},
            "synthesis spec");
  corpus::SyntheticCorpusSpec spec;
  Maybe(j, "n_classes", spec.n_classes);
  Maybe(j, "n_utterances", spec.n_utterances);
  Maybe(j, "carrier_noise_level", spec.carrier_noise_level);
  Maybe(j, "keyword_duration_s", spec.keyword_duration_s);
  if (j.contains("utterance_duration_range_s")) {
    const auto range = j.at("utterance_duration_range_s")
                           .get<std::vector<double>>();
    require(range.size() == 2, err::kParse,
            "utterance_duration_range_s must be [lo, hi]");
    spec.utterance_duration_range_s = {range[0], range[1]};
  }
  Maybe(j, "n_speakers", spec.n_speakers);
  Maybe(j, "speaker_shift_strength", spec.speaker_shift_strength);
  Maybe(j, "attention_rate", spec.attention_rate);
  Maybe(j, "seed", spec.seed);
  Maybe(j, "n_mel_bands", spec.n_mel_bands);
  Maybe(j, "hop_ms", spec.hop_ms);
  spec.Validate();
  return spec;
}

features::FeatureParams ParseFeatureParams(const json& j) {
  CheckKeys(j,
            {"sample_rate_hz", "window_ms", "hop_ms", "n_mel_bands",
             "mel_fmin_hz", "mel_fmax_hz", "log_floor"},
            "feature params");
  features::FeatureParams p;
  Maybe(j, "sample_rate_hz", p.sample_rate_hz);
  Maybe(j, "window_ms", p.window_ms);
  Maybe(j, "hop_ms", p.hop_ms);
  Maybe(j, "n_mel_bands", p.n_mel_bands);
  Maybe(j, "mel_fmin_hz", p.mel_fmin_hz);
  Maybe(j, "mel_fmax_hz", p.mel_fmax_hz);
  Maybe(j, "log_floor", p.log_floor);
  p.Validate();
  return p;
}

model::ModelConfig ParseModelConfig(const json& j) {
  CheckKeys(j,
            {"n_conv_layers", "conv_channels", "conv_kernel_t",
             "conv_kernel_f", "recurrent_units", "bottleneck_window",
             "bottleneck_stride", "dense_units", "input_frames",
             "input_bands", "dropout_rate", "l2_lambda", "pred_shift_ms"},
            "model config");
  model::ModelConfig c;
  Maybe(j, "n_conv_layers", c.n_conv_layers);
  Maybe(j, "conv_channels", c.conv_channels);
  Maybe(j, "conv_kernel_t", c.conv_kernel_t);
  Maybe(j, "conv_kernel_f", c.conv_kernel_f);
  Maybe(j, "recurrent_units", c.recurrent_units);
  Maybe(j, "bottleneck_window", c.bottleneck_window);
  Maybe(j, "bottleneck_stride", c.bottleneck_stride);
  Maybe(j, "dense_units", c.dense_units);
  Maybe(j, "input_frames", c.input_frames);
  Maybe(j, "input_bands", c.input_bands);
  Maybe(j, "dropout_rate", c.dropout_rate);
  Maybe(j, "l2_lambda", c.l2_lambda);
  Maybe(j, "pred_shift_ms", c.pred_shift_ms);
  return c;  // validated once d_visual is known
}

training::OptimizerConfig ParseOptimizerConfig(const json& j) {
  CheckKeys(j,
            {"alpha", "beta1", "beta2", "adam_epsilon", "minibatch_size",
             "patience", "max_epochs", "loss_mix"},
            "optimizer config");
  training::OptimizerConfig opt;
  Maybe(j, "alpha", opt.alpha);
  Maybe(j, "beta1", opt.beta1);
  Maybe(j, "beta2", opt.beta2);
  Maybe(j, "adam_epsilon", opt.adam_epsilon);
  Maybe(j, "minibatch_size", opt.minibatch_size);
  Maybe(j, "patience", opt.patience);
  Maybe(j, "max_epochs", opt.max_epochs);
  Maybe(j, "loss_mix", opt.loss_mix);
  opt.Validate();
  return opt;
}

training::ExperimentConfig ParseRunConfig(const json& j) {
  CheckKeys(j,
            {"model", "optimizer", "variants", "seeds", "data_seed",
             "train_frac", "val_frac_of_train", "apply_attention_noise",
             "gamma_grid"},
            "run config");
  training::ExperimentConfig config;
  require(j.contains("model"), err::kValidation,
          "run config: missing 'model'");
  config.model = ParseModelConfig(j.at("model"));
  if (j.contains("optimizer"))
    config.optimizer = ParseOptimizerConfig(j.at("optimizer"));
  require(j.contains("variants"), err::kValidation,
          "run config: missing 'variants'");
  for (const auto& name : j.at("variants").get<std::vector<std::string>>())
    config.variants.push_back(model::VariantFromName(name));
  require(j.contains("seeds"), err::kValidation,
          "run config: missing 'seeds'");
  config.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  Maybe(j, "data_seed", config.data_seed);
  Maybe(j, "train_frac", config.train_frac);
  Maybe(j, "val_frac_of_train", config.val_frac_of_train);
  Maybe(j, "apply_attention_noise", config.apply_attention_noise);
  if (j.contains("gamma_grid")) {
    config.detection.gamma_grid =
        j.at("gamma_grid").get<std::vector<double>>();
    config.detection.Validate();
  }
  return config;
}

uint64_t ConfigHash(const json& j) {
  const std::string canonical = j.dump();  // nlohmann sorts object keys
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void WriteProvenance(const fs::path& out_dir, const std::string& command,
                     const json& inputs, const json& config) {
  json p;
  p["command"] = command;
  p["inputs"] = inputs;
  p["config"] = config;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(ConfigHash(config)));
  p["config_hash"] = hash;
  p["format_versions"] = {{"manifest", 1}, {"feature_store", 1},
                          {"checkpoint", 1}};
  std::ofstream out(out_dir / ("provenance_" + command + ".json"));
  require(out.good(), err::kIo, "cannot write provenance in '",
          out_dir.string(), "'");
  out << p.dump(2) << "\n";
}

void WriteSplit(const corpus::SplitAssignment& split, const fs::path& path) {
  json j;
  j["train_ids"] = split.train_ids;
  j["val_ids"] = split.val_ids;
  j["test_ids"] = split.test_ids;
  std::ofstream out(path);
  require(out.good(), err::kIo, "cannot write split '", path.string(), "'");
  out << j.dump(2) << "\n";
}

corpus::SplitAssignment ReadSplit(const fs::path& path) {
  const json j = LoadJsonFile(path, "split file");
  CheckKeys(j, {"train_ids", "val_ids", "test_ids"}, "split file");
  corpus::SplitAssignment s;
  s.train_ids = j.at("train_ids").get<std::vector<std::string>>();
  s.val_ids = j.at("val_ids").get<std::vector<std::string>>();
  s.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  return s;
}

void WritePosteriors(const fs::path& path,
                     const std::vector<std::string>& ids,
                     const std::vector<int>& labels,
                     const Eigen::MatrixXd& posteriors,
                     const std::vector<std::string>& class_names) {
  std::ofstream out(path);
  require(out.good(), err::kIo, "cannot write posteriors '", path.string(),
          "'");
  out.precision(17);
  out << "utterance_id\tlabel";
  for (const auto& name : class_names) out << "\t" << name;
  out << "\n";
  for (size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << "\t" << class_names[static_cast<size_t>(labels[i])];
    for (Eigen::Index c = 0; c < posteriors.cols(); ++c)
      out << "\t" << posteriors(static_cast<Eigen::Index>(i), c);
    out << "\n";
  }
}

PosteriorDump ReadPosteriors(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), err::kIo, "cannot open posteriors '", path.string(),
          "'");
  PosteriorDump dump;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), err::kParse,
          "empty posterior dump");
  {
    std::istringstream header(line);
    std::string col;
    header >> col;  // utterance_id
    header >> col;  // label
    while (header >> col) dump.class_names.push_back(col);
    require(dump.class_names.size() >= 2, err::kParse,
            "posterior dump has fewer than 2 class columns");
  }
  std::vector<double> row(dump.class_names.size());
  size_t line_no = 1;
  std::vector<std::vector<double>> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, label;
    require(static_cast<bool>(ls >> id >> label), err::kParse,
            "posterior dump line ", line_no, ": malformed row");
    int label_index = -1;
    for (size_t c = 0; c < dump.class_names.size(); ++c)
      if (dump.class_names[c] == label) label_index = static_cast<int>(c);
    require(label_index >= 0, err::kUnknownClass, "posterior dump line ",
            line_no, ": label '", label, "' not among the class columns");
    for (auto& v : row)
      require(static_cast<bool>(ls >> v), err::kParse,
              "posterior dump line ", line_no, ": missing value");
    dump.ids.push_back(id);
    dump.labels.push_back(label_index);
    values.push_back(row);
  }
  require(!values.empty(), err::kParse, "posterior dump has no rows");
  dump.posteriors.resize(static_cast<Eigen::Index>(values.size()),
                         static_cast<Eigen::Index>(dump.class_names.size()));
  for (size_t i = 0; i < values.size(); ++i)
    for (size_t c = 0; c < values[i].size(); ++c)
      dump.posteriors(static_cast<Eigen::Index>(i),
                      static_cast<Eigen::Index>(c)) = values[i][c];
  return dump;
}

void WriteMetricsTable(const fs::path& path,
                       const std::vector<evaluation::MetricsRow>& rows) {
  std::ofstream out(path);
  require(out.good(), err::kIo, "cannot write metrics '", path.string(),
          "'");
  out.precision(17);
  out << "word\tgamma\tprecision\trecall\tf\tsupport\n";
  for (const auto& row : rows)
    for (const auto& w : row.words)
      out << w.word << "\t" << row.gamma << "\t" << w.precision << "\t"
          << w.recall << "\t" << w.f_score << "\t" << w.support << "\n";
}

void WriteConfusion(const fs::path& path,
                    const evaluation::ConfusionMatrix& cm,
                    const std::vector<std::string>& class_names) {
  std::ofstream out(path);
  require(out.good(), err::kIo, "cannot write confusion '", path.string(),
          "'");
  out.precision(6);
  out << "# rows: true class, columns: argmax prediction\n";
  out << "# chance_level " << cm.chance_level << "\n";
  out << "true\\pred";
  for (const auto& name : class_names) out << "\t" << name;
  out << "\n";
  const Eigen::MatrixXd normalized = cm.RowNormalized();
  for (Eigen::Index r = 0; r < cm.counts.rows(); ++r) {
    out << class_names[static_cast<size_t>(r)];
    for (Eigen::Index c = 0; c < cm.counts.cols(); ++c)
      out << "\t" << cm.counts(r, c);
    out << "\n";
  }
  out << "\n# row-normalized\n";
  for (Eigen::Index r = 0; r < normalized.rows(); ++r) {
    out << class_names[static_cast<size_t>(r)];
    for (Eigen::Index c = 0; c < normalized.cols(); ++c)
      out << "\t" << normalized(r, c);
    out << "\n";
  }
}

json SweepToJson(const evaluation::SweepResult& sweep) {
  json curve;
  for (const auto& row : sweep.rows) {
    curve["gamma"].push_back(row.gamma);
    curve["precision"].push_back(row.macro_precision);
    curve["recall"].push_back(row.macro_recall);
    curve["f"].push_back(row.macro_f);
  }
  const auto& best = sweep.rows[static_cast<size_t>(sweep.best_index)];
  json j;
  j["macro_curve"] = curve;
  j["best_gamma"] = sweep.best_gamma;
  j["best"] = {{"precision", best.macro_precision},
               {"recall", best.macro_recall},
               {"f", best.macro_f}};
  return j;
}

}  // namespace protolex::cli
