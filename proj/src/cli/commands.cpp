// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>

#include "common.hpp"
#include "protolex/evaluation/metrics.hpp"
#include "protolex/features/audio_io.hpp"
#include "protolex/infotheory/infotheory.hpp"
#include "protolex/model/checkpoint.hpp"
#include "protolex/probe/psi.hpp"
#include "protolex/util/errors.hpp"
#include "protolex/util/parallel.hpp"

namespace protolex::cli {

namespace {

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, err::kIo, "cannot create directory '", dir.string(), "'");
}

std::string RunDirName(model::Variant variant, uint64_t seed) {
  return model::VariantName(variant) + "_seed" + std::to_string(seed);
}

}  // namespace

void CmdSynth(const fs::path& spec_file, const fs::path& out_dir) {
  const json spec_json = LoadJsonFile(spec_file, "synthesis spec");
  const corpus::SyntheticCorpusSpec spec = ParseSynthSpec(spec_json);
  EnsureDir(out_dir);

  const corpus::SyntheticCorpus generated = GenerateSyntheticCorpus(spec);
  corpus::SaveManifest(generated.manifest, out_dir / "manifest.jsonl");
  generated.store.Save(out_dir / "features.plxf");

  WriteProvenance(out_dir, "synth", {{"spec_file", spec_file.string()}},
                  spec_json);
  std::cout << "synth: " << generated.manifest.records.size()
            << " utterances, " << generated.manifest.vocabulary.size()
            << " classes -> " << out_dir.string() << "\n";
}

void CmdPrepare(const fs::path& manifest_path, const fs::path& audio_root,
                const fs::path& params_file, const fs::path& out_file) {
  const corpus::CorpusManifest manifest = corpus::LoadManifest(manifest_path);
  features::FeatureParams params;
  json params_json = json::object();
  if (!params_file.empty()) {
    params_json = LoadJsonFile(params_file, "feature params");
    params = ParseFeatureParams(params_json);
  }

  features::FeatureStore store;
  for (const auto& record : manifest.records) {
    const fs::path audio = audio_root / record.audio_ref;
    features::Waveform wave;
    if (audio.extension() == ".f32") {
      wave = features::ReadRawF32(audio, params.sample_rate_hz);
    } else {
      wave = features::ReadWav(audio);
      require(wave.sample_rate_hz == params.sample_rate_hz,
              err::kConfigMismatch, "'", audio.string(), "' is sampled at ",
              wave.sample_rate_hz, " Hz, feature params expect ",
              params.sample_rate_hz);
    }
    store.Put(record.utterance_id,
              features::ComputeLogMel(wave.samples, params));
  }
  if (out_file.has_parent_path()) EnsureDir(out_file.parent_path());
  store.Save(out_file);
  WriteProvenance(out_file.parent_path().empty() ? "."
                                                 : out_file.parent_path(),
                  "prepare",
                  {{"manifest", manifest_path.string()},
                   {"audio_root", audio_root.string()},
                   {"out", out_file.string()}},
                  params_json);
  std::cout << "prepare: " << store.size() << " utterances -> "
            << out_file.string() << "\n";
}

void CmdTrain(const fs::path& config_file, const fs::path& manifest_path,
              const fs::path& features_path, const fs::path& out_dir,
              int threads) {
  const json config_json = LoadJsonFile(config_file, "run config");
  training::ExperimentConfig config = ParseRunConfig(config_json);
  config.n_threads = ResolveThreads(threads);

  const corpus::CorpusManifest manifest = corpus::LoadManifest(manifest_path);
  const features::FeatureStore store =
      features::FeatureStore::Load(features_path);
  require(store.size() > 0, err::kValidation, "feature store is empty");
  config.geometry.hop_ms = store.Get(store.ids().front()).params.hop_ms;

  EnsureDir(out_dir);
  const training::ExperimentReport report =
      training::RunExperiment(manifest, store, config, &std::cerr);

  WriteSplit(report.split, out_dir / "split.json");
  {
    json counts;
    counts["classes"] = manifest.vocabulary.classes();
    counts["counts"] = report.train_label_counts;
    std::ofstream out(out_dir / "train_label_counts.json");
    out << counts.dump(2) << "\n";
  }

  json experiment;
  experiment["data_seed"] = config.data_seed;
  for (const auto& run : report.runs) {
    const fs::path run_dir =
        out_dir / "runs" / RunDirName(run.variant, run.seed);
    EnsureDir(run_dir);

    json run_json;
    run_json["variant"] = model::VariantName(run.variant);
    run_json["seed"] = run.seed;
    run_json["failed"] = run.failed;
    run_json["error"] = run.error;

    if (!run.failed) {
      {
        std::ofstream history(run_dir / "history.tsv");
        training::WriteHistory(run.state, history);
      }
      model::CheckpointMeta meta;
      meta.seed = run.seed;
      meta.epoch = run.state.best_epoch;
      meta.validation_loss = run.state.best_val;
      meta.variant = model::VariantName(run.variant);
      SaveCheckpoint(*run.net, meta, run_dir / "checkpoint.plxc");

      WriteMetricsTable(run_dir / "metrics.tsv", run.sweep.rows);
      WritePosteriors(run_dir / "posteriors.tsv", report.test_ids,
                      report.test_labels, run.test_posteriors,
                      manifest.vocabulary.classes());

      run_json.merge_patch(SweepToJson(run.sweep));
      run_json["best_epoch"] = run.state.best_epoch;
      run_json["best_val"] = run.state.best_val;
      run_json["stopping_reason"] = run.state.stopping_reason;
      run_json["checkpoint"] = "checkpoint.plxc";
    }
    {
      std::ofstream out(run_dir / "summary.json");
      out << run_json.dump(2) << "\n";
    }
    experiment["runs"].push_back(
        {{"dir", "runs/" + RunDirName(run.variant, run.seed)},
         {"variant", model::VariantName(run.variant)},
         {"seed", run.seed},
         {"failed", run.failed}});
  }
  {
    std::ofstream out(out_dir / "experiment.json");
    out << experiment.dump(2) << "\n";
  }
  WriteProvenance(out_dir, "train",
                  {{"config", config_file.string()},
                   {"manifest", manifest_path.string()},
                   {"features", features_path.string()}},
                  config_json);

  int failed = 0;
  for (const auto& run : report.runs) failed += run.failed ? 1 : 0;
  std::cout << "train: " << report.runs.size() << " runs (" << failed
            << " failed) -> " << out_dir.string() << "\n";
}

void CmdEvaluate(const EvaluateOptions& options) {
  model::LoadedCheckpoint loaded = model::LoadCheckpoint(options.checkpoint);
  const corpus::CorpusManifest manifest =
      corpus::LoadManifest(options.manifest);
  require(loaded.net.config().d_visual == manifest.vocabulary.size(),
          err::kConfigMismatch, "checkpoint expects d_visual = ",
          loaded.net.config().d_visual, " but the manifest vocabulary has ",
          manifest.vocabulary.size(), " classes");
  const features::FeatureStore store =
      features::FeatureStore::Load(options.features);

  std::vector<corpus::UtteranceRecord> records;
  if (!options.split_file.empty()) {
    const corpus::SplitAssignment split = ReadSplit(options.split_file);
    std::vector<std::string> ids;
    if (options.subset == "train") ids = split.train_ids;
    else if (options.subset == "val") ids = split.val_ids;
    else if (options.subset == "test") ids = split.test_ids;
    else if (options.subset == "all") {
      ids = split.train_ids;
      ids.insert(ids.end(), split.val_ids.begin(), split.val_ids.end());
      ids.insert(ids.end(), split.test_ids.begin(), split.test_ids.end());
    } else {
      fail(err::kValidation, "unknown subset '", options.subset, "'");
    }
    records = corpus::SelectRecords(manifest, ids);
  } else {
    require(options.subset == "all", err::kValidation,
            "subset selection requires --split-file");
    records = manifest.records;
  }
  require(!records.empty(), err::kValidation, "no records selected");

  const int threads = ResolveThreads(options.threads);
  std::vector<training::TrainItem> items =
      training::BuildItems(records, store, loaded.net.config());

  Eigen::MatrixXd posteriors(static_cast<Eigen::Index>(items.size()),
                             loaded.net.config().d_visual);
  std::vector<std::vector<double>> boundaries(items.size());
  const double hop_ms = store.Get(records.front().utterance_id).params.hop_ms;
  ParallelFor(items.size(), threads, [&](size_t i, int) {
    const model::ForwardOutputs out = loaded.net.Forward(items[i].input);
    posteriors.row(static_cast<Eigen::Index>(i)) =
        out.utterance_posterior.transpose();
    boundaries[i] = evaluation::ExtractBoundaries(
        out.frame_posteriors, loaded.net.config().TimeDownsample(), hop_ms);
  });

  std::vector<int> labels;
  std::vector<std::string> ids;
  for (const auto& r : records) {
    labels.push_back(r.label);
    ids.push_back(r.utterance_id);
  }

  evaluation::DetectionConfig detection =
      evaluation::DetectionConfig::Default();
  if (!options.gamma_grid.empty()) {
    detection.gamma_grid = options.gamma_grid;
    detection.Validate();
  }
  const evaluation::SweepResult sweep = evaluation::GammaSweep(
      posteriors, labels, manifest.vocabulary, detection);
  const evaluation::ConfusionMatrix confusion = evaluation::Confusion(
      posteriors, labels, manifest.vocabulary.size());

  EnsureDir(options.out_dir);
  WriteMetricsTable(options.out_dir / "metrics.tsv", sweep.rows);
  WriteConfusion(options.out_dir / "confusion.tsv", confusion,
                 manifest.vocabulary.classes());
  WritePosteriors(options.out_dir / "posteriors.tsv", ids, labels,
                  posteriors, manifest.vocabulary.classes());
  {
    std::ofstream out(options.out_dir / "boundaries.tsv");
    out << "utterance_id\tboundaries_s\n";
    out.precision(6);
    for (size_t i = 0; i < ids.size(); ++i) {
      out << ids[i] << "\t";
      for (size_t b = 0; b < boundaries[i].size(); ++b)
        out << (b ? "," : "") << boundaries[i][b];
      out << "\n";
    }
  }
  json summary = SweepToJson(sweep);
  summary["subset"] = options.subset;
  summary["n_utterances"] = ids.size();
  summary["variant"] = loaded.meta.variant;
  summary["seed"] = loaded.meta.seed;
  {
    std::ofstream out(options.out_dir / "summary.json");
    out << summary.dump(2) << "\n";
  }
  WriteProvenance(options.out_dir, "evaluate",
                  {{"checkpoint", options.checkpoint.string()},
                   {"manifest", options.manifest.string()},
                   {"features", options.features.string()},
                   {"subset", options.subset}},
                  json{{"gamma_grid", detection.gamma_grid}});
  std::cout << "evaluate: best gamma " << sweep.best_gamma << ", macro F "
            << sweep.rows[static_cast<size_t>(sweep.best_index)].macro_f
            << " over " << ids.size() << " utterances -> "
            << options.out_dir.string() << "\n";
}

void CmdProbe(const ProbeOptions& options) {
  model::LoadedCheckpoint loaded = model::LoadCheckpoint(options.checkpoint);
  const features::FeatureStore store =
      features::FeatureStore::Load(options.features);
  const auto alignments = probe::LoadAlignments(options.alignments);
  require(!alignments.empty(), err::kValidation, "no alignments given");

  std::vector<std::string> layers = options.layers;
  if (layers.empty()) layers = loaded.net.LayerIds();

  probe::ProbeOptions probe_options;
  if (options.scalarize == "mean")
    probe_options.scalarize = probe::ConvScalarize::kMean;
  else if (options.scalarize == "max")
    probe_options.scalarize = probe::ConvScalarize::kMax;
  else
    fail(err::kValidation, "unknown scalarization '", options.scalarize,
         "'");

  const double hop_ms =
      store.Get(alignments.front().utterance_id).params.hop_ms;
  const probe::ActivationSampleSet samples = probe::MidframeActivations(
      loaded.net, store, alignments, layers, hop_ms, probe_options);

  probe::PsiOptions psi_options;
  psi_options.alpha = options.alpha;
  psi_options.min_samples = options.min_samples;
  const probe::PsiReport report = probe::ComputePsi(samples, psi_options);
  const auto summary = probe::LayerSummary(report, layers);

  EnsureDir(options.out_dir);
  {
    std::ofstream out(options.out_dir / "psi_nodes.tsv");
    out.precision(8);
    out << "layer\tnode\tphone\tpsi\tmean_t\n";
    for (const auto& layer_id : layers) {
      const auto it = report.layers.find(layer_id);
      if (it == report.layers.end()) continue;
      const auto& lp = it->second;
      for (Eigen::Index node = 0; node < lp.psi.rows(); ++node)
        for (Eigen::Index p = 0; p < lp.psi.cols(); ++p)
          out << layer_id << "\t" << node << "\t"
              << report.phones[static_cast<size_t>(p)] << "\t"
              << lp.psi(node, p) << "\t" << lp.mean_abs_t(node, p) << "\n";
    }
  }
  {
    std::ofstream out(options.out_dir / "psi_layers.tsv");
    out.precision(8);
    out << "layer\tmean_psi\tstderr_psi\tmean_abs_t\tstderr_abs_t\tn_nodes\n";
    for (const auto& row : summary)
      out << row.layer << "\t" << row.mean_psi << "\t" << row.stderr_psi
          << "\t" << row.mean_abs_t << "\t" << row.stderr_abs_t << "\t"
          << row.n_nodes << "\n";
  }
  WriteProvenance(options.out_dir, "probe",
                  {{"checkpoint", options.checkpoint.string()},
                   {"features", options.features.string()},
                   {"alignments", options.alignments.string()}},
                  json{{"layers", layers},
                       {"alpha", options.alpha},
                       {"min_samples", options.min_samples},
                       {"scalarize", options.scalarize},
                       {"skipped_segments", samples.skipped_segments}});
  std::cout << "probe: " << summary.size() << " layers, "
            << report.phones.size() << " phones ("
            << samples.skipped_segments << " segments skipped) -> "
            << options.out_dir.string() << "\n";
}

void CmdQuality(const QualityOptions& options) {
  const PosteriorDump dump = ReadPosteriors(options.posteriors);
  const int d = static_cast<int>(dump.class_names.size());

  Eigen::VectorXd prior(d);
  std::string prior_source;
  if (options.prior == "uniform") {
    prior.setConstant(1.0 / d);
    prior_source = "uniform";
  } else if (options.prior == "empirical") {
    prior.setZero();
    for (int label : dump.labels) prior(label) += 1.0;
    prior /= prior.sum();
    prior_source = "empirical(dump labels)";
  } else if (!options.prior_file.empty()) {
    const json j = LoadJsonFile(options.prior_file, "prior counts");
    std::vector<double> counts;
    if (j.is_array()) {
      counts = j.get<std::vector<double>>();
    } else {
      CheckKeys(j, {"classes", "counts"}, "prior counts");
      counts = j.at("counts").get<std::vector<double>>();
    }
    require(static_cast<int>(counts.size()) == d, err::kConfigMismatch,
            "prior file has ", counts.size(), " classes, dump has ", d);
    prior.setZero();
    for (int c = 0; c < d; ++c) prior(c) = counts[static_cast<size_t>(c)];
    require(prior.sum() > 0.0, err::kValidation, "prior counts are all 0");
    prior /= prior.sum();
    prior_source = "file:" + options.prior_file.string();
  } else {
    fail(err::kValidation,
         "choose a prior: --prior uniform|empirical or --prior-file");
  }

  const infotheory::LexiconQuality plugin =
      infotheory::ModelQualityFromPosteriors(dump.posteriors, prior);
  const infotheory::JointDistribution joint =
      infotheory::EmpiricalPredictionJoint(dump.posteriors, dump.labels, d);
  const infotheory::LexiconQuality discrete =
      infotheory::LexiconQualityOfJoint(joint);

  json out;
  out["eq2_plugin"] = {{"mi_bits", plugin.mi_bits},
                       {"normalizer_bits", plugin.normalizer_bits},
                       {"q", plugin.q},
                       {"skipped_cells", plugin.skipped_cells},
                       {"renormalized", plugin.renormalized}};
  out["eq1_empirical_argmax"] = {{"mi_bits", discrete.mi_bits},
                                 {"normalizer_bits", discrete.normalizer_bits},
                                 {"q", discrete.q}};
  out["prior_source"] = prior_source;
  out["n_utterances"] = dump.ids.size();
  out["n_classes"] = d;
  if (options.out_file.has_parent_path())
    EnsureDir(options.out_file.parent_path());
  {
    std::ofstream f(options.out_file);
    require(f.good(), err::kIo, "cannot write '", options.out_file.string(),
            "'");
    f << out.dump(2) << "\n";
  }
  const fs::path prov_dir = options.out_file.has_parent_path()
                                ? options.out_file.parent_path()
                                : fs::path(".");
  WriteProvenance(prov_dir, "quality",
                  {{"posteriors", options.posteriors.string()}},
                  json{{"prior_source", prior_source}});
  std::cout << "quality: eq2 q = " << plugin.q
            << ", eq1(argmax joint) q = " << discrete.q << " -> "
            << options.out_file.string() << "\n";
}

void CmdReport(const fs::path& run_dir, const fs::path& out_dir) {
  const fs::path runs = run_dir / "runs";
  require(fs::exists(runs), err::kIo, "'", run_dir.string(),
          "' has no runs/ directory");

  struct RunSummary {
    std::string variant;
    uint64_t seed = 0;
    bool failed = false;
    std::vector<double> gamma, precision, recall, f;
  };
  std::vector<RunSummary> summaries;
  std::vector<fs::path> run_dirs;
  for (const auto& entry : fs::directory_iterator(runs))
    if (entry.is_directory()) run_dirs.push_back(entry.path());
  std::sort(run_dirs.begin(), run_dirs.end());

  for (const auto& dir : run_dirs) {
    const fs::path file = dir / "summary.json";
    if (!fs::exists(file)) continue;
    const json j = LoadJsonFile(file, "run summary");
    RunSummary s;
    s.variant = j.at("variant").get<std::string>();
    s.seed = j.at("seed").get<uint64_t>();
    s.failed = j.at("failed").get<bool>();
    if (!s.failed) {
      const json& curve = j.at("macro_curve");
      s.gamma = curve.at("gamma").get<std::vector<double>>();
      s.precision = curve.at("precision").get<std::vector<double>>();
      s.recall = curve.at("recall").get<std::vector<double>>();
      s.f = curve.at("f").get<std::vector<double>>();
    }
    summaries.push_back(std::move(s));
  }
  require(!summaries.empty(), err::kValidation, "no run summaries under '",
          runs.string(), "'");

  EnsureDir(out_dir);
  json report;
  std::set<std::string> variants;
  for (const auto& s : summaries) variants.insert(s.variant);

  for (const auto& variant : variants) {
    std::vector<const RunSummary*> ok;
    int failed = 0;
    for (const auto& s : summaries) {
      if (s.variant != variant) continue;
      if (s.failed) {
        ++failed;
        continue;
      }
      ok.push_back(&s);
    }
    json v;
    v["n_runs"] = ok.size();
    v["n_failed"] = failed;
    if (!ok.empty()) {
      const size_t n_gamma = ok.front()->gamma.size();
      for (const auto* s : ok)
        require(s->gamma.size() == n_gamma, err::kValidation,
                "gamma grids differ between runs of '", variant, "'");
      std::vector<double> p(n_gamma, 0.0), r(n_gamma, 0.0), f(n_gamma, 0.0);
      for (const auto* s : ok)
        for (size_t i = 0; i < n_gamma; ++i) {
          p[i] += s->precision[i];
          r[i] += s->recall[i];
          f[i] += s->f[i];
        }
      for (size_t i = 0; i < n_gamma; ++i) {
        p[i] /= static_cast<double>(ok.size());
        r[i] /= static_cast<double>(ok.size());
        f[i] /= static_cast<double>(ok.size());
      }
      // Curve file per variant, Fig.-2 style.
      std::ofstream curve(out_dir / ("curve_" + variant + ".tsv"));
      curve.precision(8);
      curve << "gamma\tprecision\trecall\tf\tn_runs\n";
      size_t best = 0;
      for (size_t i = 0; i < n_gamma; ++i) {
        curve << ok.front()->gamma[i] << "\t" << p[i] << "\t" << r[i] << "\t"
              << f[i] << "\t" << ok.size() << "\n";
        if (f[i] > f[best]) best = i;
      }
      v["best_gamma"] = ok.front()->gamma[best];
      v["best_macro_f"] = f[best];
    }
    report["variants"][variant] = v;
  }

  // Fig.-3 style aggregation when per-run PSI summaries exist.
  json psi;
  for (const auto& dir : run_dirs) {
    const fs::path file = dir / "psi_layers.tsv";
    if (!fs::exists(file)) continue;
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string layer;
      double mean_psi, se_psi, mean_t, se_t;
      int n_nodes;
      if (ls >> layer >> mean_psi >> se_psi >> mean_t >> se_t >> n_nodes) {
        psi[layer]["mean_psi"].push_back(mean_psi);
        psi[layer]["mean_abs_t"].push_back(mean_t);
      }
    }
  }
  if (!psi.empty()) {
    json layer_avg;
    for (const auto& [layer, values] : psi.items()) {
      const auto psis = values.at("mean_psi").get<std::vector<double>>();
      const auto ts = values.at("mean_abs_t").get<std::vector<double>>();
      double psi_sum = 0.0, t_sum = 0.0;
      for (double x : psis) psi_sum += x;
      for (double x : ts) t_sum += x;
      layer_avg[layer] = {{"mean_psi", psi_sum / psis.size()},
                          {"mean_abs_t", t_sum / ts.size()},
                          {"n_runs", psis.size()}};
    }
    report["psi_layers"] = layer_avg;
  }

  {
    std::ofstream out(out_dir / "report_summary.json");
    out << report.dump(2) << "\n";
  }
  WriteProvenance(out_dir, "report", {{"run_dir", run_dir.string()}},
                  json::object());
  std::cout << "report: " << variants.size() << " variants aggregated -> "
            << out_dir.string() << "\n";
}

}  // namespace protolex::cli
