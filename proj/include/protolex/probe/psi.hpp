// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_PROBE_PSI_HPP_
#define PROTOLEX_PROBE_PSI_HPP_

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "protolex/features/feature_store.hpp"
#include "protolex/model/network.hpp"

namespace protolex::probe {

struct PhoneSegment {
  std::string phone;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct PhoneAlignment {
  std::string utterance_id;
  std::vector<PhoneSegment> segments;  // ordered, non-overlapping
};

// Alignment file: one line per segment, whitespace separated:
//   utterance_id phone start_s end_s
std::vector<PhoneAlignment> LoadAlignments(const std::filesystem::path& path);

// Scalar activation samples grouped by (layer, node, phone).
struct LayerSamples {
  int n_nodes = 0;
  // samples[node][phone] -> activation values at phone mid frames
  std::vector<std::vector<std::vector<double>>> samples;
};

struct ActivationSampleSet {
  std::vector<std::string> phones;  // closed phone set, index space
  std::map<std::string, LayerSamples> layers;
  int skipped_segments = 0;  // midpoints beyond the clipped input window
};

enum class ConvScalarize { kMean, kMax };

struct ProbeOptions {
  ConvScalarize scalarize = ConvScalarize::kMean;
  // Optional closed phone set; when empty it is collected from the data.
  std::vector<std::string> phone_set;
};

// Runs the model over every aligned utterance and samples each requested
// layer at the middle frame of each phone segment, mapped onto the layer's
// own temporal grid. Conv-grid nodes are channels, scalarized across the
// frequency axis.
ActivationSampleSet MidframeActivations(
    const model::Network& net, const features::FeatureStore& store,
    const std::vector<PhoneAlignment>& alignments,
    const std::vector<std::string>& layer_ids, double hop_ms,
    const ProbeOptions& options = {});

struct PsiOptions {
  double alpha = 0.05;
  int min_samples = 10;
};

// Per layer: psi(node, phone) counts the other phones whose samples differ
// under a two-sided pooled-variance t-test at `alpha`; -1 marks pairs
// excluded for insufficient samples. mean_abs_t averages |t| over the
// finite statistics of the same comparisons.
struct LayerPsi {
  Eigen::MatrixXi psi;         // [nodes x phones]
  Eigen::MatrixXd mean_abs_t;  // [nodes x phones]
  int excluded_pairs = 0;
};

struct PsiReport {
  std::vector<std::string> phones;
  std::map<std::string, LayerPsi> layers;
  PsiOptions options;
};

PsiReport ComputePsi(const ActivationSampleSet& samples,
                     const PsiOptions& options = {});

// Two-sided unpaired pooled-variance t-test. Zero pooled variance resolves
// by the limiting t-statistic: equal means accept, distinct means reject.
struct TTest {
  double t = 0.0;
  double p = 1.0;
  bool significant = false;
};
TTest UnpairedTTest(const std::vector<double>& a, const std::vector<double>& b,
                    double alpha);

// Layer-level Fig.-3-style summary: PSI averaged over all nodes and phone
// categories, with the standard error across phone categories.
struct LayerSummaryRow {
  std::string layer;
  double mean_psi = 0.0;
  double stderr_psi = 0.0;  // across phone categories
  double mean_abs_t = 0.0;
  double stderr_abs_t = 0.0;
  int n_nodes = 0;
};

std::vector<LayerSummaryRow> LayerSummary(
    const PsiReport& report, const std::vector<std::string>& layer_order);

}  // namespace protolex::probe

#endif  // PROTOLEX_PROBE_PSI_HPP_
