// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#include "protolex/probe/psi.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "protolex/util/errors.hpp"

namespace protolex::probe {

std::vector<PhoneAlignment> LoadAlignments(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), err::kIo, "cannot open alignment file '", path.string(),
          "'");
  std::map<std::string, PhoneAlignment> by_utterance;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string utterance_id;
    PhoneSegment seg;
    if (!(ls >> utterance_id >> seg.phone >> seg.start_s >> seg.end_s))
      fail(err::kParse, "alignment line ", line_no,
           ": expected 'utterance_id phone start_s end_s'");
    require(seg.start_s >= 0.0 && seg.end_s > seg.start_s, err::kParse,
            "alignment line ", line_no, ": bad segment times");
    auto& a = by_utterance[utterance_id];
    a.utterance_id = utterance_id;
    if (!a.segments.empty())
      require(seg.start_s >= a.segments.back().end_s - 1e-9, err::kParse,
              "alignment line ", line_no, ": segments overlap or are out of "
                                          "order for '",
              utterance_id, "'");
    a.segments.push_back(seg);
  }
  std::vector<PhoneAlignment> out;
  out.reserve(by_utterance.size());
  for (auto& [id, a] : by_utterance) out.push_back(std::move(a));
  return out;
}

ActivationSampleSet MidframeActivations(
    const model::Network& net, const features::FeatureStore& store,
    const std::vector<PhoneAlignment>& alignments,
    const std::vector<std::string>& layer_ids, double hop_ms,
    const ProbeOptions& options) {
  require(!layer_ids.empty(), err::kValidation, "no layers requested");
  require(hop_ms > 0.0, err::kValidation, "hop_ms must be positive");

  ActivationSampleSet out;
  if (!options.phone_set.empty()) {
    out.phones = options.phone_set;
  } else {
    std::set<std::string> seen;
    for (const auto& a : alignments)
      for (const auto& s : a.segments) seen.insert(s.phone);
    out.phones.assign(seen.begin(), seen.end());
  }
  std::map<std::string, int> phone_index;
  for (size_t i = 0; i < out.phones.size(); ++i)
    phone_index[out.phones[i]] = static_cast<int>(i);

  const std::set<std::string> capture(layer_ids.begin(), layer_ids.end());

  for (const auto& alignment : alignments) {
    require(store.Contains(alignment.utterance_id), err::kValidation,
            "alignment references unknown utterance '",
            alignment.utterance_id, "'");
    const model::BatchItem item =
        model::MakeBatchItem(store.Get(alignment.utterance_id), net.config());
    const model::ForwardOutputs fwd = net.Forward(item, &capture);

    for (const auto& segment : alignment.segments) {
      const auto it = phone_index.find(segment.phone);
      require(it != phone_index.end(), err::kUnknownClass, "phone '",
              segment.phone, "' is not in the declared phone set");
      const int phone = it->second;
      const int input_frame = static_cast<int>(
          std::lround((segment.start_s + segment.end_s) / 2.0 * 1000.0 /
                      hop_ms));
      if (input_frame >= item.valid_frames ||
          input_frame >= net.config().input_frames) {
        ++out.skipped_segments;  // midpoint beyond the clipped window
        continue;
      }

      for (const auto& [layer_id, act] : fwd.activations) {
        LayerSamples& ls = out.layers[layer_id];
        const int n_nodes = static_cast<int>(act.values.rows());
        if (ls.n_nodes == 0) {
          ls.n_nodes = n_nodes;
          ls.samples.assign(
              static_cast<size_t>(n_nodes),
              std::vector<std::vector<double>>(out.phones.size()));
        }
        const int frame = input_frame / act.time_downsample;
        if (frame >= act.frames) {
          continue;
        }
        for (int node = 0; node < n_nodes; ++node) {
          double value;
          if (act.bands > 1) {
            // Conv grid: scalarize the channel across the frequency axis.
            const auto row = act.values.row(node).segment(
                static_cast<Eigen::Index>(frame) * act.bands, act.bands);
            value = options.scalarize == ConvScalarize::kMean
                        ? row.mean()
                        : row.maxCoeff();
          } else {
            value = act.values(node, frame);
          }
          ls.samples[static_cast<size_t>(node)][static_cast<size_t>(phone)]
              .push_back(value);
        }
      }
    }
  }
  return out;
}

TTest UnpairedTTest(const std::vector<double>& a, const std::vector<double>& b,
                    double alpha) {
  TTest r;
  const auto n1 = static_cast<double>(a.size());
  const auto n2 = static_cast<double>(b.size());
  require(a.size() >= 2 && b.size() >= 2, err::kValidation,
          "t-test needs at least 2 samples per side");
  double m1 = 0.0, m2 = 0.0;
  for (double v : a) m1 += v;
  for (double v : b) m2 += v;
  m1 /= n1;
  m2 /= n2;
  double ss1 = 0.0, ss2 = 0.0;
  for (double v : a) ss1 += (v - m1) * (v - m1);
  for (double v : b) ss2 += (v - m2) * (v - m2);
  const double df = n1 + n2 - 2.0;
  const double sp2 = (ss1 + ss2) / df;

  if (sp2 <= 0.0) {
    // Degenerate: no within-group variance. Distinct means separate
    // perfectly (|t| -> inf), equal means do not separate at all.
    const bool distinct = m1 != m2;
    r.t = distinct ? (m1 > m2 ? 1.0 : -1.0) *
                         std::numeric_limits<double>::infinity()
                   : 0.0;
    r.p = distinct ? 0.0 : 1.0;
    r.significant = distinct;
    return r;
  }

  r.t = (m1 - m2) / std::sqrt(sp2 * (1.0 / n1 + 1.0 / n2));
  const boost::math::students_t dist(df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.significant = r.p < alpha;
  return r;
}

PsiReport ComputePsi(const ActivationSampleSet& samples,
                     const PsiOptions& options) {
  require(options.alpha > 0.0 && options.alpha < 1.0, err::kValidation,
          "alpha must be in (0,1)");
  require(options.min_samples >= 2, err::kValidation,
          "min_samples must be >= 2");
  const int n_phones = static_cast<int>(samples.phones.size());
  require(n_phones >= 2, err::kValidation, "need at least 2 phones");

  PsiReport report;
  report.phones = samples.phones;
  report.options = options;

  for (const auto& [layer_id, ls] : samples.layers) {
    LayerPsi lp;
    lp.psi = Eigen::MatrixXi::Constant(ls.n_nodes, n_phones, -1);
    lp.mean_abs_t = Eigen::MatrixXd::Zero(ls.n_nodes, n_phones);

    for (int node = 0; node < ls.n_nodes; ++node) {
      const auto& per_phone = ls.samples[static_cast<size_t>(node)];
      for (int p = 0; p < n_phones; ++p) {
        const auto& own = per_phone[static_cast<size_t>(p)];
        if (static_cast<int>(own.size()) < options.min_samples) {
          ++lp.excluded_pairs;
          continue;  // phone stays excluded (-1)
        }
        int count = 0;
        double t_sum = 0.0;
        int t_n = 0;
        for (int q = 0; q < n_phones; ++q) {
          if (q == p) continue;
          const auto& other = per_phone[static_cast<size_t>(q)];
          if (static_cast<int>(other.size()) < options.min_samples) {
            ++lp.excluded_pairs;
            continue;
          }
          const TTest test = UnpairedTTest(own, other, options.alpha);
          if (test.significant) ++count;
          if (std::isfinite(test.t)) {
            t_sum += std::abs(test.t);
            ++t_n;
          }
        }
        lp.psi(node, p) = count;
        lp.mean_abs_t(node, p) = t_n > 0 ? t_sum / t_n : 0.0;
      }
    }
    report.layers.emplace(layer_id, std::move(lp));
  }
  return report;
}

std::vector<LayerSummaryRow> LayerSummary(
    const PsiReport& report, const std::vector<std::string>& layer_order) {
  require(!report.layers.empty(), err::kValidation, "empty PSI report");
  const int n_phones = static_cast<int>(report.phones.size());

  std::vector<LayerSummaryRow> rows;
  for (const auto& layer_id : layer_order) {
    const auto it = report.layers.find(layer_id);
    if (it == report.layers.end()) continue;
    const LayerPsi& lp = it->second;

    // Phone-category means over nodes, then mean and standard error across
    // phone categories.
    std::vector<double> phone_psi, phone_t;
    for (int p = 0; p < n_phones; ++p) {
      double psi_sum = 0.0, t_sum = 0.0;
      int n = 0;
      for (int node = 0; node < lp.psi.rows(); ++node) {
        if (lp.psi(node, p) < 0) continue;
        psi_sum += lp.psi(node, p);
        t_sum += lp.mean_abs_t(node, p);
        ++n;
      }
      if (n == 0) continue;
      phone_psi.push_back(psi_sum / n);
      phone_t.push_back(t_sum / n);
    }
    if (phone_psi.empty()) continue;

    auto mean_of = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    auto stderr_of = [&](const std::vector<double>& v, double mean) {
      if (v.size() < 2) return 0.0;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      return std::sqrt(ss / static_cast<double>(v.size() - 1)) /
             std::sqrt(static_cast<double>(v.size()));
    };

    LayerSummaryRow row;
    row.layer = layer_id;
    row.n_nodes = static_cast<int>(lp.psi.rows());
    row.mean_psi = mean_of(phone_psi);
    row.stderr_psi = stderr_of(phone_psi, row.mean_psi);
    row.mean_abs_t = mean_of(phone_t);
    row.stderr_abs_t = stderr_of(phone_t, row.mean_abs_t);
    rows.push_back(row);
  }
  require(!rows.empty(), err::kValidation,
          "no requested layer appears in the PSI report");
  return rows;
}

}  // namespace protolex::probe
