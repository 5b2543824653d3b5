// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent oracles used by unit and acceptance tests. Everything here is
// written from first principles and must stay decoupled from the library
// implementations it checks.

#ifndef PROTOLEX_TESTS_COMMON_TEST_ORACLES_HPP_
#define PROTOLEX_TESTS_COMMON_TEST_ORACLES_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

namespace protolex::testing {

// Brute-force mutual information in bits: explicit double sum with
// separately accumulated marginals.
inline double BruteForceMiBits(const Eigen::MatrixXd& joint) {
  const Eigen::Index rows = joint.rows(), cols = joint.cols();
  std::vector<double> pw(static_cast<size_t>(rows), 0.0);
  std::vector<double> pc(static_cast<size_t>(cols), 0.0);
  for (Eigen::Index w = 0; w < rows; ++w)
    for (Eigen::Index c = 0; c < cols; ++c) {
      pw[static_cast<size_t>(w)] += joint(w, c);
      pc[static_cast<size_t>(c)] += joint(w, c);
    }
  double mi = 0.0;
  for (Eigen::Index w = 0; w < rows; ++w)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double p = joint(w, c);
      if (p > 0.0)
        mi += p * std::log2(p / (pw[static_cast<size_t>(w)] *
                                 pc[static_cast<size_t>(c)]));
    }
  return mi;
}

// Student-t tail probability by adaptive Simpson quadrature of the density.
// Deliberately avoids incomplete-beta identities so it shares nothing with
// library CDF implementations.
namespace detail {

inline double StudentTPdf(double x, double nu) {
  const double log_c = std::lgamma((nu + 1.0) / 2.0) -
                       std::lgamma(nu / 2.0) -
                       0.5 * std::log(nu * M_PI);
  return std::exp(log_c - (nu + 1.0) / 2.0 * std::log1p(x * x / nu));
}

inline double Simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double AdaptiveSimpson(double a, double b, double fa, double fm,
                              double fb, double whole, double eps, double nu,
                              int depth) {
  const double m = (a + b) / 2.0;
  const double lm = (a + m) / 2.0, rm = (m + b) / 2.0;
  const double flm = StudentTPdf(lm, nu), frm = StudentTPdf(rm, nu);
  const double left = Simpson(a, m, fa, flm, fm);
  const double right = Simpson(m, b, fm, frm, fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return AdaptiveSimpson(a, m, fa, flm, fm, left, eps / 2.0, nu, depth - 1) +
         AdaptiveSimpson(m, b, fm, frm, fb, right, eps / 2.0, nu, depth - 1);
}

}  // namespace detail

// P(T > t) for T ~ Student-t(nu), t >= 0.
inline double StudentTUpperTail(double t, double nu) {
  if (t < 0.0) return 1.0 - StudentTUpperTail(-t, nu);
  // Integrate the density from t out to where it is negligible.
  double hi = t + 400.0;
  const double fa = detail::StudentTPdf(t, nu);
  const double fb = detail::StudentTPdf(hi, nu);
  const double fm = detail::StudentTPdf((t + hi) / 2.0, nu);
  const double whole = detail::Simpson(t, hi, fa, fm, fb);
  const double body =
      detail::AdaptiveSimpson(t, hi, fa, fm, fb, whole, 1e-14, nu, 48);
  // Remaining tail beyond hi, bounded by a power-law majorant; negligible
  // for the magnitudes used in tests but added for completeness.
  const double tail = detail::StudentTPdf(hi, nu) * hi / nu;
  return body + tail;
}

// Two-sided unpaired pooled-variance t-test, written out longhand.
struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  bool significant = false;
};

inline TTestResult BruteForceTTest(const std::vector<double>& a,
                                   const std::vector<double>& b,
                                   double alpha) {
  TTestResult r;
  const size_t n1 = a.size(), n2 = b.size();
  double m1 = 0.0, m2 = 0.0;
  for (double v : a) m1 += v;
  for (double v : b) m2 += v;
  m1 /= static_cast<double>(n1);
  m2 /= static_cast<double>(n2);
  double ss1 = 0.0, ss2 = 0.0;
  for (double v : a) ss1 += (v - m1) * (v - m1);
  for (double v : b) ss2 += (v - m2) * (v - m2);
  const double df = static_cast<double>(n1 + n2 - 2);
  const double sp2 = (ss1 + ss2) / df;
  if (sp2 <= 0.0) {
    // Zero pooled variance: distinct means separate perfectly.
    r.t = m1 == m2 ? 0.0 : (m1 > m2 ? 1.0 : -1.0) *
                               std::numeric_limits<double>::infinity();
    r.p = m1 == m2 ? 1.0 : 0.0;
    r.significant = m1 != m2;
    return r;
  }
  r.t = (m1 - m2) /
        std::sqrt(sp2 * (1.0 / static_cast<double>(n1) +
                         1.0 / static_cast<double>(n2)));
  r.p = 2.0 * StudentTUpperTail(std::abs(r.t), df);
  r.significant = r.p < alpha;
  return r;
}

}  // namespace protolex::testing

#endif  // PROTOLEX_TESTS_COMMON_TEST_ORACLES_HPP_
