#pragma once

#include <cstddef>

#include "ami/common.hpp"

namespace ami::stats {

/// Mean, unbiased standard deviation and a Student-t 95% confidence half
/// width. Degenerate marks n < 2 or zero variance (CI width 0).
struct SummaryStats {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double ci95_half = 0.0;
  bool degenerate = false;
};

SummaryStats summarize(const Vec& xs);

/// Two-sided paired t-test plus Wilcoxon signed-rank test on a - b.
/// Wilcoxon drops zero differences, uses average ranks for ties, the exact
/// null distribution for up to 25 non-zero pairs and a normal approximation
/// with tie correction beyond. W is min(T+, T-).
struct PairedTestResult {
  std::size_t n = 0;
  double t_stat = 0.0;
  std::size_t df = 0;
  double p_t = 1.0;
  double wilcoxon_w = 0.0;
  double p_wilcoxon = 1.0;
  bool t_degenerate = false;        // zero-variance differences
  bool wilcoxon_degenerate = false; // no non-zero differences
};

PairedTestResult paired_tests(const Vec& a, const Vec& b);

/// Area under the ROC curve via the rank statistic: P(pos > neg) with ties
/// counted half. Throws ConfigError on an empty class.
double roc_auc(const Vec& positives, const Vec& negatives);

}  // namespace ami::stats
