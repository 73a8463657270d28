#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ami/harness/manifest.hpp"
#include "ami/stats.hpp"

namespace ami::harness {

/// Per-method reward summary over its seeds. `metric_key` names the
/// summary.json field the values came from (adversary reward for attack
/// runs, team reward for victim-training runs).
struct MethodSummary {
  std::string label;
  std::vector<std::uint64_t> seeds;  // ascending
  Vec values;                        // aligned with seeds
  stats::SummaryStats stats;
  std::string metric_key;
};

struct PairwiseEntry {
  std::string a;
  std::string b;
  double mean_diff = 0.0;  // mean(a) - mean(b)
  stats::PairedTestResult tests;
};

struct CurveRow {
  std::size_t iteration = 0;
  std::size_t env_steps = 0;
  double mean = 0.0;
  double ci95_half = 0.0;
};

struct MethodCurve {
  std::string label;
  std::string file;  // curve_<label>.csv
  std::vector<CurveRow> rows;
};

/// Comparison over one or more run groups. Pairing requires every label to
/// carry exactly the same seed set; single-seed groups skip the paired
/// tests and are flagged degenerate in the rendered report.
struct ComparisonReport {
  std::vector<MethodSummary> methods;
  std::vector<PairwiseEntry> pairs;
  std::vector<MethodCurve> curves;
  std::vector<std::string> sources;  // absolute paths of consumed files
};

/// Scans the given directories (recursively; sweep and report manifests are
/// containers, not runs), groups leaf runs by manifest label and builds the
/// cross-method statistics. Throws ConfigError on mismatched seed sets,
/// duplicate (label, seed) pairs or incomparable summaries.
ComparisonReport build_comparison(
    const std::vector<std::filesystem::path>& run_dirs);

/// Writes report.md, comparisons.csv and one curve_<label>.csv per method
/// into `out_dir`; returns the relative paths written. Output is fully
/// deterministic.
std::vector<std::string> write_report_files(
    const ComparisonReport& report, const std::filesystem::path& out_dir);

}  // namespace ami::harness
