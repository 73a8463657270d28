#include "ami/harness/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ami/common.hpp"

namespace ami::harness {
namespace {

namespace fs = std::filesystem;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string sanitize_label(const std::string& label) {
  std::string out = label;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) c = '-';
  }
  return out.empty() ? std::string("run") : out;
}

struct LeafRun {
  fs::path dir;
  std::string label;
  std::uint64_t seed = 0;
  double value = 0.0;
  std::string metric_key;
};

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read " + path.string());
  }
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

struct ParsedCurve {
  std::vector<std::size_t> iterations;
  std::vector<std::size_t> env_steps;
  Vec values;
};

/// Reads the first three columns (iteration, env_steps, value) of a metrics
/// or training-curve CSV. The remaining columns differ between producers
/// and are ignored here.
ParsedCurve parse_curve_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read " + path.string());
  }
  ParsedCurve curve;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() < 3) {
      throw ConfigError("cannot parse curve file " + path.string() +
                        ": expected at least 3 columns");
    }
    try {
      curve.iterations.push_back(std::stoull(cells[0]));
      curve.env_steps.push_back(std::stoull(cells[1]));
      curve.values.push_back(std::stod(cells[2]));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse curve file " + path.string() +
                        ": bad row \"" + line + "\"");
    }
  }
  return curve;
}

}  // namespace

ComparisonReport build_comparison(const std::vector<fs::path>& run_dirs) {
  std::set<std::string> seen;
  std::vector<LeafRun> leaves;
  std::set<std::string> sources;
  for (const fs::path& dir : run_dirs) {
    if (!fs::exists(dir)) {
      throw ConfigError("report run directory not found: " + dir.string());
    }
    std::vector<fs::path> manifests;
    if (fs::is_directory(dir)) {
      for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() &&
            entry.path().filename() == "manifest.json") {
          manifests.push_back(entry.path());
        }
      }
    } else {
      manifests.push_back(dir);
    }
    std::sort(manifests.begin(), manifests.end());
    for (const fs::path& mpath : manifests) {
      const fs::path canon = fs::weakly_canonical(mpath);
      if (!seen.insert(canon.string()).second) continue;
      const RunManifest m = load_manifest_file(canon);
      if (m.subcommand == "ablate" || m.subcommand == "report") {
        continue;  // containers; their children carry the data
      }
      const fs::path run_dir = canon.parent_path();
      const fs::path summary_path = run_dir / "summary.json";
      if (!fs::exists(summary_path)) {
        throw ConfigError("run " + run_dir.string() + " has no summary.json");
      }
      const Json summary = read_json_file(summary_path);
      LeafRun leaf;
      leaf.dir = run_dir;
      leaf.label = m.label;
      leaf.seed = m.seed;
      if (summary.contains("adv_reward_mean")) {
        leaf.metric_key = "adv_reward_mean";
      } else if (summary.contains("team_reward_mean")) {
        leaf.metric_key = "team_reward_mean";
      } else {
        throw ConfigError("summary.json in " + run_dir.string() +
                          " reports neither adv_reward_mean nor "
                          "team_reward_mean");
      }
      leaf.value = summary[leaf.metric_key].get<double>();
      leaves.push_back(leaf);
      sources.insert(canon.string());
      sources.insert(fs::weakly_canonical(summary_path).string());
    }
  }
  if (leaves.empty()) {
    throw ConfigError("no completed runs found under the given directories");
  }

  std::map<std::string, std::vector<const LeafRun*>> groups;
  for (const LeafRun& leaf : leaves) groups[leaf.label].push_back(&leaf);

  ComparisonReport report;
  const std::string metric_key = leaves.front().metric_key;
  for (auto& [label, runs] : groups) {
    std::sort(runs.begin(), runs.end(),
              [](const LeafRun* a, const LeafRun* b) {
                return a->seed < b->seed;
              });
    MethodSummary method;
    method.label = label;
    method.metric_key = metric_key;
    for (const LeafRun* run : runs) {
      if (run->metric_key != metric_key) {
        throw ConfigError(
            "cannot compare runs reporting different metrics: " + metric_key +
            " vs " + run->metric_key + " (label \"" + label + "\")");
      }
      if (!method.seeds.empty() && method.seeds.back() == run->seed) {
        throw ConfigError("duplicate run for label \"" + label + "\" seed " +
                          std::to_string(run->seed));
      }
      method.seeds.push_back(run->seed);
      method.values.push_back(run->value);
    }
    method.stats = stats::summarize(method.values);
    report.methods.push_back(std::move(method));
  }

  for (std::size_t i = 1; i < report.methods.size(); ++i) {
    if (report.methods[i].seeds != report.methods[0].seeds) {
      throw ConfigError("paired comparison requires identical seed sets; "
                        "label \"" +
                        report.methods[0].label + "\" and label \"" +
                        report.methods[i].label +
                        "\" cover different seeds");
    }
  }

  if (report.methods.front().seeds.size() >= 2) {
    for (std::size_t i = 0; i < report.methods.size(); ++i) {
      for (std::size_t j = i + 1; j < report.methods.size(); ++j) {
        PairwiseEntry pair;
        pair.a = report.methods[i].label;
        pair.b = report.methods[j].label;
        pair.mean_diff =
            report.methods[i].stats.mean - report.methods[j].stats.mean;
        pair.tests =
            stats::paired_tests(report.methods[i].values,
                                report.methods[j].values);
        report.pairs.push_back(std::move(pair));
      }
    }
  }

  for (const MethodSummary& method : report.methods) {
    const auto& runs = groups.at(method.label);
    std::vector<ParsedCurve> curves;
    std::size_t missing = 0;
    for (const LeafRun* run : runs) {
      fs::path file = run->dir / "metrics.csv";
      if (!fs::exists(file)) file = run->dir / "curve.csv";
      if (!fs::exists(file)) {
        ++missing;
        continue;
      }
      curves.push_back(parse_curve_file(file));
      sources.insert(fs::weakly_canonical(file).string());
    }
    if (curves.empty()) continue;  // summaries only, nothing to plot
    if (missing > 0) {
      throw ConfigError("label \"" + method.label +
                        "\" has curve files for only some of its seeds");
    }
    for (const ParsedCurve& c : curves) {
      if (c.iterations != curves.front().iterations ||
          c.env_steps != curves.front().env_steps) {
        throw ConfigError("curve files for label \"" + method.label +
                          "\" do not align across seeds");
      }
    }
    MethodCurve out;
    out.label = method.label;
    out.file = "curve_" + sanitize_label(method.label) + ".csv";
    for (std::size_t r = 0; r < curves.front().iterations.size(); ++r) {
      Vec column;
      for (const ParsedCurve& c : curves) column.push_back(c.values[r]);
      const stats::SummaryStats s = stats::summarize(column);
      CurveRow row;
      row.iteration = curves.front().iterations[r];
      row.env_steps = curves.front().env_steps[r];
      row.mean = s.mean;
      row.ci95_half = s.ci95_half;
      out.rows.push_back(row);
    }
    report.curves.push_back(std::move(out));
  }

  report.sources.assign(sources.begin(), sources.end());
  return report;
}

std::vector<std::string> write_report_files(const ComparisonReport& report,
                                            const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> written;

  {
    std::ofstream md(out_dir / "report.md");
    if (!md) {
      throw ConfigError("cannot write " + (out_dir / "report.md").string());
    }
    md << "# Comparison report\n\n";
    if (!report.methods.empty()) {
      md << "Metric: `" << report.methods.front().metric_key << "`\n\n";
    }
    md << "## Methods\n\n";
    md << "| method | n | mean | std | ci95 | note |\n";
    md << "|---|---|---|---|---|---|\n";
    for (const MethodSummary& m : report.methods) {
      std::string note;
      if (m.stats.n < 2) {
        note = "single seed; CI width 0 (degenerate)";
      } else if (m.stats.degenerate) {
        note = "zero variance";
      }
      md << "| " << m.label << " | " << m.stats.n << " | "
         << fmt("%.6g", m.stats.mean) << " | " << fmt("%.6g", m.stats.stddev)
         << " | " << fmt("%.6g", m.stats.ci95_half) << " | " << note
         << " |\n";
    }
    md << "\n## Paired comparisons\n\n";
    if (report.pairs.empty()) {
      if (report.methods.size() < 2) {
        md << "Only one method; nothing to pair.\n";
      } else {
        md << "Paired tests skipped: a single seed per method gives no "
              "pairing power.\n";
      }
    } else {
      md << "| a | b | mean(a)-mean(b) | t | df | p (t) | W | p (Wilcoxon) "
            "| note |\n";
      md << "|---|---|---|---|---|---|---|---|---|\n";
      for (const PairwiseEntry& p : report.pairs) {
        std::string note;
        if (p.tests.t_degenerate) note = "t degenerate";
        if (p.tests.wilcoxon_degenerate) {
          if (!note.empty()) note += "; ";
          note += "wilcoxon degenerate";
        }
        md << "| " << p.a << " | " << p.b << " | "
           << fmt("%.6g", p.mean_diff) << " | " << fmt("%.6g", p.tests.t_stat)
           << " | " << p.tests.df << " | " << fmt("%.6g", p.tests.p_t)
           << " | " << fmt("%.6g", p.tests.wilcoxon_w) << " | "
           << fmt("%.6g", p.tests.p_wilcoxon) << " | " << note << " |\n";
      }
    }
    if (!report.curves.empty()) {
      md << "\n## Curves\n\n";
      for (const MethodCurve& c : report.curves) {
        md << "- " << c.label << ": " << c.file << " (" << c.rows.size()
           << " points)\n";
      }
    }
    written.push_back("report.md");
  }

  {
    std::ofstream csv(out_dir / "comparisons.csv");
    if (!csv) {
      throw ConfigError("cannot write " +
                        (out_dir / "comparisons.csv").string());
    }
    csv << "a,b,n,mean_diff,t_stat,df,p_t,wilcoxon_w,p_wilcoxon,"
           "t_degenerate,wilcoxon_degenerate\n";
    for (const PairwiseEntry& p : report.pairs) {
      csv << p.a << ',' << p.b << ',' << p.tests.n << ','
          << fmt("%.12g", p.mean_diff) << ',' << fmt("%.12g", p.tests.t_stat)
          << ',' << p.tests.df << ',' << fmt("%.12g", p.tests.p_t) << ','
          << fmt("%.12g", p.tests.wilcoxon_w) << ','
          << fmt("%.12g", p.tests.p_wilcoxon) << ','
          << (p.tests.t_degenerate ? 1 : 0) << ','
          << (p.tests.wilcoxon_degenerate ? 1 : 0) << '\n';
    }
    written.push_back("comparisons.csv");
  }

  for (const MethodCurve& c : report.curves) {
    std::ofstream csv(out_dir / c.file);
    if (!csv) {
      throw ConfigError("cannot write " + (out_dir / c.file).string());
    }
    csv << "iteration,env_steps,reward_mean,reward_ci95\n";
    for (const CurveRow& row : c.rows) {
      csv << row.iteration << ',' << row.env_steps << ','
          << fmt("%.12g", row.mean) << ',' << fmt("%.12g", row.ci95_half)
          << '\n';
    }
    written.push_back(c.file);
  }

  return written;
}

}  // namespace ami::harness
