#include "ami/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace ami::stats {

SummaryStats summarize(const Vec& xs) {
  SummaryStats out;
  out.n = xs.size();
  if (xs.empty()) {
    out.degenerate = true;
    return out;
  }
  out.mean = mean_of(xs);
  out.stddev = stddev_of(xs);
  if (xs.size() < 2 || out.stddev == 0.0) {
    out.degenerate = true;
    return out;
  }
  boost::math::students_t_distribution<double> dist(
      static_cast<double>(xs.size() - 1));
  out.ci95_half = boost::math::quantile(dist, 0.975) * out.stddev /
                  std::sqrt(static_cast<double>(xs.size()));
  return out;
}

namespace {

/// Average ranks of |d| over the non-zero differences, doubled so that
/// average ranks stay integral.
std::vector<long> doubled_ranks(const Vec& absd) {
  const std::size_t n = absd.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return absd[i] < absd[j]; });
  std::vector<long> r2(n, 0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && absd[order[j]] == absd[order[i]]) ++j;
    // tied block occupies ranks i+1 .. j; average doubled = (i+1) + j
    const long avg2 = static_cast<long>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) r2[order[k]] = avg2;
    i = j;
  }
  return r2;
}

/// Exact two-sided p for T+ against the tie-free null (subset sums of ranks
/// 1..n, all 2^n sign patterns equally likely). Average-rank statistics can
/// be non-integral; bracketing them with ceil for the lower tail and floor
/// for the upper keeps the result conservative and symmetric.
double exact_wilcoxon_p(std::size_t n, double t_plus) {
  const long total = static_cast<long>(n * (n + 1) / 2);
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  long reach = 0;
  for (long r = 1; r <= static_cast<long>(n); ++r) {
    reach += r;
    for (long s = reach; s >= r; --s) {
      count[static_cast<std::size_t>(s)] +=
          count[static_cast<std::size_t>(s - r)];
    }
  }
  const long below_cut = static_cast<long>(std::ceil(t_plus));
  const long above_cut = static_cast<long>(std::floor(t_plus));
  double below = 0.0, above = 0.0;
  for (long s = 0; s <= total; ++s) {
    const double c = count[static_cast<std::size_t>(s)];
    if (s <= below_cut) below += c;
    if (s >= above_cut) above += c;
  }
  const double all = std::pow(2.0, static_cast<double>(n));
  return std::min(1.0, 2.0 * std::min(below, above) / all);
}

}  // namespace

PairedTestResult paired_tests(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ConfigError("paired samples differ in size");
  if (a.size() < 2) throw ConfigError("paired tests need n >= 2");
  PairedTestResult out;
  out.n = a.size();
  out.df = a.size() - 1;

  Vec d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];

  const double md = mean_of(d);
  const double sd = stddev_of(d);
  if (sd == 0.0) {
    out.t_degenerate = true;  // includes the all-zero and constant-shift cases
  } else {
    out.t_stat = md / (sd / std::sqrt(static_cast<double>(d.size())));
    boost::math::students_t_distribution<double> dist(
        static_cast<double>(out.df));
    out.p_t = 2.0 * boost::math::cdf(dist, -std::fabs(out.t_stat));
  }

  Vec nz;
  for (double x : d) {
    if (x != 0.0) nz.push_back(x);
  }
  if (nz.empty()) {
    out.wilcoxon_degenerate = true;
    return out;
  }
  Vec absd(nz.size());
  for (std::size_t i = 0; i < nz.size(); ++i) absd[i] = std::fabs(nz[i]);
  const std::vector<long> r2 = doubled_ranks(absd);
  long t_plus2 = 0, t_minus2 = 0;
  for (std::size_t i = 0; i < nz.size(); ++i) {
    (nz[i] > 0.0 ? t_plus2 : t_minus2) += r2[i];
  }
  const double t_plus = static_cast<double>(t_plus2) / 2.0;
  out.wilcoxon_w = static_cast<double>(std::min(t_plus2, t_minus2)) / 2.0;

  const std::size_t nr = nz.size();
  if (nr <= 25) {
    out.p_wilcoxon = exact_wilcoxon_p(nr, t_plus);
  } else {
    const double n = static_cast<double>(nr);
    const double mn = n * (n + 1.0) / 4.0;
    double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    // tie correction: subtract sum(t^3 - t)/48 over tied groups
    Vec sorted = absd;
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < sorted.size()) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      var -= (t * t * t - t) / 48.0;
      i = j;
    }
    const double z = (t_plus - mn) / std::sqrt(var);
    boost::math::normal_distribution<double> gauss;
    out.p_wilcoxon =
        std::min(1.0, 2.0 * boost::math::cdf(gauss, -std::fabs(z)));
  }
  return out;
}

double roc_auc(const Vec& positives, const Vec& negatives) {
  if (positives.empty() || negatives.empty()) {
    throw ConfigError("roc_auc needs both classes non-empty");
  }
  double wins = 0.0;
  for (double p : positives) {
    for (double n : negatives) {
      if (p > n) {
        wins += 1.0;
      } else if (p == n) {
        wins += 0.5;
      }
    }
  }
  return wins /
         (static_cast<double>(positives.size()) * negatives.size());
}

}  // namespace ami::stats
