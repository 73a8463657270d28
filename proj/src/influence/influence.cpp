#include "ami/influence/influence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace ami::influence {

double entropy(const Vec& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

EntropyKl entropy_kl_identity(const nn::ActionDistribution& dist) {
  if (dist.kind != nn::ActionDistribution::Kind::kDiscrete) {
    throw ConfigError("entropy_kl_identity expects a discrete distribution");
  }
  const std::size_t k = dist.probs.size();
  if (k == 0) throw ConfigError("entropy_kl_identity: empty distribution");
  EntropyKl out;
  // both sums written independently on purpose; the ln|A| identity between
  // them is a cross-check, not a shortcut
  for (double p : dist.probs) {
    if (p > 0.0) out.entropy -= p * std::log(p);
  }
  const double u = 1.0 / static_cast<double>(k);
  for (double p : dist.probs) {
    if (p > 0.0) out.kl_to_uniform += p * std::log(p / u);
  }
  return out;
}

void JointTable::validate() const {
  if (rows == 0 || cols == 0 || p.size() != rows * cols) {
    throw ConfigError("joint table: bad shape");
  }
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw ConfigError("joint table: negative entry");
    sum += x;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw ConfigError("joint table: not normalized (sum " +
                      std::to_string(sum) + ")");
  }
}

Vec JointTable::adversary_marginal() const {
  Vec m(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m[i] += at(i, j);
  }
  return m;
}

Vec JointTable::victim_marginal() const {
  Vec m(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m[j] += at(i, j);
  }
  return m;
}

InfluenceDecomposition decompose_mi(const JointTable& joint) {
  joint.validate();
  InfluenceDecomposition out;
  out.minority_term = entropy(joint.victim_marginal());

  const Vec adv = joint.adversary_marginal();
  double cond = 0.0;  // H(victim | adversary)
  for (std::size_t i = 0; i < joint.rows; ++i) {
    if (adv[i] <= 0.0) continue;
    Vec row(joint.cols);
    for (std::size_t j = 0; j < joint.cols; ++j) row[j] = joint.at(i, j) / adv[i];
    cond += adv[i] * entropy(row);
  }
  out.majority_term = -cond;
  out.mutual_information = out.minority_term + out.majority_term;
  return out;
}

DistanceMetric parse_metric(std::string_view name) {
  if (name == "l1") return DistanceMetric::kL1;
  if (name == "l2") return DistanceMetric::kL2;
  if (name == "linf") return DistanceMetric::kLinf;
  if (name == "ce") return DistanceMetric::kCe;
  if (name == "prob") return DistanceMetric::kProb;
  if (name == "l1_mean") return DistanceMetric::kL1Mean;
  throw ConfigError("unknown distance metric: " + std::string(name));
}

std::string metric_name(DistanceMetric metric) {
  switch (metric) {
    case DistanceMetric::kL1: return "l1";
    case DistanceMetric::kL2: return "l2";
    case DistanceMetric::kLinf: return "linf";
    case DistanceMetric::kCe: return "ce";
    case DistanceMetric::kProb: return "prob";
    case DistanceMetric::kL1Mean: return "l1_mean";
  }
  throw ConfigError("unknown distance metric enum");
}

bool metric_supports(DistanceMetric metric, nn::ActionDistribution::Kind kind) {
  using Kind = nn::ActionDistribution::Kind;
  switch (metric) {
    case DistanceMetric::kL1:
    case DistanceMetric::kL2:
    case DistanceMetric::kLinf:
      return kind == Kind::kDiscrete;
    case DistanceMetric::kCe:
    case DistanceMetric::kProb:
      return true;
    case DistanceMetric::kL1Mean:
      return kind == Kind::kContinuous;
  }
  return false;
}

double distance(const nn::ActionDistribution& expected, std::size_t target,
                DistanceMetric metric) {
  if (expected.kind != nn::ActionDistribution::Kind::kDiscrete) {
    throw ConfigError("discrete distance applied to a continuous distribution");
  }
  if (!metric_supports(metric, expected.kind)) {
    throw ConfigError("metric " + metric_name(metric) +
                      " does not apply to discrete actions");
  }
  const Vec& p = expected.probs;
  if (target >= p.size()) throw ProtocolError("distance: target out of range");
  switch (metric) {
    case DistanceMetric::kL1: {
      double s = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        s += std::fabs(p[k] - (k == target ? 1.0 : 0.0));
      }
      return -s;
    }
    case DistanceMetric::kL2: {
      double s = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double d = p[k] - (k == target ? 1.0 : 0.0);
        s += d * d;
      }
      return -std::sqrt(s);
    }
    case DistanceMetric::kLinf: {
      double s = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        s = std::max(s, std::fabs(p[k] - (k == target ? 1.0 : 0.0)));
      }
      return -s;
    }
    case DistanceMetric::kCe:
      return nn::head_log_prob(expected, target);
    case DistanceMetric::kProb:
      return p[target];
    default:
      throw ConfigError("unreachable metric branch");
  }
}

double distance(const nn::ActionDistribution& expected, const Vec& target,
                DistanceMetric metric) {
  if (expected.kind != nn::ActionDistribution::Kind::kContinuous) {
    throw ConfigError("continuous distance applied to a discrete distribution");
  }
  if (!metric_supports(metric, expected.kind)) {
    throw ConfigError("metric " + metric_name(metric) +
                      " does not apply to continuous actions");
  }
  if (target.size() != expected.mean.size()) {
    throw ProtocolError("distance: target dimension mismatch");
  }
  switch (metric) {
    case DistanceMetric::kL1Mean: {
      double s = 0.0;
      for (std::size_t k = 0; k < target.size(); ++k) {
        s += std::fabs(expected.mean[k] - target[k]);
      }
      return -s;
    }
    case DistanceMetric::kCe:
      return nn::head_log_prob(expected, target);
    case DistanceMetric::kProb:
      return std::exp(nn::head_log_prob(expected, target));
    default:
      throw ConfigError("unreachable metric branch");
  }
}

TargetAction TargetAction::discrete(std::size_t a) {
  TargetAction t;
  t.kind = nn::ActionDistribution::Kind::kDiscrete;
  t.index = a;
  return t;
}

TargetAction TargetAction::continuous(Vec a) {
  TargetAction t;
  t.kind = nn::ActionDistribution::Kind::kContinuous;
  t.value = std::move(a);
  return t;
}

double ami_influence_reward(InfluenceRecord& record, DistanceMetric metric) {
  if (record.expected.empty()) {
    throw IntegrityError("influence record has no victims");
  }
  if (record.expected.size() != record.targets.size()) {
    throw IntegrityError("influence record: victim entry missing");
  }
  record.distances.assign(record.expected.size(), 0.0);
  record.total = 0.0;
  for (std::size_t i = 0; i < record.expected.size(); ++i) {
    const auto& dist_i = record.expected[i];
    const auto& tgt = record.targets[i];
    if (tgt.kind != dist_i.kind) {
      throw IntegrityError("influence record: target/space mismatch");
    }
    const double d = tgt.kind == nn::ActionDistribution::Kind::kDiscrete
                         ? distance(dist_i, tgt.index, metric)
                         : distance(dist_i, tgt.value, metric);
    record.distances[i] = d;
    record.total += d;
  }
  return record.total;
}

JointTable toy_copy_joint(double p, const Vec& victim_marginal) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("copy probability outside [0,1]");
  const std::size_t k = victim_marginal.size();
  if (k < 2) throw ConfigError("toy model needs at least two actions");
  JointTable joint;
  joint.rows = k;
  joint.cols = k;
  joint.p.assign(k * k, 0.0);
  // victim draws from its fixed marginal; the adversary copies that action
  // with probability p, otherwise lands uniformly on one of the others
  const double off = (1.0 - p) / static_cast<double>(k - 1);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < k; ++i) {
      joint.at(i, j) = victim_marginal[j] * (i == j ? p : off);
    }
  }
  return joint;
}

std::vector<ToyCurvePoint> toy_example(std::size_t num_points,
                                       const Vec& victim_marginal) {
  if (num_points < 2) throw ConfigError("toy_example needs at least 2 points");
  std::vector<ToyCurvePoint> curve;
  curve.reserve(num_points);
  for (std::size_t n = 0; n < num_points; ++n) {
    const double p =
        static_cast<double>(n) / static_cast<double>(num_points - 1);
    const auto dec = decompose_mi(toy_copy_joint(p, victim_marginal));
    curve.push_back({p, dec.mutual_information, dec.majority_term,
                     dec.minority_term});
  }
  return curve;
}

void write_toy_curves_csv(const std::vector<ToyCurvePoint>& curve,
                          std::ostream& out) {
  out << "p,mi,majority,minority\n";
  for (const auto& pt : curve) {
    out << pt.p << ',' << pt.mi << ',' << pt.majority << ',' << pt.minority
        << '\n';
  }
}

}  // namespace ami::influence
