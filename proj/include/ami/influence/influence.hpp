#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ami/common.hpp"
#include "ami/nn/heads.hpp"

namespace ami::influence {

/// Entropy in nats with 0 ln 0 := 0. Probabilities are trusted to sum to 1.
double entropy(const Vec& probs);

struct EntropyKl {
  double entropy = 0.0;
  double kl_to_uniform = 0.0;
};

/// Computes H(p) and D_KL(p || U) independently for a discrete distribution.
/// The two satisfy H = ln|A| - KL; callers can cross-check. Throws
/// ConfigError on a continuous distribution.
EntropyKl entropy_kl_identity(const nn::ActionDistribution& dist);

/// Joint action table P(adversary = i, victim = j), row-major. The victim
/// axis is the one whose next action the adversary wants to steer.
struct JointTable {
  std::size_t rows = 0;  // adversary arity
  std::size_t cols = 0;  // victim arity
  Vec p;

  double& at(std::size_t i, std::size_t j) { return p[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return p[i * cols + j]; }
  /// Throws ConfigError unless entries are non-negative and sum to 1
  /// within 1e-9.
  void validate() const;
  Vec adversary_marginal() const;
  Vec victim_marginal() const;
};

/// Mutual information split into the two influence channels, all in nats:
///   minority = H(victim marginal), insensitive to the adversary's own policy;
///   majority = -H(victim | adversary), the channel an adversary can inflate
///   by overfitting its policy to the victim.
struct InfluenceDecomposition {
  double mutual_information = 0.0;
  double minority_term = 0.0;
  double majority_term = 0.0;
};

/// Splits I(adversary; victim) into minority + majority terms. The sum equals
/// the direct joint-sum mutual information.
InfluenceDecomposition decompose_mi(const JointTable& joint);

// Distance family d(expected distribution, realized target action). Larger is
// closer; every metric is maximized when the expected distribution commits to
// the target.
enum class DistanceMetric {
  kL1,      // discrete: -||p - onehot(target)||_1
  kL2,      // discrete: -||p - onehot(target)||_2
  kLinf,    // discrete: -||p - onehot(target)||_inf
  kCe,      // log-likelihood of the target (both spaces)
  kProb,    // likelihood of the target (discrete mass / continuous density)
  kL1Mean,  // continuous: -||mean - target||_1
};

DistanceMetric parse_metric(std::string_view name);
std::string metric_name(DistanceMetric metric);
bool metric_supports(DistanceMetric metric, nn::ActionDistribution::Kind kind);

/// Discrete-space distance. Throws ConfigError when the metric does not
/// apply; ce with a zero-probability target yields the -inf sentinel and
/// bumps the zero-probability flag counter.
double distance(const nn::ActionDistribution& expected, std::size_t target,
                DistanceMetric metric);

/// Continuous-space distance (prob is the raw Gaussian density and may
/// exceed 1; downstream reward normalization absorbs the scale).
double distance(const nn::ActionDistribution& expected, const Vec& target,
                DistanceMetric metric);

/// A realized target action in either action space.
struct TargetAction {
  nn::ActionDistribution::Kind kind = nn::ActionDistribution::Kind::kDiscrete;
  std::size_t index = 0;
  Vec value;

  static TargetAction discrete(std::size_t a);
  static TargetAction continuous(Vec a);
};

/// Per-step influence bookkeeping: one expected victim distribution and one
/// target per victim, the per-victim distances, and their sum.
struct InfluenceRecord {
  std::vector<nn::ActionDistribution> expected;
  std::vector<TargetAction> targets;
  Vec distances;
  double total = 0.0;
};

/// Fills distances and total: I_t = sum_i d(expected_i, target_i). Throws
/// IntegrityError when a victim entry is missing or the record is empty.
double ami_influence_reward(InfluenceRecord& record, DistanceMetric metric);

// Analytic toy model: a fixed two-action victim and an adversary that copies
// the victim's action with probability p (anti-copies otherwise). Exposes how
// the majority channel can be gamed by p while the minority channel cannot.
JointTable toy_copy_joint(double p, const Vec& victim_marginal);

struct ToyCurvePoint {
  double p = 0.0;
  double mi = 0.0;
  double majority = 0.0;
  double minority = 0.0;
};

/// Sweeps p over [0,1] with `num_points` evenly spaced values.
std::vector<ToyCurvePoint> toy_example(std::size_t num_points = 11,
                                       const Vec& victim_marginal = {0.2,
                                                                     0.8});

/// CSV with header "p,mi,majority,minority".
void write_toy_curves_csv(const std::vector<ToyCurvePoint>& curve,
                          std::ostream& out);

}  // namespace ami::influence
