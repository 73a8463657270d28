#pragma once

#include <cstdint>
#include <random>

#include "ami/common.hpp"

namespace ami::nn {

/// Probability head output: categorical probabilities (discrete control) or
/// a diagonal Gaussian (continuous control). The common currency of victim
/// policies, the opponent model and the target oracle.
struct ActionDistribution {
  enum class Kind { kDiscrete, kContinuous };
  Kind kind = Kind::kDiscrete;
  Vec probs;    // discrete: length |A|, sums to 1
  Vec mean;     // continuous
  Vec log_std;  // continuous, same length as mean

  std::size_t arity() const {
    return kind == Kind::kDiscrete ? probs.size() : mean.size();
  }
  static ActionDistribution discrete(Vec p);
  static ActionDistribution gaussian(Vec mu, Vec log_sigma);
};

/// Numerically-stable softmax.
Vec softmax(const Vec& logits);

/// ln probs[a]; a zero-probability action returns -inf and bumps the
/// zero-probability flag counter.
double head_log_prob(const ActionDistribution& dist, std::size_t action);

/// Diagonal-Gaussian log density at `action`.
double head_log_prob(const ActionDistribution& dist, const Vec& action);

/// Exact analytic entropy in nats.
double head_entropy(const ActionDistribution& dist);

std::size_t sample_discrete(const ActionDistribution& dist,
                            std::mt19937_64& rng);
Vec sample_gaussian(const ActionDistribution& dist, std::mt19937_64& rng);

/// Uniform in [0,1) from the top 53 bits of the engine.
double uniform01(std::mt19937_64& rng);
/// Standard normal draw (Box-Muller, no cached state).
double normal01(std::mt19937_64& rng);

/// Count of -inf log-prob sentinels issued since the last reset; lets runs
/// flag metric misuse without aborting.
std::uint64_t zero_prob_flag_count();
void reset_zero_prob_flags();

}  // namespace ami::nn
