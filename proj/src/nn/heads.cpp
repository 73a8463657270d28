#include "ami/nn/heads.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ami::nn {

namespace {
std::uint64_t g_zero_prob_flags = 0;
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5*ln(2*pi)
}  // namespace

ActionDistribution ActionDistribution::discrete(Vec p) {
  ActionDistribution d;
  d.kind = Kind::kDiscrete;
  d.probs = std::move(p);
  return d;
}

ActionDistribution ActionDistribution::gaussian(Vec mu, Vec log_sigma) {
  if (mu.size() != log_sigma.size())
    throw ConfigError("gaussian head: mean/log_std length mismatch");
  ActionDistribution d;
  d.kind = Kind::kContinuous;
  d.mean = std::move(mu);
  d.log_std = std::move(log_sigma);
  return d;
}

Vec softmax(const Vec& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

double head_log_prob(const ActionDistribution& dist, std::size_t action) {
  if (dist.kind != ActionDistribution::Kind::kDiscrete)
    throw ConfigError("discrete log_prob on a continuous head");
  if (action >= dist.probs.size())
    throw ProtocolError("action index out of range");
  const double p = dist.probs[action];
  if (p <= 0.0) {
    ++g_zero_prob_flags;
    return -std::numeric_limits<double>::infinity();
  }
  return std::log(p);
}

double head_log_prob(const ActionDistribution& dist, const Vec& action) {
  if (dist.kind != ActionDistribution::Kind::kContinuous)
    throw ConfigError("continuous log_prob on a discrete head");
  if (action.size() != dist.mean.size())
    throw ConfigError("continuous log_prob: action dim mismatch");
  double lp = 0.0;
  for (std::size_t d = 0; d < action.size(); ++d) {
    const double ls = dist.log_std[d];
    const double z = (action[d] - dist.mean[d]) * std::exp(-ls);
    lp += -0.5 * z * z - ls - kHalfLog2Pi;
  }
  return lp;
}

double head_entropy(const ActionDistribution& dist) {
  if (dist.kind == ActionDistribution::Kind::kDiscrete) {
    double h = 0.0;
    for (double p : dist.probs) {
      if (p > 0.0) h -= p * std::log(p);  // 0*ln0 := 0
    }
    return h;
  }
  double h = 0.0;
  for (double ls : dist.log_std) h += ls + 0.5 + kHalfLog2Pi;
  return h;
}

double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

double normal01(std::mt19937_64& rng) {
  double u1;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t sample_discrete(const ActionDistribution& dist,
                            std::mt19937_64& rng) {
  if (dist.kind != ActionDistribution::Kind::kDiscrete)
    throw ConfigError("sample_discrete on a continuous head");
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.probs.size(); ++i) {
    acc += dist.probs[i];
    if (u < acc) return i;
  }
  return dist.probs.size() - 1;  // guard against rounding at u ~ 1
}

Vec sample_gaussian(const ActionDistribution& dist, std::mt19937_64& rng) {
  if (dist.kind != ActionDistribution::Kind::kContinuous)
    throw ConfigError("sample_gaussian on a discrete head");
  Vec a(dist.mean.size());
  for (std::size_t d = 0; d < a.size(); ++d)
    a[d] = dist.mean[d] + std::exp(dist.log_std[d]) * normal01(rng);
  return a;
}

std::uint64_t zero_prob_flag_count() { return g_zero_prob_flags; }
void reset_zero_prob_flags() { g_zero_prob_flags = 0; }

}  // namespace ami::nn
