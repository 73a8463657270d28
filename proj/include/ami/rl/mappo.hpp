#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ami/env/posg.hpp"
#include "ami/nn/adam.hpp"
#include "ami/rl/ppo.hpp"
#include "ami/rl/victim.hpp"
#include "ami/stats.hpp"

namespace ami::rl {

struct TrainConfig {
  std::size_t iterations = 50;
  std::size_t episodes_per_iter = 8;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  PpoConfig ppo;
  nn::AdamConfig actor_adam{1e-3, 0.9, 0.999, 1e-8};
  nn::AdamConfig critic_adam{1e-3, 0.9, 0.999, 1e-8};
  double divergence_limit = 1e8;  // abort when |mean episode reward| passes

  void validate() const;
};

struct IterationLog {
  std::size_t iteration = 0;
  std::size_t env_steps = 0;  // cumulative environment steps so far
  double reward_mean = 0.0;
  double reward_ci95 = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  std::vector<IterationLog> curve;
  std::size_t env_steps = 0;
  bool aborted = false;
  std::string abort_reason;
};

/// Cooperative MAPPO over every agent of the environment, the adversary
/// slot included: centralized critic on the global state, decentralized
/// actors on observations, shared team reward. Fully deterministic for a
/// given (environment, config, seed) triple.
TrainResult train_victims(env::Environment& env, VictimPolicySet& victims,
                          const TrainConfig& cfg, std::uint64_t seed);

/// Mean episode team reward over fresh episodes; deterministic actions by
/// default (the deployment convention), sampled when `deterministic` is off.
stats::SummaryStats evaluate_team(env::Environment& env,
                                  const VictimPolicySet& victims,
                                  std::size_t episodes, std::uint64_t seed,
                                  bool deterministic = true);

/// Header: iteration,env_steps,reward_mean,reward_ci95,policy_loss,
/// value_loss,entropy.
void write_curve_csv(const std::vector<IterationLog>& curve,
                     std::ostream& out);

}  // namespace ami::rl
