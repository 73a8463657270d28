#pragma once

#include <cstdint>
#include <vector>

#include "ami/common.hpp"

namespace ami::rl {

/// One agent's slice of a timestep: what its actor saw and did.
struct AgentSample {
  Vec input;               // actor input (observation plus any id features)
  std::size_t action_d = 0;
  Vec action_c;            // empty for discrete control
  double log_prob = 0.0;   // log pi_old at collection time
};

struct TimeStep {
  Vec critic_input;        // centralized critic input (usually the state)
  double value = 0.0;      // V(critic_input) under the behavior critic
  double reward = 0.0;
  bool done = false;
  std::vector<AgentSample> agents;
};

/// Episode-structured experience for one policy update. Advantages and
/// returns are filled per episode by compute_advantages and stay aligned
/// with `episodes`.
struct RolloutBuffer {
  std::vector<std::vector<TimeStep>> episodes;
  std::vector<Vec> advantages;
  std::vector<Vec> returns;

  std::size_t total_steps() const;
  void clear();

  /// Generalized advantage estimation over every episode. `bootstrap_values`
  /// supplies V(s_T) for truncated episodes, one entry per episode; empty
  /// means bootstrap 0 everywhere (terminal episodes).
  void compute_advantages(double gamma, double lambda,
                          const Vec& bootstrap_values = {});
};

/// Flat sample consumed by the PPO update: one (agent, timestep) pair.
/// MAPPO shares the centralized advantage across all agents of a timestep.
struct PpoSample {
  Vec input;
  std::size_t action_d = 0;
  Vec action_c;
  double old_log_prob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;        // discounted return target for the critic
  Vec critic_input;
};

/// Flattens a buffer into per-agent PPO samples. Requires advantages to be
/// computed first; throws ProtocolError otherwise.
std::vector<PpoSample> flatten_samples(const RolloutBuffer& buffer);

}  // namespace ami::rl
