#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "ami/common.hpp"

namespace ami::env {

/// Shape of a partially observable stochastic game with one adversary slot.
/// Agents 0..n_victims-1 are the victim team; the last agent index is the
/// adversary slot (controlled by the victim policy during cooperative
/// training, by the attacker during attacks).
struct PosgSpec {
  std::size_t n_victims = 0;
  std::size_t n_adversaries = 1;
  std::size_t state_dim = 0;
  std::size_t obs_dim = 0;
  bool discrete = false;
  std::size_t num_actions = 0;  // discrete spaces
  std::size_t action_dim = 0;   // continuous spaces
  double action_low = 0.0;
  double action_high = 0.0;
  std::size_t max_episode_len = 0;
  double discount = 0.99;

  std::size_t n_agents() const { return n_victims + n_adversaries; }
  std::size_t adversary_index() const { return n_victims; }
  /// Throws ConfigError unless one adversary, T >= 1, discount in (0,1],
  /// and the action space is fully specified.
  void validate() const;
};

/// One action per agent, in the space the environment declares.
struct JointAction {
  std::vector<std::size_t> discrete;
  std::vector<Vec> continuous;
};

/// Transition tuple: pre-step state and observations, the joint action, the
/// two reward channels, and the post-step done flag.
struct StepRecord {
  Vec state;
  std::vector<Vec> obs;
  std::vector<std::size_t> actions_discrete;
  std::vector<Vec> actions_continuous;
  double adversary_reward = 0.0;
  double team_reward = 0.0;
  bool done = false;
  bool action_clipped = false;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual const PosgSpec& spec() const = 0;
  /// Deterministic initial state from the seed.
  virtual void reset(std::uint64_t seed) = 0;
  /// Advances one step; throws ProtocolError on malformed actions.
  virtual StepRecord step(const JointAction& actions) = 0;
  virtual Vec state() const = 0;
  virtual Vec observe(std::size_t agent) const = 0;
  virtual bool done() const = 0;
  virtual std::size_t timestep() const = 0;
};

/// One row per (episode, step, agent): episode, t, agent, obs...,
/// action..., r_adv, r_team, done.
void write_trajectory_csv(const PosgSpec& spec,
                          const std::vector<std::vector<StepRecord>>& episodes,
                          std::ostream& out);

}  // namespace ami::env
