#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ami/common.hpp"
#include "ami/env/posg.hpp"
#include "ami/nn/heads.hpp"
#include "ami/nn/mlp.hpp"
#include "ami/nn/params.hpp"
#include "ami/rl/actor.hpp"

namespace ami::rl {

struct VictimConfig {
  std::size_t n_agents = 0;  // victim team plus the adversary slot
  std::size_t obs_dim = 0;
  std::size_t state_dim = 0;
  bool discrete = true;
  std::size_t num_actions = 0;
  std::size_t action_dim = 0;
  std::vector<std::size_t> hidden_dims{64};
  nn::Activation activation = nn::Activation::kRelu;
  bool share_actor = true;  // one actor for all agents, id one-hot appended
  double gain = 0.01;
  double std_y_coef = 0.5;
  double std_x_coef = 1.0;

  static VictimConfig for_env(const env::PosgSpec& spec);
  void validate() const;
};

struct VictimAction {
  std::size_t discrete = 0;
  Vec continuous;
  double log_prob = 0.0;
};

/// The cooperative team: a (possibly shared) actor per agent and one
/// centralized critic over the global state. After `freeze()` the set is
/// immutable; mutation attempts raise IntegrityError and actions become
/// deterministic, which keeps attack rollouts replayable.
///
/// Access is split into three tiers for black-box accounting:
///   act()                 behavioral, never audited (observing deployed agents)
///   policy()/value()      distribution/value oracles, counted as queries
///   *_params*()           parameter access, counted as reads
/// An AttackScope asserts that an attack used the behavioral tier only.
class VictimPolicySet {
 public:
  VictimPolicySet(const VictimConfig& cfg, std::uint64_t seed);

  const VictimConfig& config() const { return cfg_; }
  const ActorSpec& actor_spec() const { return actor_spec_; }
  const nn::MLPSpec& critic_spec() const { return critic_spec_; }

  /// Observation plus the agent-id one-hot when the actor is shared.
  Vec actor_input(std::size_t agent, const Vec& obs) const;

  /// Sampled action while trainable, deterministic (mode) once frozen or
  /// when no engine is supplied.
  VictimAction act(std::size_t agent, const Vec& obs,
                   std::mt19937_64* rng = nullptr) const;

  nn::ActionDistribution policy(std::size_t agent, const Vec& obs) const;
  double value(const Vec& state) const;

  nn::ParameterSet& actor_params(std::size_t agent);
  nn::ParameterSet& critic_params();
  const nn::ParameterSet& actor_params_view(std::size_t agent) const;
  const nn::ParameterSet& critic_params_view() const;

  void freeze();
  bool frozen() const { return frozen_; }
  std::uint64_t checksum() const;
  /// Throws IntegrityError when the frozen parameters drifted from the
  /// checksum taken at freeze time.
  void verify_integrity() const;

  void save(const std::string& path) const;
  void load(const std::string& path);

  std::uint64_t param_reads() const { return param_reads_; }
  std::uint64_t policy_queries() const { return policy_queries_; }

 private:
  nn::ActionDistribution dist_of(std::size_t agent, const Vec& obs) const;
  const nn::ParameterSet& actor_of(std::size_t agent) const;

  VictimConfig cfg_;
  ActorSpec actor_spec_;
  nn::MLPSpec critic_spec_;
  std::vector<nn::ParameterSet> actors_;  // one entry when shared
  nn::ParameterSet critic_;
  bool frozen_ = false;
  std::uint64_t checksum_ = 0;
  mutable std::uint64_t param_reads_ = 0;
  mutable std::uint64_t policy_queries_ = 0;
};

/// Black-box audit window. Construct before handing the victims to attack
/// code; verify() throws ProtocolError if any parameter read or policy/value
/// query happened inside the window.
class AttackScope {
 public:
  explicit AttackScope(const VictimPolicySet& victims);

  std::uint64_t param_reads() const;
  std::uint64_t policy_queries() const;
  void verify() const;

 private:
  const VictimPolicySet& victims_;
  std::uint64_t reads0_;
  std::uint64_t queries0_;
};

}  // namespace ami::rl
